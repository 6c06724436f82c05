#pragma once

#include <stdexcept>
#include <string>

#include "cds/autodiff.hpp"

namespace cds {

struct EpipoleUndefined : std::runtime_error {
    EpipoleUndefined() : std::runtime_error("epipole undefined: coincident camera centers") {}
};

struct Vec3 {
    double x = 0, y = 0, z = 0;
    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
    double norm() const;
};

struct Mat3 {
    double m[9] = {0, 0, 0, 0, 0, 0, 0, 0, 0};
    static Mat3 identity();
    double& operator()(int r, int c) { return m[r * 3 + c]; }
    double operator()(int r, int c) const { return m[r * 3 + c]; }
    Mat3 operator*(const Mat3& o) const;
    Mat3 operator+(const Mat3& o) const;
    Mat3 operator*(double s) const;
    Vec3 operator*(const Vec3& v) const;
    Mat3 transposed() const;
    Mat3 inverse() const; // throws on singular input
    double det() const;
};

/// Pinhole camera: world-to-camera rotation R, translation t, intrinsics K,
/// usable depth range [d_min, d_max] in scene units.
struct Camera {
    Mat3 K;
    Mat3 R;
    Vec3 t;
    double d_min = 0, d_max = 0;

    Vec3 center() const { return (R.transposed() * t) * -1.0; }
    Camera scaled(double s) const; // intrinsics scaled for a resized image
    void validate() const;         // R orthonormal det +1, K upper-triangular, range ordered
};

struct EpipolarField {
    Array omega; // [2,H,W] unit direction (u = x component, v = y component)
    Array valid; // [H,W] 1/0
};

struct DepthHypotheses {
    Array values; // [D,H,W], strictly increasing along D at each pixel
    int stage = 0;
};

struct CascadeConfig {
    int plane_counts[3] = {48, 32, 8};
    double interval_scales[3] = {4.0, 2.0, 1.0};
    double delta_base(const Camera& cam) const { return (cam.d_max - cam.d_min) / plane_counts[0]; }
};

/// e = K_ref R_ref (C_src - C_ref), homogeneous; e_z == 0 means an epipole at
/// infinity. Throws EpipoleUndefined for coincident centers.
Vec3 epipole(const Camera& cam_ref, const Camera& cam_src);

/// Unit directions pointing toward the epipole; pixels within 1 px of a
/// finite epipole are invalid with fallback direction [1,0].
EpipolarField epipolar_direction_field(const Vec3& e, int H, int W);

/// Homography mapping reference pixels to source pixels through the
/// fronto-parallel plane at depth d (reference frame).
Mat3 plane_sweep_homography(const Camera& cam_ref, const Camera& cam_src, double d);

struct WarpedFeature {
    Var values; // [D,C,H,W]
    Array mask; // [D,H,W] validity of the sample location
};

/// Warps source features onto each hypothesis plane via bilinear sampling.
/// Differentiable w.r.t. feature values; hypothesis depths are plain data.
WarpedFeature warp_feature(const Var& f_src, const Camera& cam_ref, const Camera& cam_src,
                           const DepthHypotheses& depths);

/// Stage 0: uniform sweep of the full range at resolution H0 x W0. Stages
/// 1-2: per-pixel windows centered on the upsampled previous depth, spacing
/// interval_scales[stage] * delta_base, clamped to [d_min/2, 2*d_max] by
/// shifting the whole window.
DepthHypotheses depth_hypotheses(int stage, const Array* prev_depth, const Camera& cam_ref,
                                 const CascadeConfig& cfg, int H0 = 0, int W0 = 0);

struct Projected {
    double x = 0, y = 0, depth = 0;
};

Projected project(const Vec3& point, const Camera& cam);
Vec3 unproject(double px, double py, double depth, const Camera& cam);

// MVSNet-style cam.txt: "extrinsic" + 4x4 [R|t;0 0 0 1], "intrinsic" + 3x3 K,
// then "d_min interval d_max" (two trailing numbers are also accepted).
Camera read_camera_file(const std::string& path);
void write_camera_file(const std::string& path, const Camera& cam);

} // namespace cds
