#include "cds/geometry.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace cds {

double Vec3::norm() const {
    return std::sqrt(x * x + y * y + z * z);
}

Mat3 Mat3::identity() {
    Mat3 r;
    r.m[0] = r.m[4] = r.m[8] = 1.0;
    return r;
}

Mat3 Mat3::operator*(const Mat3& o) const {
    Mat3 r;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            double s = 0;
            for (int k = 0; k < 3; ++k) s += (*this)(i, k) * o(k, j);
            r(i, j) = s;
        }
    return r;
}

Mat3 Mat3::operator+(const Mat3& o) const {
    Mat3 r;
    for (int i = 0; i < 9; ++i) r.m[i] = m[i] + o.m[i];
    return r;
}

Mat3 Mat3::operator*(double s) const {
    Mat3 r;
    for (int i = 0; i < 9; ++i) r.m[i] = m[i] * s;
    return r;
}

Vec3 Mat3::operator*(const Vec3& v) const {
    return {m[0] * v.x + m[1] * v.y + m[2] * v.z, m[3] * v.x + m[4] * v.y + m[5] * v.z,
            m[6] * v.x + m[7] * v.y + m[8] * v.z};
}

Mat3 Mat3::transposed() const {
    Mat3 r;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) r(i, j) = (*this)(j, i);
    return r;
}

double Mat3::det() const {
    return m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6]) +
           m[2] * (m[3] * m[7] - m[4] * m[6]);
}

Mat3 Mat3::inverse() const {
    const double d = det();
    if (std::abs(d) < 1e-300) throw std::runtime_error("Mat3::inverse: singular matrix");
    Mat3 r;
    r.m[0] = (m[4] * m[8] - m[5] * m[7]) / d;
    r.m[1] = (m[2] * m[7] - m[1] * m[8]) / d;
    r.m[2] = (m[1] * m[5] - m[2] * m[4]) / d;
    r.m[3] = (m[5] * m[6] - m[3] * m[8]) / d;
    r.m[4] = (m[0] * m[8] - m[2] * m[6]) / d;
    r.m[5] = (m[2] * m[3] - m[0] * m[5]) / d;
    r.m[6] = (m[3] * m[7] - m[4] * m[6]) / d;
    r.m[7] = (m[1] * m[6] - m[0] * m[7]) / d;
    r.m[8] = (m[0] * m[4] - m[1] * m[3]) / d;
    return r;
}

Camera Camera::scaled(double s) const {
    Camera c = *this;
    c.K(0, 0) *= s;
    c.K(1, 1) *= s;
    c.K(0, 1) *= s;
    c.K(0, 2) *= s;
    c.K(1, 2) *= s;
    return c;
}

void Camera::validate() const {
    const Mat3 rrt = R * R.transposed();
    const Mat3 id = Mat3::identity();
    for (int i = 0; i < 9; ++i)
        if (std::abs(rrt.m[i] - id.m[i]) > 1e-9) throw std::invalid_argument("Camera: R not orthonormal");
    if (std::abs(R.det() - 1.0) > 1e-9) throw std::invalid_argument("Camera: det(R) != +1");
    if (K(0, 0) <= 0 || K(1, 1) <= 0) throw std::invalid_argument("Camera: non-positive focal length");
    if (std::abs(K(1, 0)) > 0 || std::abs(K(2, 0)) > 0 || std::abs(K(2, 1)) > 0)
        throw std::invalid_argument("Camera: K not upper-triangular");
    if (!(d_min > 0 && d_min < d_max)) throw std::invalid_argument("Camera: bad depth range");
}

Vec3 epipole(const Camera& cam_ref, const Camera& cam_src) {
    const Vec3 c_ref = cam_ref.center();
    const Vec3 c_src = cam_src.center();
    const Vec3 baseline = c_src - c_ref;
    if (baseline.norm() <= 1e-12 * (1.0 + c_ref.norm())) throw EpipoleUndefined();
    return cam_ref.K * (cam_ref.R * baseline);
}

EpipolarField epipolar_direction_field(const Vec3& e, int H, int W) {
    EpipolarField f;
    f.omega = Array({2, H, W});
    f.valid = Array({H, W}, 1.0);
    const long m = static_cast<long>(H) * W;
    const double e_norm = std::sqrt(e.x * e.x + e.y * e.y + e.z * e.z);
    const bool at_infinity = std::abs(e.z) < 1e-12 * e_norm;

    if (at_infinity) {
        const double n = std::sqrt(e.x * e.x + e.y * e.y);
        const double u = n > 0 ? e.x / n : 1.0;
        const double v = n > 0 ? e.y / n : 0.0;
        for (long i = 0; i < m; ++i) {
            f.omega[i] = u;
            f.omega[m + i] = v;
        }
        return f;
    }

    const double ex = e.x / e.z, ey = e.y / e.z;
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            const long i = static_cast<long>(y) * W + x;
            const double dx = ex - x, dy = ey - y;
            const double n = std::sqrt(dx * dx + dy * dy);
            if (n < 1.0) {
                f.valid[i] = 0.0;
                f.omega[i] = 1.0;
                f.omega[m + i] = 0.0;
            } else {
                f.omega[i] = dx / n;
                f.omega[m + i] = dy / n;
            }
        }
    return f;
}

Mat3 plane_sweep_homography(const Camera& cam_ref, const Camera& cam_src, double d) {
    if (d <= 0.0) throw std::invalid_argument("plane_sweep_homography: depth must be positive");
    const Mat3 r_rel = cam_src.R * cam_ref.R.transposed();
    const Vec3 t_rel = cam_src.t - r_rel * cam_ref.t;
    Mat3 tn; // t_rel * n^T with n = [0,0,1]
    tn(0, 2) = t_rel.x;
    tn(1, 2) = t_rel.y;
    tn(2, 2) = t_rel.z;
    return cam_src.K * (r_rel + tn * (1.0 / d)) * cam_ref.K.inverse();
}

WarpedFeature warp_feature(const Var& f_src, const Camera& cam_ref, const Camera& cam_src,
                           const DepthHypotheses& depths) {
    const int C = f_src.value().dim(0);
    const int Hs = f_src.value().dim(1), Ws = f_src.value().dim(2);
    const int D = depths.values.dim(0);
    const int H = depths.values.dim(1), W = depths.values.dim(2);
    const long m = static_cast<long>(H) * W;

    // H(d) = A + B/d splits the per-pixel plane-induced warp into two fixed maps.
    const Mat3 r_rel = cam_src.R * cam_ref.R.transposed();
    const Vec3 t_rel = cam_src.t - r_rel * cam_ref.t;
    Mat3 tn;
    tn(0, 2) = t_rel.x;
    tn(1, 2) = t_rel.y;
    tn(2, 2) = t_rel.z;
    const Mat3 kinv = cam_ref.K.inverse();
    const Mat3 a = cam_src.K * r_rel * kinv;
    const Mat3 b = cam_src.K * tn * kinv;

    WarpedFeature out;
    out.mask = Array({D, H, W});
    std::vector<Var> slices;
    slices.reserve(static_cast<size_t>(D));
    for (int j = 0; j < D; ++j) {
        Array coords({2, H, W});
        const double* dvals = depths.values.data() + static_cast<long>(j) * m;
        double* maskp = out.mask.data() + static_cast<long>(j) * m;
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                const long i = static_cast<long>(y) * W + x;
                const double inv_d = 1.0 / dvals[i];
                const Vec3 p{static_cast<double>(x), static_cast<double>(y), 1.0};
                const Vec3 q = a * p + (b * p) * inv_d;
                if (q.z < 1e-12) { // behind or on the source image plane

                    coords[i] = -1e9;
                    coords[m + i] = -1e9;
                    maskp[i] = 0.0;
                    continue;
                }
                const double sx = q.x / q.z, sy = q.y / q.z;
                coords[i] = sx;
                coords[m + i] = sy;
                maskp[i] = (sx >= 0.0 && sx <= Ws - 1.0 && sy >= 0.0 && sy <= Hs - 1.0) ? 1.0 : 0.0;
            }
        Var warped = grid_sample_bilinear(f_src, constant(std::move(coords)));
        slices.push_back(reshape(warped, {1, C, H, W}));
    }
    out.values = concat0(slices);
    return out;
}

DepthHypotheses depth_hypotheses(int stage, const Array* prev_depth, const Camera& cam_ref,
                                 const CascadeConfig& cfg, int H0, int W0) {
    if (stage < 0 || stage > 2) throw std::invalid_argument("depth_hypotheses: stage must be 0..2");
    DepthHypotheses out;
    out.stage = stage;
    const double lo = cam_ref.d_min / 2.0, hi = 2.0 * cam_ref.d_max;

    if (stage == 0) {
        const int D = cfg.plane_counts[0];
        if (H0 < 1 || W0 < 1) throw std::invalid_argument("depth_hypotheses: stage 0 needs a resolution");
        out.values = Array({D, H0, W0});
        const long m = static_cast<long>(H0) * W0;
        for (int j = 0; j < D; ++j) {
            const double d = cam_ref.d_min + (cam_ref.d_max - cam_ref.d_min) * j / (D - 1);
            double* slice = out.values.data() + static_cast<long>(j) * m;
            for (long i = 0; i < m; ++i) slice[i] = d;
        }
        return out;
    }

    if (!prev_depth || prev_depth->empty())
        throw std::invalid_argument("depth_hypotheses: stages 1-2 require the previous depth map");
    const Array up = bilinear_upsample2(*prev_depth);
    const int H = up.dim(0), W = up.dim(1);
    const int D = cfg.plane_counts[stage];
    const double spacing = cfg.interval_scales[stage] * cfg.delta_base(cam_ref);
    const double half = spacing * (D - 1) / 2.0;

    out.values = Array({D, H, W});
    const long m = static_cast<long>(H) * W;
    for (long i = 0; i < m; ++i) {
        double center = up[i];
        double start = center - half;
        if (start < lo) start = lo;
        if (start + spacing * (D - 1) > hi) start = hi - spacing * (D - 1);
        for (int j = 0; j < D; ++j) out.values[static_cast<long>(j) * m + i] = start + spacing * j;
    }
    return out;
}

Projected project(const Vec3& point, const Camera& cam) {
    const Vec3 pc = cam.R * point + cam.t;
    const Vec3 q = cam.K * pc;
    Projected p;
    p.depth = pc.z;
    p.x = q.x / q.z;
    p.y = q.y / q.z;
    return p;
}

Vec3 unproject(double px, double py, double depth, const Camera& cam) {
    const Vec3 ray = cam.K.inverse() * Vec3{px, py, 1.0};
    const Vec3 pc = ray * depth;
    return cam.R.transposed() * (pc - cam.t);
}

Camera read_camera_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open camera file: " + path);
    std::vector<std::string> words;
    std::string w;
    while (is >> w) words.push_back(w);

    auto find_kw = [&](const std::string& kw) {
        for (size_t i = 0; i < words.size(); ++i)
            if (words[i] == kw) return i;
        throw std::runtime_error("camera file missing '" + kw + "': " + path);
    };
    auto num = [&](size_t i) {
        try {
            return std::stod(words.at(i));
        } catch (...) {
            throw std::runtime_error("camera file parse error: " + path);
        }
    };

    Camera cam;
    auto tcomp = [&cam](int r) -> double& { return r == 0 ? cam.t.x : (r == 1 ? cam.t.y : cam.t.z); };
    const size_t ext = find_kw("extrinsic") + 1;
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) cam.R(r, c) = num(ext + r * 4 + c);
        tcomp(r) = num(ext + r * 4 + 3);
    }
    const size_t intr = find_kw("intrinsic") + 1;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) cam.K(r, c) = num(intr + r * 3 + c);

    // Depth line: "d_min interval d_max" preferred, "d_min d_max" accepted.
    const size_t rest = intr + 9;
    const size_t nrest = words.size() - rest;
    if (nrest >= 3) {
        cam.d_min = num(rest);
        cam.d_max = num(rest + 2);
    } else if (nrest == 2) {
        cam.d_min = num(rest);
        cam.d_max = num(rest + 1);
    } else {
        throw std::runtime_error("camera file missing depth range: " + path);
    }
    return cam;
}

void write_camera_file(const std::string& path, const Camera& cam) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write camera file: " + path);
    os << std::setprecision(9);
    const double tc[3] = {cam.t.x, cam.t.y, cam.t.z};
    os << "extrinsic\n";
    for (int r = 0; r < 3; ++r)
        os << cam.R(r, 0) << " " << cam.R(r, 1) << " " << cam.R(r, 2) << " " << tc[r] << "\n";
    os << "0 0 0 1\n\nintrinsic\n";
    for (int r = 0; r < 3; ++r) os << cam.K(r, 0) << " " << cam.K(r, 1) << " " << cam.K(r, 2) << "\n";
    const double interval = (cam.d_max - cam.d_min) / 48.0;
    os << "\n" << cam.d_min << " " << interval << " " << cam.d_max << "\n";
    if (!os) throw std::runtime_error("camera file write failed: " + path);
}

} // namespace cds
