#pragma once

#include <vector>

#include "cds/geometry.hpp"
#include "cds/rng.hpp"

namespace cds {

enum class Layout { Plane, TwoPlanes, SphereOnPlane, TexturedBox };
enum class TextureKind { Checker, Perlin, Flat, HalfCard };

struct SceneSpec {
    Layout layout = Layout::SphereOnPlane;
    TextureKind texture = TextureKind::Perlin;
    double checker_freq = 2.0; // cycles per scene unit
    int perlin_octaves = 3;
    int n_views = 3;
    double baseline = 1.25; // arc spacing between neighbouring cameras
    int height = 128, width = 128;
    double d_min = 2.0, d_max = 6.0;
    uint64_t seed = 1;
    double noise_sigma = 0.0; // optional Gaussian pixel noise
    double plane_depth = 0.0; // > 0 pins the (front) surface depth; 0 = seeded
};

/// Analytic surfaces resolved from the spec + seed; kept on the scene so
/// consistency checks can re-cast exact rays.
struct SceneGeometry {
    Layout layout = Layout::Plane;
    double z_bg = 0;             // background plane depth (world z)
    double z_fg = 0;             // foreground plane depth (TwoPlanes)
    Vec3 sphere_c;               // SphereOnPlane
    double sphere_r = 0;
    Vec3 box_min, box_max;       // TexturedBox
};

struct View {
    Array image;    // [3,H,W] in [0,1]
    Camera cam;
    Array gt_depth; // [H,W] camera-frame z depth
    Array mask;     // [H,W] 1 where a surface was hit
};

struct Scene {
    SceneSpec spec;
    SceneGeometry geom;
    std::vector<View> views;
};

/// Cameras sit on an arc facing the scene center; view 0 looks straight down
/// the world z axis, the others alternate left/right with `baseline` spacing.
Scene generate_scene(const SceneSpec& spec);

/// Depth of the first surface hit along the exact ray through (px,py); <= 0
/// when nothing is hit.
double raycast_depth(const SceneGeometry& geom, const Camera& cam, double px, double py);

/// Ray-casts one view of the analytic scene with an arbitrary camera.
View render_view(const SceneSpec& spec, const SceneGeometry& geom, const Camera& cam,
                 uint64_t noise_stream = 0);

/// Reprojects GT depths between all ordered view pairs against the analytic
/// surfaces, excluding occluded points by a z-test. Returns the max residual.
double cross_view_consistency_check(const Scene& scene);

/// Source-view ordering for each reference: remaining views by arc proximity.
std::vector<std::vector<int>> default_pairs(int n_views);

} // namespace cds
