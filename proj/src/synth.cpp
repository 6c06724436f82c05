#include "cds/synth.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cds {

namespace {

uint64_t hash3(int64_t x, int64_t y, int64_t z, uint64_t seed) {
    uint64_t h = seed ^ 0x9e3779b97f4a7c15ull;
    for (uint64_t v : {static_cast<uint64_t>(x), static_cast<uint64_t>(y), static_cast<uint64_t>(z)}) {
        h ^= v + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
        h *= 0xbf58476d1ce4e5b9ull;
        h ^= h >> 29;
    }
    return h;
}

double lattice(int64_t x, int64_t y, int64_t z, uint64_t seed) {
    return static_cast<double>(hash3(x, y, z, seed) >> 11) * 0x1.0p-53;
}

double smooth(double t) {
    return t * t * (3.0 - 2.0 * t);
}

// Trilinearly interpolated value noise, C1-smooth.
double value_noise3(const Vec3& p, uint64_t seed) {
    const double fx = std::floor(p.x), fy = std::floor(p.y), fz = std::floor(p.z);
    const auto ix = static_cast<int64_t>(fx), iy = static_cast<int64_t>(fy), iz = static_cast<int64_t>(fz);
    const double tx = smooth(p.x - fx), ty = smooth(p.y - fy), tz = smooth(p.z - fz);
    double acc = 0;
    for (int dz = 0; dz <= 1; ++dz)
        for (int dy = 0; dy <= 1; ++dy)
            for (int dx = 0; dx <= 1; ++dx) {
                const double w = (dx ? tx : 1 - tx) * (dy ? ty : 1 - ty) * (dz ? tz : 1 - tz);
                acc += w * lattice(ix + dx, iy + dy, iz + dz, seed);
            }
    return acc;
}

double fbm(const Vec3& p, int octaves, uint64_t seed) {
    double acc = 0, amp = 0.5, freq = 1.0, norm = 0;
    for (int o = 0; o < octaves; ++o) {
        acc += amp * value_noise3({p.x * freq, p.y * freq, p.z * freq}, seed + static_cast<uint64_t>(o));
        norm += amp;
        amp *= 0.5;
        freq *= 2.0;
    }
    return acc / norm;
}

struct Rgb {
    double r, g, b;
};

Rgb texture_color(const SceneSpec& spec, const Vec3& p) {
    switch (spec.texture) {
        case TextureKind::Flat:
            return {0.5, 0.5, 0.5};
        case TextureKind::Checker: {
            const double f = spec.checker_freq;
            const long par = static_cast<long>(std::floor(p.x * f)) + static_cast<long>(std::floor(p.y * f)) +
                             static_cast<long>(std::floor(p.z * f));
            return (par & 1) ? Rgb{0.15, 0.2, 0.25} : Rgb{0.9, 0.85, 0.8};
        }
        case TextureKind::HalfCard: {
            if (p.x >= 0.0) return {0.5, 0.5, 0.5}; // flat half
            const double n = fbm(p, std::max(1, spec.perlin_octaves), spec.seed * 3 + 1);
            const double n2 = fbm({p.x + 11.3, p.y - 7.1, p.z + 3.9}, 2, spec.seed * 3 + 2);
            return {0.1 + 0.8 * n, 0.1 + 0.7 * n + 0.1 * n2, 0.2 + 0.6 * n + 0.2 * n2};
        }
        case TextureKind::Perlin:
        default: {
            const double n = fbm(p, std::max(1, spec.perlin_octaves), spec.seed * 3 + 1);
            const double n2 = fbm({p.x + 11.3, p.y - 7.1, p.z + 3.9}, 2, spec.seed * 3 + 2);
            return {0.1 + 0.8 * n, 0.1 + 0.7 * n + 0.1 * n2, 0.2 + 0.6 * n + 0.2 * n2};
        }
    }
}

// First positive hit along C + s * dir (dir has unit camera-z component, so s
// is the camera-frame depth). Returns s <= 0 on miss.
double intersect(const SceneGeometry& g, const Vec3& origin, const Vec3& dir) {
    double best = -1.0;
    auto consider = [&](double s) {
        if (s > 1e-9 && (best <= 0 || s < best)) best = s;
    };

    auto plane_hit = [&](double z) {
        if (std::abs(dir.z) < 1e-15) return -1.0;
        return (z - origin.z) / dir.z;
    };

    consider(plane_hit(g.z_bg));

    if (g.layout == Layout::TwoPlanes) {
        const double s = plane_hit(g.z_fg);
        if (s > 1e-9) {
            const Vec3 p = origin + dir * s;
            if (p.x < 0.0) consider(s);
        }
    } else if (g.layout == Layout::SphereOnPlane) {
        const Vec3 oc = origin - g.sphere_c;
        const double a = dir.dot(dir);
        const double b = 2.0 * oc.dot(dir);
        const double c = oc.dot(oc) - g.sphere_r * g.sphere_r;
        const double disc = b * b - 4 * a * c;
        if (disc >= 0) {
            const double sq = std::sqrt(disc);
            consider((-b - sq) / (2 * a));
            consider((-b + sq) / (2 * a));
        }
    } else if (g.layout == Layout::TexturedBox) {
        double t0 = -1e300, t1 = 1e300;
        const double o[3] = {origin.x, origin.y, origin.z};
        const double d[3] = {dir.x, dir.y, dir.z};
        const double mn[3] = {g.box_min.x, g.box_min.y, g.box_min.z};
        const double mx[3] = {g.box_max.x, g.box_max.y, g.box_max.z};
        bool ok = true;
        for (int i = 0; i < 3 && ok; ++i) {
            if (std::abs(d[i]) < 1e-15) {
                if (o[i] < mn[i] || o[i] > mx[i]) ok = false;
                continue;
            }
            double a = (mn[i] - o[i]) / d[i];
            double b = (mx[i] - o[i]) / d[i];
            if (a > b) std::swap(a, b);
            t0 = std::max(t0, a);
            t1 = std::min(t1, b);
        }
        if (ok && t0 <= t1) consider(t0);
    }
    return best;
}

Camera look_at(const Vec3& center, const Vec3& target, double f, double cx, double cy, double d_min,
               double d_max) {
    Vec3 zc = target - center;
    const double zn = zc.norm();
    zc = zc * (1.0 / zn);
    // up = +y (image rows grow downward in world y as well)
    Vec3 xc{zc.z, 0, -zc.x};
    const double xn = xc.norm();
    xc = xc * (1.0 / xn);
    const Vec3 yc{zc.y * xc.z - zc.z * xc.y, zc.z * xc.x - zc.x * xc.z, zc.x * xc.y - zc.y * xc.x};

    Camera cam;
    cam.K = Mat3::identity();
    cam.K(0, 0) = f;
    cam.K(1, 1) = f;
    cam.K(0, 2) = cx;
    cam.K(1, 2) = cy;
    cam.R(0, 0) = xc.x;
    cam.R(0, 1) = xc.y;
    cam.R(0, 2) = xc.z;
    cam.R(1, 0) = yc.x;
    cam.R(1, 1) = yc.y;
    cam.R(1, 2) = yc.z;
    cam.R(2, 0) = zc.x;
    cam.R(2, 1) = zc.y;
    cam.R(2, 2) = zc.z;
    cam.t = (cam.R * center) * -1.0;
    cam.d_min = d_min;
    cam.d_max = d_max;
    return cam;
}

} // namespace

std::vector<std::vector<int>> default_pairs(int n_views) {
    // Arc offsets are 0, +1, -1, +2, -2, ...; proximity in offset space.
    auto offset = [](int i) { return i == 0 ? 0 : (i % 2 ? (i + 1) / 2 : -(i / 2)); };
    std::vector<std::vector<int>> pairs(static_cast<size_t>(n_views));
    for (int r = 0; r < n_views; ++r) {
        std::vector<int> others;
        for (int i = 0; i < n_views; ++i)
            if (i != r) others.push_back(i);
        std::stable_sort(others.begin(), others.end(), [&](int a, int b) {
            return std::abs(offset(a) - offset(r)) < std::abs(offset(b) - offset(r));
        });
        pairs[static_cast<size_t>(r)] = others;
    }
    return pairs;
}

Scene generate_scene(const SceneSpec& spec) {
    if (spec.n_views < 2) throw std::invalid_argument("generate_scene: need at least 2 views");
    if (spec.baseline <= 0.0) throw std::invalid_argument("generate_scene: baseline must be positive");
    if (spec.height % 8 || spec.width % 8)
        throw std::invalid_argument("generate_scene: resolution must be divisible by 8");
    if (!(spec.d_min > 0 && spec.d_min < spec.d_max))
        throw std::invalid_argument("generate_scene: bad depth range");

    Rng rng(spec.seed);
    const double mid = 0.5 * (spec.d_min + spec.d_max);
    const double range = spec.d_max - spec.d_min;

    Scene scene;
    scene.spec = spec;
    SceneGeometry& g = scene.geom;
    g.layout = spec.layout;
    const double front = spec.plane_depth > 0 ? spec.plane_depth : mid + rng.uniform(-0.15, 0.15) * range;
    switch (spec.layout) {
        case Layout::Plane:
            g.z_bg = front;
            break;
        case Layout::TwoPlanes:
            g.z_fg = front - 0.15 * range;
            g.z_bg = front + 0.2 * range + rng.uniform(0, 0.05) * range;
            break;
        case Layout::SphereOnPlane:
            g.z_bg = front + 0.22 * range;
            g.sphere_r = 0.5 + 0.35 * rng.uniform();
            g.sphere_c = Vec3{rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5), front + g.sphere_r * 0.3};
            break;
        case Layout::TexturedBox: {
            const double w = 0.6 + 0.5 * rng.uniform(), h = 0.6 + 0.5 * rng.uniform();
            const Vec3 c{rng.uniform(-0.4, 0.4), rng.uniform(-0.4, 0.4), 0};
            g.box_min = Vec3{c.x - w, c.y - h, front - 0.1 * range};
            g.box_max = Vec3{c.x + w, c.y + h, front + 0.25 * range};
            g.z_bg = front + 0.28 * range;
            break;
        }
    }

    const int H = spec.height, W = spec.width;
    const double f = static_cast<double>(W);
    const double cx = W / 2.0, cy = H / 2.0;
    const Vec3 target{0, 0, mid};
    const double arc_r = mid;

    auto arc_offset = [](int i) { return i == 0 ? 0 : (i % 2 ? (i + 1) / 2 : -(i / 2)); };

    for (int i = 0; i < spec.n_views; ++i) {
        const double theta = arc_offset(i) * spec.baseline / arc_r;
        const Vec3 center = target + Vec3{arc_r * std::sin(theta), 0, -arc_r * std::cos(theta)};
        Camera cam = look_at(center, target, f, cx, cy, spec.d_min, spec.d_max);
        scene.views.push_back(render_view(spec, g, cam, static_cast<uint64_t>(i)));
    }
    return scene;
}

View render_view(const SceneSpec& spec, const SceneGeometry& geom, const Camera& cam,
                 uint64_t noise_stream) {
    const int H = spec.height, W = spec.width;
    View view;
    view.cam = cam;
    view.image = Array({3, H, W});
    view.gt_depth = Array({H, W});
    view.mask = Array({H, W});
    Rng noise(spec.seed * 1315423911ull + noise_stream + 100);

    const Mat3 rt = cam.R.transposed();
    const Mat3 kinv = cam.K.inverse();
    const Vec3 c_world = cam.center();
    const long m = static_cast<long>(H) * W;
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            const long idx = static_cast<long>(y) * W + x;
            const Vec3 dc = kinv * Vec3{static_cast<double>(x), static_cast<double>(y), 1.0};
            const Vec3 dw = rt * dc; // camera-z component of dc is 1 -> s is depth
            const double s = intersect(geom, c_world, dw);
            if (s <= 0) continue;
            view.mask[idx] = 1.0;
            view.gt_depth[idx] = s;
            const Vec3 p = c_world + dw * s;
            Rgb col = texture_color(spec, p);
            if (spec.noise_sigma > 0) {
                col.r += spec.noise_sigma * noise.normal();
                col.g += spec.noise_sigma * noise.normal();
                col.b += spec.noise_sigma * noise.normal();
            }
            view.image[idx] = std::clamp(col.r, 0.0, 1.0);
            view.image[m + idx] = std::clamp(col.g, 0.0, 1.0);
            view.image[2 * m + idx] = std::clamp(col.b, 0.0, 1.0);
        }

    // Oblique views can see slightly past the nominal range; widen the
    // per-view range so hypotheses always cover the ground truth.
    double lo = 1e300, hi = 0;
    for (long idx = 0; idx < m; ++idx)
        if (view.mask[idx] > 0) {
            lo = std::min(lo, view.gt_depth[idx]);
            hi = std::max(hi, view.gt_depth[idx]);
        }
    view.cam.d_min = std::min(spec.d_min, 0.98 * lo);
    view.cam.d_max = std::max(spec.d_max, 1.02 * hi);
    return view;
}

double raycast_depth(const SceneGeometry& geom, const Camera& cam, double px, double py) {
    const Vec3 dc = cam.K.inverse() * Vec3{px, py, 1.0};
    const Vec3 dw = cam.R.transposed() * dc;
    return intersect(geom, cam.center(), dw);
}

double cross_view_consistency_check(const Scene& scene) {
    double worst = 0.0;
    const int n = static_cast<int>(scene.views.size());
    for (int a = 0; a < n; ++a) {
        const View& va = scene.views[static_cast<size_t>(a)];
        const int H = va.gt_depth.dim(0), W = va.gt_depth.dim(1);
        for (int b = 0; b < n; ++b) {
            if (a == b) continue;
            const View& vb = scene.views[static_cast<size_t>(b)];
            for (int y = 0; y < H; ++y)
                for (int x = 0; x < W; ++x) {
                    if (va.mask.at(y, x) == 0.0) continue;
                    const Vec3 p = unproject(x, y, va.gt_depth.at(y, x), va.cam);
                    const Projected q = project(p, vb.cam);
                    if (q.depth <= 0 || q.x < 0 || q.x > W - 1 || q.y < 0 || q.y > H - 1) continue;
                    const double hit = raycast_depth(scene.geom, vb.cam, q.x, q.y);
                    if (hit <= 0) continue;
                    if (hit < q.depth - 1e-6) continue; // occluded in b
                    worst = std::max(worst, std::abs(hit - q.depth));
                }
        }
    }
    return worst;
}

} // namespace cds
