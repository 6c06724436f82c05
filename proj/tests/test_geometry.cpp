#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>

#include "cds/geometry.hpp"
#include "cds/rng.hpp"
#include "cds/synth.hpp"

using namespace cds;

namespace {

Camera make_camera(double f, double cx, double cy, Vec3 center, double d_min = 2.0, double d_max = 6.0) {
    Camera c;
    c.K = Mat3::identity();
    c.K(0, 0) = f;
    c.K(1, 1) = f;
    c.K(0, 2) = cx;
    c.K(1, 2) = cy;
    c.R = Mat3::identity();
    c.t = center * -1.0; // R = I, so t = -C
    c.d_min = d_min;
    c.d_max = d_max;
    return c;
}

} // namespace

TEST_CASE("epipole directions for canonical baselines") {
    Camera ref = make_camera(100, 50, 50, {0, 0, 0});

    SUBCASE("x-translation puts the epipole at infinity along +x") {
        Camera src = make_camera(100, 50, 50, {1.5, 0, 0});
        Vec3 e = epipole(ref, src);
        CHECK(std::abs(e.z) < 1e-12 * e.norm());
        CHECK(e.x > 0);
        CHECK(std::abs(e.y) < 1e-12);
    }
    SUBCASE("forward motion focuses at the principal point") {
        Camera src = make_camera(100, 50, 50, {0, 0, 0.7});
        Vec3 e = epipole(ref, src);
        CHECK(e.x / e.z == doctest::Approx(50.0));
        CHECK(e.y / e.z == doctest::Approx(50.0));
    }
    SUBCASE("coincident centers are rejected") {
        Camera src = make_camera(100, 50, 50, {0, 0, 0});
        CHECK_THROWS_AS(epipole(ref, src), EpipoleUndefined);
    }
}

TEST_CASE("epipolar direction fields") {
    SUBCASE("infinite epipole gives a constant valid field") {
        EpipolarField f = epipolar_direction_field({1, 0, 0}, 8, 8);
        for (long i = 0; i < 64; ++i) {
            CHECK(f.omega[i] == doctest::Approx(1.0));
            CHECK(f.omega[64 + i] == doctest::Approx(0.0));
            CHECK(f.valid[i] == 1.0);
        }
    }
    SUBCASE("finite epipole points toward it") {
        EpipolarField f = epipolar_direction_field({50, 50, 1}, 100, 100);
        const long m = 100 * 100;
        const long i1 = 50 * 100 + 80; // pixel (x=80, y=50)
        CHECK(f.omega[i1] == doctest::Approx(-1.0));
        CHECK(f.omega[m + i1] == doctest::Approx(0.0));
        const long i2 = 90 * 100 + 50; // pixel (x=50, y=90)
        CHECK(f.omega[i2] == doctest::Approx(0.0));
        CHECK(f.omega[m + i2] == doctest::Approx(-1.0));
    }
    SUBCASE("the epipole pixel itself is invalid with fallback [1,0]") {
        EpipolarField f = epipolar_direction_field({10, 10, 1}, 32, 32);
        const long i = 10 * 32 + 10;
        CHECK(f.valid[i] == 0.0);
        CHECK(f.omega[i] == 1.0);
        CHECK(f.omega[32 * 32 + i] == 0.0);
    }
    SUBCASE("unit norm and colinearity with the epipole") {
        const Vec3 e{23.4, 11.9, 1.0};
        EpipolarField f = epipolar_direction_field(e, 40, 40);
        const long m = 40 * 40;
        for (int y = 0; y < 40; y += 3)
            for (int x = 0; x < 40; x += 3) {
                const long i = y * 40 + x;
                if (f.valid[i] == 0.0) continue;
                const double u = f.omega[i], v = f.omega[m + i];
                CHECK(std::abs(u * u + v * v - 1.0) < 1e-9);
                // (e - X) x omega == 0 up to normalization
                const double cx = (e.x - x) * v - (e.y - y) * u;
                CHECK(std::abs(cx) / std::hypot(e.x - x, e.y - y) < 1e-9);
            }
    }
}

TEST_CASE("plane sweep homographies") {
    Camera ref = make_camera(100, 50, 50, {0, 0, 0});

    SUBCASE("self-pair is the identity at any depth") {
        for (double d : {0.5, 3.0, 777.0}) {
            Mat3 h = plane_sweep_homography(ref, ref, d);
            const Mat3 id = Mat3::identity();
            for (int i = 0; i < 9; ++i) CHECK(h.m[i] == doctest::Approx(id.m[i]).epsilon(1e-12));
        }
    }
    SUBCASE("rectified pair shifts by f*b/d") {
        const double b = 0.8, d = 3.2, f = 100;
        Camera src = make_camera(f, 50, 50, {b, 0, 0});
        Mat3 h = plane_sweep_homography(ref, src, d);
        const Mat3 id = Mat3::identity();
        for (int i = 0; i < 9; ++i) {
            if (i == 2) continue;
            CHECK(std::abs(h.m[i] - id.m[i]) < 1e-9);
        }
        CHECK(h(0, 2) == doctest::Approx(-f * b / d).epsilon(1e-9));
    }
    SUBCASE("depth to infinity approaches the rotation-only homography") {
        Camera src = make_camera(100, 50, 50, {0.4, 0.1, -0.2});
        // add a small rotation about y
        const double a = 0.05;
        src.R(0, 0) = std::cos(a);
        src.R(0, 2) = std::sin(a);
        src.R(2, 0) = -std::sin(a);
        src.R(2, 2) = std::cos(a);
        src.t = (src.R * Vec3{0.4, 0.1, -0.2}) * -1.0;
        Mat3 h_inf = plane_sweep_homography(ref, src, 1e12);
        const Mat3 r_rel = src.R * ref.R.transposed();
        const Mat3 want = src.K * r_rel * ref.K.inverse();
        for (int i = 0; i < 9; ++i) CHECK(std::abs(h_inf.m[i] - want.m[i]) < 1e-6);
    }
    SUBCASE("non-positive depth is rejected") {
        CHECK_THROWS(plane_sweep_homography(ref, ref, 0.0));
        CHECK_THROWS(plane_sweep_homography(ref, ref, -1.0));
    }
}

TEST_CASE("warp_feature") {
    Camera ref = make_camera(20, 16, 16, {0, 0, 0});

    SUBCASE("identical cameras reproduce the source at every depth") {
        Rng rng(5);
        Array f({2, 32, 32});
        for (long i = 0; i < f.numel(); ++i) f[i] = rng.uniform();
        CascadeConfig cfg;
        DepthHypotheses hyp = depth_hypotheses(0, nullptr, ref, cfg, 32, 32);
        WarpedFeature w = warp_feature(constant(f), ref, ref, hyp);
        const long m = 32 * 32;
        for (int j = 0; j < hyp.values.dim(0); j += 7)
            for (long i = 0; i < f.numel(); ++i)
                CHECK(w.values.value()[static_cast<long>(j) * f.numel() + i] == doctest::Approx(f[i]).epsilon(1e-12));
        for (long i = 0; i < m; ++i) CHECK(w.mask[i] == 1.0);
    }

    SUBCASE("rectified pair at the true plane depth matches the reference") {
        // Linear horizontal ramp: bilinear sampling is exact on linear images.
        const double b = 0.5, d_true = 4.0, f = 20;
        Camera src = make_camera(f, 16, 16, {b, 0, 0});
        const double disp = f * b / d_true;
        const int H = 32, W = 32;
        Array f_ref({1, H, W}), f_src({1, H, W});
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                f_ref.at(0, y, x) = 0.1 * x + 0.03 * y;
                f_src.at(0, y, x) = 0.1 * (x + disp) + 0.03 * y;
            }
        DepthHypotheses hyp;
        hyp.stage = 0;
        hyp.values = Array({1, H, W}, d_true);
        WarpedFeature w = warp_feature(constant(f_src), ref, src, hyp);
        int checked = 0;
        for (int y = 2; y < H - 2; ++y)
            for (int x = 2; x < W - 2; ++x) {
                if (w.mask.at(0, y, x) == 0.0) continue;
                CHECK(std::abs(w.values.value().at(0, 0, y, x) - f_ref.at(0, y, x)) < 1e-6);
                ++checked;
            }
        CHECK(checked > 0.9 * (H - 4) * (W - 4));
    }

    SUBCASE("hypotheses far from the truth lose valid samples") {
        const double b = 0.5, f = 20;
        Camera src = make_camera(f, 16, 16, {b, 0, 0});
        Array img({1, 32, 32}, 1.0);
        DepthHypotheses near, far;
        near.values = Array({1, 32, 32}, 4.0);
        far.values = Array({1, 32, 32}, 0.4); // huge disparity pushes samples out
        WarpedFeature wn = warp_feature(constant(img), ref, src, near);
        WarpedFeature wf = warp_feature(constant(img), ref, src, far);
        double sn = 0, sf = 0;
        for (long i = 0; i < wn.mask.numel(); ++i) {
            sn += wn.mask[i];
            sf += wf.mask[i];
        }
        CHECK(sf < sn);
    }
}

TEST_CASE("warp at ground truth is photometrically consistent on a textured plane") {
    // Rectified pair over a procedurally textured fronto-parallel plane with
    // an integer true disparity; warping the source at the true depth must
    // reproduce the reference almost everywhere.
    SceneSpec spec;
    spec.layout = Layout::Plane;
    spec.texture = TextureKind::Perlin;
    spec.height = 64;
    spec.width = 64;
    spec.seed = 21;
    spec.plane_depth = 4.0;
    SceneGeometry geom;
    geom.layout = Layout::Plane;
    geom.z_bg = 4.0;
    Camera c0 = make_camera(64, 32, 32, {0, 0, 0});
    Camera c1 = make_camera(64, 32, 32, {0.5, 0, 0}); // disparity 64*0.5/4 = 8 px
    View v0 = render_view(spec, geom, c0, 0);
    View v1 = render_view(spec, geom, c1, 1);

    DepthHypotheses hyp;
    hyp.values = Array({1, 64, 64}, 4.0);
    WarpedFeature w = warp_feature(constant(v1.image), c0, c1, hyp);
    long ok = 0, valid = 0;
    for (int y = 0; y < 64; ++y)
        for (int x = 0; x < 64; ++x) {
            if (w.mask.at(0, y, x) == 0.0) continue;
            ++valid;
            double err = 0;
            for (int c = 0; c < 3; ++c)
                err = std::max(err, std::abs(w.values.value().at(0, c, y, x) - v0.image.at(c, y, x)));
            if (err < 1e-3) ++ok;
        }
    CHECK(valid > 3000);
    CHECK(static_cast<double>(ok) >= 0.99 * static_cast<double>(valid));
}

TEST_CASE("depth hypothesis schedules") {
    Camera cam = make_camera(100, 50, 50, {0, 0, 0}, 2.0, 6.0);
    CascadeConfig cfg;

    SUBCASE("stage 0 is an inclusive linspace") {
        DepthHypotheses h = depth_hypotheses(0, nullptr, cam, cfg, 4, 4);
        CHECK(h.values.dim(0) == 48);
        CHECK(h.values.at(0, 0, 0) == 2.0);
        CHECK(h.values.at(47, 0, 0) == 6.0);
        CHECK(h.values.at(1, 2, 3) == doctest::Approx(2.0 + 4.0 / 47.0).epsilon(1e-12));
    }
    SUBCASE("stage 2 centers an 8-plane window on the previous depth") {
        Array prev({8, 8}, 4.0); // upsamples to 16x16 of 4.0
        DepthHypotheses h = depth_hypotheses(2, &prev, cam, cfg);
        CHECK(h.values.dim(0) == 8);
        CHECK(h.values.dim(1) == 16);
        const double spacing = 1.0 * (6.0 - 2.0) / 48.0;
        CHECK(spacing == doctest::Approx(0.083333333).epsilon(1e-6));
        // window centered: mean of samples equals the center
        double mean = 0;
        for (int j = 0; j < 8; ++j) mean += h.values.at(j, 5, 5);
        CHECK(mean / 8 == doctest::Approx(4.0).epsilon(1e-12));
        for (int j = 1; j < 8; ++j)
            CHECK(h.values.at(j, 5, 5) - h.values.at(j - 1, 5, 5) == doctest::Approx(spacing).epsilon(1e-9));
    }
    SUBCASE("windows at the clamp boundary shift inward and stay increasing") {
        Array prev({8, 8}, 1.0); // below d_min/2 = 1.0 boundary once the window extends down
        DepthHypotheses h = depth_hypotheses(1, &prev, cam, cfg);
        for (int j = 0; j < h.values.dim(0); ++j) {
            CHECK(h.values.at(j, 3, 3) >= 1.0);
            CHECK(h.values.at(j, 3, 3) <= 12.0);
            if (j) CHECK(h.values.at(j, 3, 3) > h.values.at(j - 1, 3, 3));
        }
        CHECK(h.values.at(0, 3, 3) == doctest::Approx(1.0));
    }
    SUBCASE("stages 1-2 demand a previous depth") {
        CHECK_THROWS(depth_hypotheses(1, nullptr, cam, cfg));
        Array empty;
        CHECK_THROWS(depth_hypotheses(2, &empty, cam, cfg));
    }
}

TEST_CASE("project / unproject") {
    Camera cam = make_camera(100, 50, 50, {0, 0, 0});

    SUBCASE("optical axis lands on the principal point") {
        Projected p = project({0, 0, 3.7}, cam);
        CHECK(p.x == doctest::Approx(50.0));
        CHECK(p.y == doctest::Approx(50.0));
        CHECK(p.depth == doctest::Approx(3.7));
    }
    SUBCASE("unit focal: offset equals focal length") {
        Camera unit = make_camera(1.0, 0.0, 0.0, {0, 0, 0});
        Projected p = project({1, 0, 1}, unit);
        CHECK(p.x == doctest::Approx(1.0)); // focal length in x
        CHECK(p.y == doctest::Approx(0.0));
    }
    SUBCASE("round trip within 1e-9") {
        Rng rng(31);
        Camera cam2 = make_camera(87.0, 31.0, 29.0, {0.3, -0.2, 0.1});
        const double a = 0.21;
        Mat3 rot = Mat3::identity();
        rot(0, 0) = std::cos(a);
        rot(0, 1) = -std::sin(a);
        rot(1, 0) = std::sin(a);
        rot(1, 1) = std::cos(a);
        cam2.R = rot;
        cam2.t = (rot * Vec3{0.3, -0.2, 0.1}) * -1.0;
        for (int i = 0; i < 20; ++i) {
            Vec3 p{rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(2, 8)};
            Projected q = project(p, cam2);
            Vec3 back = unproject(q.x, q.y, q.depth, cam2);
            CHECK(std::abs(back.x - p.x) < 1e-9);
            CHECK(std::abs(back.y - p.y) < 1e-9);
            CHECK(std::abs(back.z - p.z) < 1e-9);
        }
    }
}

TEST_CASE("camera file round trip") {
    Camera cam = make_camera(123.456789, 64.25, 48.75, {0.123456789, -0.5, 0.25}, 2.5, 7.5);
    const double a = 0.1;
    Mat3 rot = Mat3::identity();
    rot(1, 1) = std::cos(a);
    rot(1, 2) = -std::sin(a);
    rot(2, 1) = std::sin(a);
    rot(2, 2) = std::cos(a);
    cam.R = rot;
    cam.t = (rot * Vec3{0.123456789, -0.5, 0.25}) * -1.0;

    const std::string path = "cam_roundtrip.txt";
    write_camera_file(path, cam);
    Camera got = read_camera_file(path);
    for (int i = 0; i < 9; ++i) {
        CHECK(std::abs(got.K.m[i] - cam.K.m[i]) < 1e-6);
        CHECK(std::abs(got.R.m[i] - cam.R.m[i]) < 1e-9);
    }
    CHECK(std::abs(got.t.x - cam.t.x) < 1e-9);
    CHECK(std::abs(got.t.y - cam.t.y) < 1e-9);
    CHECK(std::abs(got.t.z - cam.t.z) < 1e-9);
    CHECK(got.d_min == doctest::Approx(2.5));
    CHECK(got.d_max == doctest::Approx(7.5));
    got.validate();
    std::remove(path.c_str());
}

TEST_CASE("camera validation catches bad inputs") {
    Camera cam = make_camera(100, 50, 50, {0, 0, 0});
    cam.validate();
    Camera bad = cam;
    bad.R(0, 0) = 1.1;
    CHECK_THROWS(bad.validate());
    bad = cam;
    bad.d_min = 7;
    CHECK_THROWS(bad.validate());
    bad = cam;
    bad.K(0, 0) = -5;
    CHECK_THROWS(bad.validate());
}
