#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "cds/dataset.hpp"
#include "cds/evalmetrics.hpp"
#include "cds/fusion.hpp"
#include "cds/image_io.hpp"
#include "cds/rng.hpp"

using namespace cds;
namespace fs = std::filesystem;

TEST_CASE("PFM round trip is f32-exact") {
    Rng rng(1);
    Array map({13, 9});
    for (long i = 0; i < map.numel(); ++i) map[i] = rng.uniform(-100, 100);
    const std::string path = "roundtrip.pfm";
    write_pfm(path, map);
    Array got = read_pfm(path);
    REQUIRE(got.shape() == map.shape());
    for (long i = 0; i < map.numel(); ++i)
        CHECK(got[i] == static_cast<double>(static_cast<float>(map[i])));
    // second write->read->write cycle is bit-stable
    write_pfm(path, got);
    Array again = read_pfm(path);
    for (long i = 0; i < map.numel(); ++i) CHECK(again[i] == got[i]);
    fs::remove(path);
}

TEST_CASE("PNG round trip reproduces the 8-bit quantization") {
    Rng rng(2);
    Array img({3, 12, 17});
    for (long i = 0; i < img.numel(); ++i) img[i] = rng.uniform(0, 1);
    const std::string path = "roundtrip.png";
    write_png(path, img);
    Array got = read_png(path);
    REQUIRE(got.shape() == img.shape());
    for (long i = 0; i < img.numel(); ++i)
        CHECK(got[i] == doctest::Approx(std::round(img[i] * 255.0) / 255.0).epsilon(1e-12));

    SUBCASE("grayscale write expands to 3 channels on read") {
        Array gray({8, 8});
        for (long i = 0; i < 64; ++i) gray[i] = (i % 7) / 7.0;
        write_png(path, gray);
        Array g3 = read_png(path);
        CHECK(g3.shape() == std::vector<int>{3, 8, 8});
        for (long i = 0; i < 64; ++i) {
            CHECK(g3[i] == g3[64 + i]);
            CHECK(g3[i] == doctest::Approx(std::round(gray[i] * 255.0) / 255.0));
        }
    }
    fs::remove(path);
}

TEST_CASE("PLY round trip") {
    PointCloud cloud;
    Rng rng(3);
    for (int i = 0; i < 257; ++i) {
        PlyPoint p;
        p.x = rng.uniform(-5, 5);
        p.y = rng.uniform(-5, 5);
        p.z = rng.uniform(2, 8);
        p.r = rng.uniform(0, 1);
        p.g = rng.uniform(0, 1);
        p.b = rng.uniform(0, 1);
        cloud.points.push_back(p);
    }
    const std::string path = "roundtrip.ply";
    write_ply(path, cloud);
    PointCloud got = read_ply(path);
    REQUIRE(got.points.size() == cloud.points.size());
    for (size_t i = 0; i < cloud.points.size(); ++i) {
        CHECK(got.points[i].x == doctest::Approx(cloud.points[i].x).epsilon(1e-8));
        CHECK(got.points[i].z == doctest::Approx(cloud.points[i].z).epsilon(1e-8));
        CHECK(std::abs(got.points[i].r - cloud.points[i].r) <= 0.5 / 255 + 1e-12);
    }
    fs::remove(path);
}

TEST_CASE("dataset layout round trip") {
    SceneSpec spec;
    spec.layout = Layout::SphereOnPlane;
    spec.n_views = 4;
    spec.height = 32;
    spec.width = 32;
    spec.seed = 5;
    spec.baseline = 0.6;
    Scene scene = generate_scene(spec);
    const std::string dir = "dataset_roundtrip";
    write_scene_dataset(scene, dir);
    DatasetScene ds = read_scene_dataset(dir);

    REQUIRE(ds.views.size() == 4);
    REQUIRE(ds.has_gt());
    CHECK(ds.pairs == default_pairs(4));
    for (int v = 0; v < 4; ++v) {
        const auto& orig = scene.views[static_cast<size_t>(v)];
        for (long i = 0; i < orig.image.numel(); ++i)
            CHECK(ds.views[static_cast<size_t>(v)].image[i] ==
                  doctest::Approx(std::round(orig.image[i] * 255) / 255).epsilon(1e-12));
        for (int k = 0; k < 9; ++k)
            CHECK(ds.views[static_cast<size_t>(v)].cam.R.m[k] == doctest::Approx(orig.cam.R.m[k]).epsilon(1e-7));
        CHECK(ds.views[static_cast<size_t>(v)].cam.d_min == doctest::Approx(orig.cam.d_min).epsilon(1e-7));
        for (long i = 0; i < orig.gt_depth.numel(); ++i)
            CHECK(ds.gt_depths[static_cast<size_t>(v)][i] ==
                  static_cast<double>(static_cast<float>(orig.gt_depth[i])));
    }
    auto samples = samples_from_dataset(ds, 2);
    CHECK(samples.size() == 4);
    CHECK(samples[0].srcs.size() == 2);
    fs::remove_all(dir);
}

TEST_CASE("fusion of ground-truth depths") {
    // Rectified five-camera rig looking straight at a fronto-parallel plane:
    // every depth map is constant, so reprojected depths are exact.
    SceneSpec spec;
    spec.layout = Layout::Plane;
    spec.plane_depth = 4.0;
    spec.n_views = 5;
    spec.height = 48;
    spec.width = 48;
    spec.seed = 7;
    SceneGeometry geom;
    geom.layout = Layout::Plane;
    geom.z_bg = 4.0;

    Scene scene;
    scene.spec = spec;
    scene.geom = geom;
    for (int i = 0; i < 5; ++i) {
        Camera cam;
        cam.K = Mat3::identity();
        cam.K(0, 0) = cam.K(1, 1) = 48;
        cam.K(0, 2) = cam.K(1, 2) = 24;
        cam.R = Mat3::identity();
        cam.t = Vec3{-0.15 * (i - 2), 0, 0};
        cam.d_min = 2;
        cam.d_max = 6;
        scene.views.push_back(render_view(spec, geom, cam, static_cast<uint64_t>(i)));
    }

    std::vector<Array> depths, confs;
    std::vector<InputView> views;
    for (const auto& v : scene.views) {
        depths.push_back(v.gt_depth);
        confs.push_back(Array(v.gt_depth.shape(), 1.0));
        views.push_back(InputView{v.image, v.cam});
    }
    FusionParams params;

    SUBCASE("surviving points lie on the analytic surface") {
        PointCloud cloud = fuse(depths, confs, views, params);
        CHECK(cloud.points.size() > 1000);
        for (const auto& p : cloud.points) CHECK(std::abs(p.z - 4.0) < 1e-6);
    }
    SUBCASE("zero confidence empties the cloud") {
        std::vector<Array> zero_conf;
        for (const auto& v : scene.views) zero_conf.push_back(Array(v.gt_depth.shape(), 0.0));
        PointCloud cloud = fuse(depths, zero_conf, views, params);
        CHECK(cloud.points.empty());
    }
    SUBCASE("a corrupted view is rejected by geometric consistency") {
        std::vector<Array> bad = depths;
        for (long i = 0; i < bad[2].numel(); ++i) bad[2][i] += 0.5; // view 2 lies about depth
        PointCloud cloud = fuse(bad, confs, views, params);
        long off_surface = 0;
        for (const auto& p : cloud.points)
            if (std::abs(p.z - 4.0) > 1e-3) ++off_surface;
        CHECK(static_cast<double>(off_surface) < 0.05 * bad[2].numel());
    }
}

TEST_CASE("depth metrics") {
    Rng rng(4);
    Array gt({8, 8});
    for (long i = 0; i < 64; ++i) gt[i] = rng.uniform(2, 6);
    Array mask({8, 8}, 1.0);

    SUBCASE("perfect estimate") {
        DepthEval e = eval_depth(gt, gt, mask, {0.1, 0.01});
        CHECK(e.mae == 0.0);
        CHECK(e.precision[0] == 1.0);
        CHECK(e.precision[1] == 1.0);
    }
    SUBCASE("half the pixels off by twice the threshold") {
        Array est = gt;
        for (long i = 0; i < 32; ++i) est[i] += 0.2;
        DepthEval e = eval_depth(est, gt, mask, {0.1});
        CHECK(e.precision[0] == doctest::Approx(0.5));
        CHECK(e.mae == doctest::Approx(0.1).epsilon(1e-12));
    }
    SUBCASE("random maps match the loop oracle") {
        Array est({8, 8});
        for (long i = 0; i < 64; ++i) est[i] = rng.uniform(2, 6);
        DepthEval e = eval_depth(est, gt, mask, {0.5});
        double mae = 0, prec = 0;
        for (long i = 0; i < 64; ++i) {
            mae += std::abs(est[i] - gt[i]);
            prec += std::abs(est[i] - gt[i]) < 0.5 ? 1 : 0;
        }
        CHECK(e.mae == doctest::Approx(mae / 64).epsilon(1e-12));
        CHECK(e.precision[0] == doctest::Approx(prec / 64).epsilon(1e-12));
    }
    SUBCASE("empty mask is an error") {
        CHECK_THROWS(eval_depth(gt, gt, Array({8, 8}, 0.0), {0.1}));
    }
}

TEST_CASE("cloud metrics") {
    Rng rng(5);
    PointCloud gt;
    for (int i = 0; i < 500; ++i) {
        PlyPoint p;
        p.x = rng.uniform(-2, 2);
        p.y = rng.uniform(-2, 2);
        p.z = rng.uniform(3, 5);
        gt.points.push_back(p);
    }

    SUBCASE("identical clouds have zero error") {
        CloudEval e = eval_cloud(gt, gt, 0.5);
        CHECK(e.accuracy == 0.0);
        CHECK(e.completeness == 0.0);
        CHECK(e.overall == 0.0);
    }
    SUBCASE("a rigid shift below the threshold is measured exactly") {
        PointCloud moved = gt;
        for (auto& p : moved.points) p.x += 0.037;
        CloudEval e = eval_cloud(moved, gt, 0.5);
        CHECK(e.accuracy == doctest::Approx(0.037).epsilon(1e-9));
        CHECK(e.completeness == doctest::Approx(0.037).epsilon(1e-9));
        CHECK(e.overall == doctest::Approx(0.037).epsilon(1e-9));
    }
    SUBCASE("a half-subset estimate is complete-poor but accurate") {
        PointCloud half;
        for (size_t i = 0; i < gt.points.size(); i += 2) half.points.push_back(gt.points[i]);
        CloudEval e = eval_cloud(half, gt, 0.5);
        CHECK(e.accuracy == doctest::Approx(0.0));
        CHECK(e.completeness > e.accuracy);
    }
    SUBCASE("grid index matches the brute-force oracle") {
        PointCloud est;
        for (int i = 0; i < 300; ++i) {
            PlyPoint p;
            p.x = rng.uniform(-2, 2);
            p.y = rng.uniform(-2, 2);
            p.z = rng.uniform(3, 5);
            est.points.push_back(p);
        }
        const double thresh = 0.4;
        CloudEval e = eval_cloud(est, gt, thresh);
        auto brute = [&](const std::vector<PlyPoint>& from, const std::vector<PlyPoint>& to) {
            double sum = 0;
            long kept = 0;
            for (const auto& q : from) {
                double best = 1e300;
                for (const auto& p : to)
                    best = std::min(best, std::sqrt((p.x - q.x) * (p.x - q.x) + (p.y - q.y) * (p.y - q.y) +
                                                    (p.z - q.z) * (p.z - q.z)));
                if (best > thresh) continue;
                sum += best;
                ++kept;
            }
            return kept ? sum / kept : thresh;
        };
        CHECK(e.accuracy == doctest::Approx(brute(est.points, gt.points)).epsilon(1e-12));
        CHECK(e.completeness == doctest::Approx(brute(gt.points, est.points)).epsilon(1e-12));
    }
    SUBCASE("empty clouds are rejected") {
        CHECK_THROWS(eval_cloud(PointCloud{}, gt, 0.5));
    }
}
