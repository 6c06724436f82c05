#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "cds/cdsfnet.hpp"

using namespace cds;

namespace {

Array random_image(int H, int W, Rng& rng) {
    Array a({3, H, W});
    for (long i = 0; i < a.numel(); ++i) a[i] = rng.uniform(0, 1);
    return a;
}

} // namespace

TEST_CASE("pyramid shape contract") {
    Rng rng(1);
    Model m;
    CdsfNet net(m, "feat", CdsfNetConfig{}, rng);
    Array img = random_image(64, 48, rng);
    FeaturePyramid pyr = net.extract(img, {1, 0, 0}, 1.0);
    CHECK(pyr.features[0].shape() == std::vector<int>{32, 8, 6});
    CHECK(pyr.features[1].shape() == std::vector<int>{16, 16, 12});
    CHECK(pyr.features[2].shape() == std::vector<int>{8, 32, 24});
    CHECK(pyr.curvatures[0].shape() == std::vector<int>{1, 8, 6});
    CHECK(pyr.curvatures[1].shape() == std::vector<int>{1, 16, 12});
    CHECK(pyr.curvatures[2].shape() == std::vector<int>{1, 32, 24});

    Array odd = random_image(60, 48, rng);
    CHECK_THROWS_WITH_AS(net.extract(odd, {1, 0, 0}, 1.0) /* 60 not divisible by 8 */,
                         doctest::Contains("divisible by 8"), std::invalid_argument);
}

TEST_CASE("K=1 configuration reduces to a plain UNet") {
    Rng rng(2);
    Model m;
    CdsfNetConfig cfg;
    cfg.stem_sizes = {3};
    cfg.body_sizes = {3};
    CdsfNet net(m, "feat", cfg, rng);
    Array img = random_image(32, 32, rng);
    FeaturePyramid pyr = net.extract(img, {0.5, 0.5, 1.0}, 0.01);

    // Same weights, no curvature machinery: plain conv/upsample graph on the
    // same centered input the extractor uses.
    auto cv = [&](const Var& x, const Var& k, int stride = 1) {
        return conv2d(x, k, stride, PaddingMode::Reflect);
    };
    Array centered = img;
    double mean = 0;
    for (long i = 0; i < centered.numel(); ++i) mean += centered[i];
    mean /= static_cast<double>(centered.numel());
    double var = 0;
    for (long i = 0; i < centered.numel(); ++i) var += (centered[i] - mean) * (centered[i] - mean);
    const double inv_std = 1.0 / (std::sqrt(var / static_cast<double>(centered.numel())) + 1e-6);
    for (long i = 0; i < centered.numel(); ++i) centered[i] = (centered[i] - mean) * inv_std;
    Var x = constant(centered);
    Var e2 = leaky_relu(cv(leaky_relu(cv(x, net.enc2a.feat[0], 2)), net.enc2b.feat[0]));
    Var e1 = leaky_relu(cv(leaky_relu(cv(e2, net.enc1a.feat[0], 2)), net.enc1b.feat[0]));
    Var e0 = leaky_relu(cv(leaky_relu(cv(e1, net.enc0a.feat[0], 2)), net.enc0b.feat[0]));
    Var f0 = cv(e0, net.head0.feat[0]);
    Var d1 = leaky_relu(add_channel_bias(cv(concat0({upsample_bilinear2(e0), e1}), net.fuse1_w), net.fuse1_b));
    Var f1 = cv(d1, net.head1.feat[0]);
    Var d2 = leaky_relu(add_channel_bias(cv(concat0({upsample_bilinear2(d1), e2}), net.fuse2_w), net.fuse2_b));
    Var f2 = cv(d2, net.head2.feat[0]);

    const Var* want[3] = {&f0, &f1, &f2};
    for (int l = 0; l < 3; ++l)
        for (long i = 0; i < pyr.features[l].numel(); ++i)
            CHECK(pyr.features[l].value()[i] == want[l]->value()[i]); // identical, not just close
}

TEST_CASE("features depend on the epipole") {
    Rng rng(3);
    Model m;
    CdsfNet net(m, "feat", CdsfNetConfig{}, rng);
    Array img = random_image(32, 32, rng);
    FeaturePyramid a = net.extract(img, {1, 0, 0}, 0.5);       // epipolar lines along x
    FeaturePyramid b = net.extract(img, {0, 1, 0}, 0.5);       // along y
    double max_diff = 0;
    for (int l = 0; l < 3; ++l)
        for (long i = 0; i < a.features[l].numel(); ++i)
            max_diff = std::max(max_diff, std::abs(a.features[l].value()[i] - b.features[l].value()[i]));
    CHECK(max_diff > 0.0);
}

TEST_CASE("constant images give near-zero curvature at init") {
    Rng rng(4);
    Model m;
    CdsfNet net(m, "feat", CdsfNetConfig{}, rng);
    Array img({3, 32, 32}, 0.5);
    FeaturePyramid pyr = net.extract(img, {0.7, 0.3, 1.0}, 1.0);
    for (int l = 0; l < 3; ++l)
        for (long i = 0; i < pyr.curvatures[l].numel(); ++i)
            CHECK(std::abs(pyr.curvatures[l].value()[i]) < 1e-6);
}

TEST_CASE("end-to-end differentiability to the first curvature kernel") {
    Rng rng(5);
    Model m;
    CdsfNet net(m, "feat", CdsfNetConfig{}, rng);
    Array img = random_image(16, 16, rng);
    const Vec3 e{0.3, 0.8, 1.0};

    auto loss_of = [&]() {
        FeaturePyramid pyr = net.extract(img, e, 0.7);
        return sum(square(pyr.features[2]));
    };
    Var loss = loss_of();
    backward(loss);
    Param* kxx = m.find("feat.enc2a.s3.kxx");
    REQUIRE(kxx);
    const Array g = kxx->var.node()->grad;
    REQUIRE_FALSE(g.empty());

    const double eps = 1e-5;
    for (long idx : {1L, 7L, 13L}) {
        Array& v = kxx->var.mutable_value();
        const double x0 = v[idx];
        v[idx] = x0 + eps;
        const double fp = loss_of().value()[0];
        v[idx] = x0 - eps;
        const double fm = loss_of().value()[0];
        v[idx] = x0;
        const double numeric = (fp - fm) / (2 * eps);
        const double rel = std::abs(numeric - g[idx]) / std::max({1.0, std::abs(numeric), std::abs(g[idx])});
        CHECK(rel <= 1e-3);
    }
    m.zero_grad();
}
