#include "cds/cdsfnet.hpp"

#include <cmath>
#include <stdexcept>

#include "init_util.hpp"

namespace cds {

CdsfNet::CdsfNet(Model& model, const std::string& prefix, const CdsfNetConfig& cfg, Rng& rng) : cfg_(cfg) {
    auto spec = [&](int cin, int cout, const std::vector<int>& sizes, int stride) {
        CdsConvSpec s;
        s.in_channels = cin;
        s.out_channels = cout;
        s.kernel_sizes = sizes;
        s.stride = stride;
        s.mode = cfg.mode;
        return s;
    };
    enc2a = CdsConvLayer(model, prefix + ".enc2a", spec(3, 8, cfg.stem_sizes, 2), rng);
    enc2b = CdsConvLayer(model, prefix + ".enc2b", spec(8, 8, cfg.body_sizes, 1), rng);
    enc1a = CdsConvLayer(model, prefix + ".enc1a", spec(8, 16, cfg.body_sizes, 2), rng);
    enc1b = CdsConvLayer(model, prefix + ".enc1b", spec(16, 16, cfg.body_sizes, 1), rng);
    enc0a = CdsConvLayer(model, prefix + ".enc0a", spec(16, 32, cfg.body_sizes, 2), rng);
    enc0b = CdsConvLayer(model, prefix + ".enc0b", spec(32, 32, cfg.body_sizes, 1), rng);
    head0 = CdsConvLayer(model, prefix + ".head0", spec(32, 32, cfg.body_sizes, 1), rng);
    head1 = CdsConvLayer(model, prefix + ".head1", spec(16, 16, cfg.body_sizes, 1), rng);
    head2 = CdsConvLayer(model, prefix + ".head2", spec(8, 8, cfg.body_sizes, 1), rng);

    fuse1_w = model.add(prefix + ".fuse1.w", detail::he_uniform({16, 48, 1, 1}, 48, rng));
    fuse1_b = model.add(prefix + ".fuse1.b", Array({16}));
    fuse2_w = model.add(prefix + ".fuse2.w", detail::he_uniform({8, 24, 1, 1}, 24, rng));
    fuse2_b = model.add(prefix + ".fuse2.b", Array({8}));
}

FeaturePyramid CdsfNet::extract(const Array& image, const Vec3& epipole, double tau) const {
    if (image.rank() != 3 || image.dim(0) != 3)
        throw std::invalid_argument("CdsfNet::extract: image must be [3,H,W]");
    const int H = image.dim(1), W = image.dim(2);
    if (H % 8 || W % 8)
        throw std::invalid_argument("CdsfNet::extract: resolution " + std::to_string(W) + "x" +
                                    std::to_string(H) + " not divisible by 8; pad to " +
                                    std::to_string((W + 7) / 8 * 8) + "x" + std::to_string((H + 7) / 8 * 8));

    auto field_at = [&](int level_div) {
        const double s = 1.0 / level_div;
        const Vec3 e{epipole.x * s, epipole.y * s, epipole.z};
        return epipolar_direction_field(e, H / level_div, W / level_div);
    };
    const EpipolarField om2 = field_at(2), om1 = field_at(4), om0 = field_at(8);

    // Standardize the input; the stack has no normalization layers, so the
    // image statistics anchor every activation and cost magnitude downstream.
    Array centered = image;
    double mean = 0;
    for (long i = 0; i < centered.numel(); ++i) mean += centered[i];
    mean /= static_cast<double>(centered.numel());
    double var = 0;
    for (long i = 0; i < centered.numel(); ++i) var += (centered[i] - mean) * (centered[i] - mean);
    const double inv_std = 1.0 / (std::sqrt(var / static_cast<double>(centered.numel())) + 1e-6);
    for (long i = 0; i < centered.numel(); ++i) centered[i] = (centered[i] - mean) * inv_std;
    const Var x = constant(std::move(centered));
    Var e2 = leaky_relu(enc2b.forward(leaky_relu(enc2a.forward(x, om2, tau).features), om2, tau).features);
    Var e1 = leaky_relu(enc1b.forward(leaky_relu(enc1a.forward(e2, om1, tau).features), om1, tau).features);
    Var e0 = leaky_relu(enc0b.forward(leaky_relu(enc0a.forward(e1, om0, tau).features), om0, tau).features);

    FeaturePyramid pyr;
    CdsConvOutput h0 = head0.forward(e0, om0, tau);
    pyr.features[0] = h0.features;
    pyr.curvatures[0] = h0.nc_est;

    Var d1 = leaky_relu(
        add_channel_bias(conv2d(concat0({upsample_bilinear2(e0), e1}), fuse1_w, 1, PaddingMode::Reflect),
                         fuse1_b));
    CdsConvOutput h1 = head1.forward(d1, om1, tau);
    pyr.features[1] = h1.features;
    pyr.curvatures[1] = h1.nc_est;

    Var d2 = leaky_relu(
        add_channel_bias(conv2d(concat0({upsample_bilinear2(d1), e2}), fuse2_w, 1, PaddingMode::Reflect),
                         fuse2_b));
    CdsConvOutput h2 = head2.forward(d2, om2, tau);
    pyr.features[2] = h2.features;
    pyr.curvatures[2] = h2.nc_est;
    return pyr;
}

} // namespace cds
