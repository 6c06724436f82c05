#include "cds/mvs.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "init_util.hpp"

namespace cds {


VisNet::VisNet(Model& model, const std::string& prefix, bool with_curv, Rng& rng)
    : with_curvature(with_curv) {
    const int cin = with_curvature ? 2 : 1;
    w1 = model.add(prefix + ".w1", detail::he_uniform({8, cin, 3, 3}, 9L * cin, rng));
    b1 = model.add(prefix + ".b1", Array({8}));
    w2 = model.add(prefix + ".w2", Array({1, 8, 3, 3})); // zero init: W = sigmoid(0) = 0.5
    b2 = model.add(prefix + ".b2", Array({1}));
}

Var VisNet::forward(const Var& nc_est, const Var& entropy) const {
    const int h = entropy.value().dim(0), w = entropy.value().dim(1);
    Var ent = reshape(entropy, {1, h, w});
    Var in = with_curvature ? concat0({nc_est, ent}) : ent;
    Var hid = leaky_relu(add_channel_bias(conv2d(in, w1, 1, PaddingMode::Reflect), b1));
    return sigmoid(add_channel_bias(conv2d(hid, w2, 1, PaddingMode::Reflect), b2));
}

RegNet3D::RegNet3D(Model& model, const std::string& prefix, Rng& rng) {
    w1 = model.add(prefix + ".w1", detail::he_uniform({8, 1, 3, 3, 3}, 27, rng));
    b1 = model.add(prefix + ".b1", Array({8}));
    w2 = model.add(prefix + ".w2", detail::he_uniform({8, 8, 3, 3, 3}, 8 * 27, rng));
    b2 = model.add(prefix + ".b2", Array({8}));
    w3 = model.add(prefix + ".w3", Array({1, 8, 3, 3, 3})); // zero init: residual identity
    b3 = model.add(prefix + ".b3", Array({1}));
}

Var RegNet3D::forward(const Var& volume) const {
    const int D = volume.value().dim(0), h = volume.value().dim(1), w = volume.value().dim(2);
    Var x = reshape(volume, {1, D, h, w});
    Var h1 = leaky_relu(add_channel_bias(conv3d(x, w1, PaddingMode::Reflect), b1));
    Var h2 = leaky_relu(add_channel_bias(conv3d(h1, w2, PaddingMode::Reflect), b2));
    Var res = add_channel_bias(conv3d(h2, w3, PaddingMode::Reflect), b3);
    return softmax_temperature(reshape(add(res, x), {D, h, w}), 1.0);
}

RefineNet::RefineNet(Model& model, const std::string& prefix, Rng& rng) {
    w1 = model.add(prefix + ".w1", detail::he_uniform({16, 4, 3, 3}, 36, rng));
    b1 = model.add(prefix + ".b1", Array({16}));
    w2 = model.add(prefix + ".w2", detail::he_uniform({16, 16, 3, 3}, 144, rng));
    b2 = model.add(prefix + ".b2", Array({16}));
    w3 = model.add(prefix + ".w3", Array({1, 16, 3, 3})); // zero init: refinement starts as identity
    b3 = model.add(prefix + ".b3", Array({1}));
}

Var RefineNet::forward(const Var& depth_up, const Array& image, double d_min, double d_max) const {
    const int H = image.dim(1), W = image.dim(2);
    const double range = d_max - d_min;
    Var norm = mul_scalar(add_scalar(depth_up, -d_min), 1.0 / range);
    Var x = concat0({norm, constant(image)});
    Var h1 = leaky_relu(add_channel_bias(conv2d(x, w1, 1, PaddingMode::Reflect), b1));
    Var h2 = leaky_relu(add_channel_bias(conv2d(h1, w2, 1, PaddingMode::Reflect), b2));
    Var res = add_channel_bias(conv2d(h2, w3, 1, PaddingMode::Reflect), b3);
    return reshape(add(depth_up, mul_scalar(res, range)), {H, W});
}

Var two_view_cost(const Var& f_ref, const Var& warped) {
    if (warped.value().rank() != 4) throw std::invalid_argument("two_view_cost: warped must be [D,C,H,W]");
    const int D = warped.value().dim(0), C = warped.value().dim(1);
    const int H = warped.value().dim(2), W = warped.value().dim(3);
    if (f_ref.value().rank() != 3 || f_ref.value().dim(0) != C || f_ref.value().dim(1) != H ||
        f_ref.value().dim(2) != W)
        throw std::invalid_argument("two_view_cost: reference " + f_ref.value().shape_str() +
                                    " does not match warped " + warped.value().shape_str());
    std::vector<Var> slices;
    slices.reserve(static_cast<size_t>(D));
    for (int j = 0; j < D; ++j) {
        Var ip = inner_product_channels(f_ref, take0(warped, j));
        slices.push_back(reshape(mul_scalar(ip, 1.0 / C), {1, H, W}));
    }
    return concat0(slices);
}

Var cost_entropy(const Var& volume) {
    Var p = softmax_temperature(volume, 1.0);
    Var lp = log(clamp_min(p, 1e-300)); // p log p -> 0 as p -> 0
    return mul_scalar(reduce_sum_axis0(mul(p, lp)), -1.0);
}

Var aggregate_costs(const std::vector<Var>& volumes, const std::vector<Var>& weights) {
    if (volumes.empty()) throw std::invalid_argument("aggregate_costs: no views");
    if (volumes.size() != weights.size())
        throw std::invalid_argument("aggregate_costs: volumes/weights count mismatch");
    Var num, den;
    for (size_t i = 0; i < volumes.size(); ++i) {
        const int h = volumes[i].value().dim(1), w = volumes[i].value().dim(2);
        Var wi = reshape(weights[i], {h, w});
        Var contrib = scale_channels(volumes[i], wi);
        num = i ? add(num, contrib) : contrib;
        den = i ? add(den, wi) : wi;
    }
    Var floor_den = clamp_min(den, 1e-8);
    Var recip = div(constant(Array(floor_den.shape(), 1.0)), floor_den);
    return scale_channels(num, recip);
}

Var regress_depth(const Var& prob, const Array& hypotheses) {
    if (!prob.value().same_shape(hypotheses))
        throw std::invalid_argument("regress_depth: probability/hypothesis shape mismatch");
    return reduce_sum_axis0(mul(prob, constant(hypotheses)));
}

Array confidence_map(const Array& prob) {
    const int D = prob.dim(0), H = prob.dim(1), W = prob.dim(2);
    const long m = static_cast<long>(H) * W;
    Array out({H, W});
    const int win = std::min(4, D);
    for (long i = 0; i < m; ++i) {
        int best = 0;
        double bv = prob[i];
        for (int j = 1; j < D; ++j) {
            const double v = prob[static_cast<long>(j) * m + i];
            if (v > bv) {
                bv = v;
                best = j;
            }
        }
        int start = best - 1;
        start = std::max(0, std::min(start, D - win));
        double s = 0;
        for (int j = start; j < start + win; ++j) s += prob[static_cast<long>(j) * m + i];
        out[i] = s;
    }
    return out;
}

CdsMvsModel::CdsMvsModel(const MvsModelConfig& config) : cfg(config) {
    Rng rng(cfg.init_seed);
    feat = CdsfNet(params, "cdsf", cfg.feat, rng);
    for (int l = 0; l < 3; ++l) {
        vis[l] = VisNet(params, "vis" + std::to_string(l), cfg.vis_with_curvature, rng);
        reg[l] = RegNet3D(params, "reg" + std::to_string(l), rng);
    }
    refine = RefineNet(params, "refine", rng);
    for (auto& p : params.params())
        if (p.name.rfind("reg", 0) == 0) p.lr_mult = cfg.reg_lr_mult;
}

FeaturePyramid CdsMvsModel::extract(const Array& image, const Vec3& epipole, double tau) const {
    if (feature_hook) return feature_hook(image, epipole, tau);
    return feat.extract(image, epipole, tau);
}

FeaturePyramid identity_feature_pyramid(const Array& image) {
    Array centered = image;
    const int C = image.dim(0);
    const long m = image.numel() / C;
    for (int c = 0; c < C; ++c) {
        double mean = 0;
        for (long i = 0; i < m; ++i) mean += image[c * m + i];
        mean /= static_cast<double>(m);
        for (long i = 0; i < m; ++i) centered[c * m + i] -= mean;
    }
    const Array half = area_downsample2(centered);
    const Array quarter = area_downsample2(half);
    const Array eighth = area_downsample2(quarter);
    FeaturePyramid pyr;
    const Array* levels[3] = {&eighth, &quarter, &half};
    for (int l = 0; l < 3; ++l) {
        pyr.features[l] = constant(*levels[l]);
        pyr.curvatures[l] = constant(Array({1, levels[l]->dim(1), levels[l]->dim(2)}));
    }
    return pyr;
}

Array full_res_confidence(const CascadeOutput& out, int H, int W) {
    Array conf({H, W}, 1.0);
    for (int l = 0; l < 3; ++l) {
        Array up = out.confidence[l];
        while (up.dim(0) < H) up = bilinear_upsample2(up);
        if (up.dim(0) != H || up.dim(1) != W)
            throw std::invalid_argument("full_res_confidence: stage resolution does not divide the target");
        for (long i = 0; i < conf.numel(); ++i) conf[i] *= up[i];
    }
    return conf;
}

MvsModelConfig infer_model_config(const std::string& checkpoint_path) {
    const auto infos = Model::peek(checkpoint_path);
    MvsModelConfig cfg;
    cfg.feat.mode = CurvatureMode::Original;
    std::vector<int> stem, body;
    bool vis_seen = false;
    for (const auto& info : infos) {
        if (info.name.find(".kxx") != std::string::npos) cfg.feat.mode = CurvatureMode::Learnable;
        auto collect = [&](const char* layer, std::vector<int>& sizes) {
            const std::string prefix = std::string("cdsf.") + layer + ".s";
            if (info.name.rfind(prefix, 0) == 0 && info.name.find(".feat") != std::string::npos)
                sizes.push_back(std::stoi(info.name.substr(prefix.size())));
        };
        collect("enc2a", stem);
        collect("enc2b", body);
        if (info.name == "vis0.w1") {
            vis_seen = true;
            cfg.vis_with_curvature = info.shape.at(1) == 2;
        }
    }
    if (stem.empty() || body.empty() || !vis_seen)
        throw std::runtime_error("checkpoint does not look like a full model: " + checkpoint_path);
    std::sort(stem.begin(), stem.end());
    std::sort(body.begin(), body.end());
    cfg.feat.stem_sizes = stem;
    cfg.feat.body_sizes = body;
    return cfg;
}

FeaturePyramid photometric_feature_pyramid(const Array& image) {
    Array lum = luminance(image);
    FeaturePyramid pyr;
    Array level = lum;
    std::vector<Array> levels;
    for (int i = 0; i < 3; ++i) {
        level = area_downsample2(level);
        levels.push_back(level);
    }
    // levels: 1/2, 1/4, 1/8 -> pyramid indices 2, 1, 0
    for (int l = 0; l < 3; ++l) {
        const Array& src = levels[static_cast<size_t>(2 - l)];
        const int h = src.dim(0), w = src.dim(1);
        Array feat({9, h, w});
        const long m = static_cast<long>(h) * w;
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                double patch[9];
                double mean = 0;
                int c = 0;
                for (int dy = -1; dy <= 1; ++dy)
                    for (int dx = -1; dx <= 1; ++dx, ++c) {
                        const int sy = std::min(std::max(y + dy, 0), h - 1);
                        const int sx = std::min(std::max(x + dx, 0), w - 1);
                        patch[c] = src.at(sy, sx);
                        mean += patch[c];
                    }
                mean /= 9.0;
                double norm = 0;
                for (double& v : patch) {
                    v -= mean;
                    norm += v * v;
                }
                norm = std::sqrt(norm) + 1e-12;
                for (c = 0; c < 9; ++c) feat[c * m + static_cast<long>(y) * w + x] = patch[c] / norm;
            }
        pyr.features[l] = constant(std::move(feat));
        pyr.curvatures[l] = constant(Array({1, h, w}));
    }
    return pyr;
}

CascadeOutput cascade_forward(const CdsMvsModel& model, const InputView& ref,
                              const std::vector<InputView>& srcs, double tau) {
    if (srcs.empty()) throw std::invalid_argument("cascade_forward: at least one source view required");
    const int N = static_cast<int>(srcs.size());
    const int H = ref.image.dim(1), W = ref.image.dim(2);

    CascadeOutput out;
    out.ref_pyramids.reserve(static_cast<size_t>(N));
    out.src_pyramids.reserve(static_cast<size_t>(N));
    for (const auto& src : srcs) {
        const Vec3 e_ref = epipole(ref.cam, src.cam);
        const Vec3 e_src = epipole(src.cam, ref.cam);
        out.ref_epipoles.push_back(e_ref);
        out.ref_pyramids.push_back(model.extract(ref.image, e_ref, tau));
        out.src_pyramids.push_back(model.extract(src.image, e_src, tau));
    }

    Array prev_depth; // detached
    for (int l = 0; l < 3; ++l) {
        const int div = 1 << (3 - l);
        const Camera cam_ref_l = ref.cam.scaled(1.0 / div);
        DepthHypotheses hyp =
            l == 0 ? depth_hypotheses(0, nullptr, cam_ref_l, model.cfg.cascade, H / div, W / div)
                   : depth_hypotheses(l, &prev_depth, cam_ref_l, model.cfg.cascade);

        std::vector<Var> vols, weights;
        vols.reserve(static_cast<size_t>(N));
        for (int i = 0; i < N; ++i) {
            const Camera cam_src_l = srcs[static_cast<size_t>(i)].cam.scaled(1.0 / div);
            WarpedFeature warped =
                warp_feature(out.src_pyramids[static_cast<size_t>(i)].features[l], cam_ref_l, cam_src_l, hyp);
            Var v_i = two_view_cost(out.ref_pyramids[static_cast<size_t>(i)].features[l], warped.values);
            Var h_i = cost_entropy(v_i);
            Var w_i = model.vis[l].forward(out.ref_pyramids[static_cast<size_t>(i)].curvatures[l], h_i);
            vols.push_back(v_i);
            weights.push_back(w_i);
            out.visibility[l].push_back(w_i.value());
        }
        Var aggregated = aggregate_costs(vols, weights);
        Var prob = model.reg[l].forward(aggregated);
        out.depth[l] = regress_depth(prob, hyp.values);
        out.confidence[l] = confidence_map(prob.value());
        out.prob[l] = prob.value();
        out.hypotheses[l] = hyp.values;
        prev_depth = out.depth[l].value();
    }

    Var up = upsample_bilinear2(reshape(out.depth[2], {1, H / 2, W / 2}));
    out.depth[3] = model.refine.forward(up, ref.image, ref.cam.d_min, ref.cam.d_max);
    return out;
}

} // namespace cds
