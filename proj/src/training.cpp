#include "cds/training.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace cds {

namespace {

Array downsample_mask(const Array& mask) {
    Array m = area_downsample2(mask);
    for (long i = 0; i < m.numel(); ++i) m[i] = m[i] >= 1.0 ? 1.0 : 0.0; // all children valid
    return m;
}

Var masked_mean(const Var& x, const Array& mask) {
    double count = 0;
    for (long i = 0; i < mask.numel(); ++i) count += mask[i];
    if (count <= 0) throw EmptySupervision();
    return mul_scalar(sum(mul(x, constant(mask))), 1.0 / count);
}

Var log_sigmoid(const Var& x) {
    return log(clamp_min(sigmoid(x), 1e-300));
}

} // namespace

TrainSample sample_from_scene(const Scene& scene, int ref_index, int max_srcs) {
    const int n = static_cast<int>(scene.views.size());
    if (ref_index < 0 || ref_index >= n) throw std::invalid_argument("sample_from_scene: bad reference index");
    TrainSample s;
    const View& rv = scene.views[static_cast<size_t>(ref_index)];
    s.ref = InputView{rv.image, rv.cam};
    const auto pairs = default_pairs(n);
    for (int src : pairs[static_cast<size_t>(ref_index)]) {
        if (static_cast<int>(s.srcs.size()) >= max_srcs) break;
        const View& sv = scene.views[static_cast<size_t>(src)];
        s.srcs.push_back(InputView{sv.image, sv.cam});
    }
    s.gt_depth = rv.gt_depth;
    s.mask = rv.mask;
    s.gt_levels[3] = s.gt_depth;
    s.mask_levels[3] = s.mask;
    for (int l = 2; l >= 0; --l) {
        s.gt_levels[l] = area_downsample2(s.gt_levels[l + 1]);
        s.mask_levels[l] = downsample_mask(s.mask_levels[l + 1]);
    }
    return s;
}

Array sample_negative_depths(const Array& d_gt, double delta_base, int n_neg, Rng& rng) {
    if (n_neg < 1) throw std::invalid_argument("sample_negative_depths: n_neg must be >= 1");
    const int H = d_gt.dim(0), W = d_gt.dim(1);
    const long m = static_cast<long>(H) * W;
    Array out({n_neg, H, W});
    for (int n = 0; n < n_neg; ++n)
        for (long i = 0; i < m; ++i) {
            const double mag = rng.uniform(0.5, 4.0) * delta_base;
            const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
            out[static_cast<long>(n) * m + i] = d_gt[i] + sign * mag;
        }
    return out;
}

Var depth_loss(const Var& d_est, const Array& d_gt, const Array& mask) {
    if (!d_est.value().same_shape(d_gt))
        throw std::invalid_argument("depth_loss: resolution mismatch " + d_est.value().shape_str() + " vs " +
                                    d_gt.shape_str());
    return masked_mean(abs(sub(d_est, constant(d_gt))), mask);
}

Var feature_loss(const CdsMvsModel& model, const CascadeOutput& out, const TrainSample& sample,
                 const LossConfig& cfg, Rng& rng) {
    const int n_views = static_cast<int>(sample.srcs.size());
    const double delta = model.cfg.cascade.delta_base(sample.ref.cam);

    Var bce_total;
    int bce_terms = 0;
    for (int l = 0; l < 3; ++l) {
        const int div = 1 << (3 - l);
        const Camera cam_ref_l = sample.ref.cam.scaled(1.0 / div);
        const Array& gt = sample.gt_levels[l];
        const Array& mask = sample.mask_levels[l];
        const int h = gt.dim(0), w = gt.dim(1);
        const Array neg = sample_negative_depths(gt, delta, cfg.n_neg, rng);
        const long m = static_cast<long>(h) * w;

        for (int i = 0; i < n_views; ++i) {
            const Camera cam_src_l = sample.srcs[static_cast<size_t>(i)].cam.scaled(1.0 / div);
            const Var& f_ref = out.ref_pyramids[static_cast<size_t>(i)].features[l];
            const Var& f_src = out.src_pyramids[static_cast<size_t>(i)].features[l];

            auto cost_at = [&](const Array& depth_map, Array* valid_out) {
                DepthHypotheses hyp;
                hyp.values = Array({1, h, w});
                for (long j = 0; j < m; ++j) hyp.values[j] = depth_map[j];
                WarpedFeature warped = warp_feature(f_src, cam_ref_l, cam_src_l, hyp);
                if (valid_out) {
                    *valid_out = Array({h, w});
                    for (long j = 0; j < m; ++j) (*valid_out)[j] = warped.mask[j];
                }
                return take0(two_view_cost(f_ref, warped.values), 0);
            };

            Array warp_valid;
            Var v_gt = cost_at(gt, &warp_valid);
            Array valid = mask;
            for (long j = 0; j < m; ++j) valid[j] = valid[j] * warp_valid[j];

            Var pos_term = log_sigmoid(v_gt);
            Var neg_term;
            for (int nidx = 0; nidx < cfg.n_neg; ++nidx) {
                Array neg_map({h, w});
                for (long j = 0; j < m; ++j) neg_map[j] = neg[static_cast<long>(nidx) * m + j];
                Var v_neg = cost_at(neg_map, nullptr);
                Var t = log_sigmoid(mul_scalar(v_neg, -1.0)); // log(1 - sig(v))
                neg_term = nidx ? add(neg_term, t) : t;
            }
            Var bce = mul_scalar(masked_mean(add(pos_term, mul_scalar(neg_term, 1.0 / cfg.n_neg)), valid), -1.0);
            bce_total = bce_terms ? add(bce_total, bce) : bce;
            ++bce_terms;
        }
    }
    Var loss = mul_scalar(bce_total, 1.0 / bce_terms);

    // lambda1 * ||curvature kernels||^2 (the weights the small-kernel
    // assumption constrains; feature kernels are unconstrained).
    if (cfg.lambda1 > 0 && model.cfg.feat.mode == CurvatureMode::Learnable) {
        Var reg;
        bool first = true;
        for (const auto& p : model.params.params()) {
            const auto& name = p.name;
            const bool curv = name.find(".kxx") != std::string::npos ||
                              name.find(".kxy") != std::string::npos ||
                              name.find(".kyy") != std::string::npos;
            if (!curv) continue;
            Var term = sum(square(p.var));
            reg = first ? term : add(reg, term);
            first = false;
        }
        if (!first) loss = add(loss, mul_scalar(reg, cfg.lambda1));
    }

    // lambda2 * mean square of the estimated curvature maps.
    if (cfg.lambda2 > 0) {
        Var nc;
        int terms = 0;
        for (const auto* pyrs : {&out.ref_pyramids, &out.src_pyramids})
            for (const auto& pyr : *pyrs)
                for (int l = 0; l < 3; ++l) {
                    Var t = mean(square(pyr.curvatures[l]));
                    nc = terms ? add(nc, t) : t;
                    ++terms;
                }
        if (terms) loss = add(loss, mul_scalar(nc, cfg.lambda2 / terms));
    }
    return loss;
}

Var total_loss(const Var& l_feat, const std::vector<Var>& l_depth, double feat_weight) {
    Var loss = mul_scalar(l_feat, feat_weight);
    for (const auto& d : l_depth) loss = add(loss, d);
    return loss;
}

double anneal_tau(int epoch, const LossConfig& cfg) {
    if (epoch < 0 || epoch >= cfg.epochs) throw std::invalid_argument("anneal_tau: epoch out of range");
    if (cfg.epochs == 1) return cfg.tau_end;
    const double t = static_cast<double>(epoch) / (cfg.epochs - 1);
    return cfg.tau_start * std::pow(cfg.tau_end / cfg.tau_start, t);
}

double eval_mae(const CdsMvsModel& model, const std::vector<TrainSample>& samples, double tau) {
    if (samples.empty()) return 0.0;
    double total = 0;
    for (const auto& s : samples) {
        CascadeOutput out = cascade_forward(model, s.ref, s.srcs, tau);
        double err = 0, count = 0;
        const Array& d = out.depth[3].value();
        for (long i = 0; i < d.numel(); ++i)
            if (s.mask[i] > 0) {
                err += std::abs(d[i] - s.gt_depth[i]);
                count += 1;
            }
        total += err / std::max(count, 1.0);
    }
    return total / static_cast<double>(samples.size());
}

DepthQuality eval_depth_quality(const CdsMvsModel& model, const std::vector<TrainSample>& samples,
                                double tau, double threshold) {
    DepthQuality q;
    if (samples.empty()) return q;
    for (const auto& s : samples) {
        CascadeOutput out = cascade_forward(model, s.ref, s.srcs, tau);
        for (int l = 0; l < 4; ++l) {
            const Array& d = out.depth[l].value();
            const Array& gt = s.gt_levels[l];
            const Array& mask = s.mask_levels[l];
            double err = 0, count = 0, hits = 0;
            for (long i = 0; i < d.numel(); ++i) {
                if (mask[i] <= 0) continue;
                const double e = std::abs(d[i] - gt[i]);
                err += e;
                if (e < threshold) hits += 1;
                count += 1;
            }
            q.stage_mae[l] += count ? err / count : 0.0;
            if (l == 3) {
                q.mae += count ? err / count : 0.0;
                q.precision += count ? hits / count : 0.0;
            }
        }
    }
    const double inv = 1.0 / static_cast<double>(samples.size());
    q.mae *= inv;
    q.precision *= inv;
    for (double& v : q.stage_mae) v *= inv;
    return q;
}

TrainResult train(CdsMvsModel& model, const std::vector<TrainSample>& train_set,
                  const std::vector<TrainSample>& holdout, const LossConfig& cfg,
                  const std::string& out_dir) {
    if (train_set.empty()) throw std::invalid_argument("train: empty training set");
    std::filesystem::create_directories(out_dir);

    TrainResult result;
    result.metrics_path = out_dir + "/metrics.csv";
    result.checkpoint_path = out_dir + "/checkpoint.cdsw";
    result.best_path = out_dir + "/best.cdsw";

    std::ofstream csv(result.metrics_path);
    csv << "epoch,tau,l_feat,l_depth0,l_depth1,l_depth2,l_depth3,train_mae,val_mae\n";
    csv << std::setprecision(12);

    Rng order_rng(cfg.seed);
    Rng neg_rng(cfg.seed ^ 0x5eedULL);
    double best_mae = 1e300;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double tau = anneal_tau(epoch, cfg);
        // The softmax backward scales selector gradients by 1/tau; keep the
        // effective selector step size flat across the annealing schedule.
        for (auto& p : model.params.params())
            if (p.name.find(".sel.") != std::string::npos) p.lr_mult = tau / cfg.tau_start;
        std::vector<size_t> order(train_set.size());
        for (size_t i = 0; i < order.size(); ++i) order[i] = i;
        for (size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[order_rng.below(static_cast<int>(i))]);

        double sum_feat = 0, sum_depth[4] = {0, 0, 0, 0}, sum_mae = 0;
        for (size_t oi : order) {
            const TrainSample& s = train_set[oi];
            CascadeOutput out = cascade_forward(model, s.ref, s.srcs, tau);
            std::vector<Var> l_depth;
            for (int l = 0; l < 4; ++l) l_depth.push_back(depth_loss(out.depth[l], s.gt_levels[l], s.mask_levels[l]));
            Var l_feat = feature_loss(model, out, s, cfg, neg_rng);
            Var loss = total_loss(l_feat, l_depth, cfg.feat_weight);
            if (!std::isfinite(loss.value()[0]))
                throw std::runtime_error("train: non-finite loss at epoch " + std::to_string(epoch));
            backward(loss);
            model.params.clip_grad_norm(cfg.clip);
            model.params.sgd_step(cfg.lr);

            sum_feat += l_feat.value()[0];
            for (int l = 0; l < 4; ++l) sum_depth[l] += l_depth[static_cast<size_t>(l)].value()[0];
            sum_mae += l_depth[3].value()[0];
        }
        const double inv = 1.0 / static_cast<double>(train_set.size());
        const double train_mae = sum_mae * inv;
        const double val_mae = holdout.empty() ? train_mae : eval_mae(model, holdout, tau);
        result.train_mae_per_epoch.push_back(train_mae);
        result.val_mae_per_epoch.push_back(val_mae);

        csv << epoch << "," << tau << "," << sum_feat * inv;
        for (int l = 0; l < 4; ++l) csv << "," << sum_depth[l] * inv;
        csv << "," << train_mae << "," << val_mae << "\n";
        csv.flush();

        if (val_mae < best_mae) {
            best_mae = val_mae;
            model.params.save(result.best_path);
        }
    }
    model.params.save(result.checkpoint_path);
    return result;
}

LossConfig parse_loss_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open config: " + path);
    LossConfig cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        std::istringstream ls(line);
        std::string key, eq, value;
        if (!(ls >> key)) continue;
        if (!(ls >> eq >> value) || eq != "=")
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected 'key = value'");
        if (key == "lambda1")
            cfg.lambda1 = std::stod(value);
        else if (key == "lambda2")
            cfg.lambda2 = std::stod(value);
        else if (key == "feat_weight")
            cfg.feat_weight = std::stod(value);
        else if (key == "n_neg")
            cfg.n_neg = std::stoi(value);
        else if (key == "tau_start")
            cfg.tau_start = std::stod(value);
        else if (key == "tau_end")
            cfg.tau_end = std::stod(value);
        else if (key == "epochs")
            cfg.epochs = std::stoi(value);
        else if (key == "lr")
            cfg.lr = std::stod(value);
        else if (key == "clip")
            cfg.clip = std::stod(value);
        else if (key == "seed")
            cfg.seed = std::stoull(value);
        else
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
    if (!(cfg.lambda1 >= 0 && cfg.lambda2 >= 0 && cfg.feat_weight > 0 && cfg.n_neg >= 1 && cfg.epochs >= 1 &&
          cfg.lr >= 0 && cfg.clip >= 0 && cfg.tau_start > 0 && cfg.tau_end > 0 && cfg.tau_end <= cfg.tau_start))
        throw std::runtime_error("invalid training config values: " + path);
    return cfg;
}

void write_loss_config(const std::string& path, const LossConfig& cfg) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write config: " + path);
    os << std::setprecision(12);
    os << "lambda1 = " << cfg.lambda1 << "\n";
    os << "lambda2 = " << cfg.lambda2 << "\n";
    os << "feat_weight = " << cfg.feat_weight << "\n";
    os << "n_neg = " << cfg.n_neg << "\n";
    os << "tau_start = " << cfg.tau_start << "\n";
    os << "tau_end = " << cfg.tau_end << "\n";
    os << "epochs = " << cfg.epochs << "\n";
    os << "lr = " << cfg.lr << "\n";
    os << "clip = " << cfg.clip << "\n";
    os << "seed = " << cfg.seed << "\n";
}

} // namespace cds
