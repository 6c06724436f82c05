#pragma once

#include <string>
#include <vector>

#include "cds/mvs.hpp"
#include "cds/synth.hpp"

namespace cds {

struct EmptySupervision : std::runtime_error {
    EmptySupervision() : std::runtime_error("no valid supervised pixels") {}
};

struct LossConfig {
    double lambda1 = 0.01;  // weight-norm regularizer on curvature kernels
    double lambda2 = 0.1;   // mean-square regularizer on estimated curvature
    double feat_weight = 5.0;
    int n_neg = 3;
    double tau_start = 1.0;
    double tau_end = 0.01;
    int epochs = 30;
    double lr = 0.01;
    double clip = 5.0; // global gradient-norm ceiling; 0 disables
    uint64_t seed = 1;
};

struct TrainSample {
    InputView ref;
    std::vector<InputView> srcs;
    Array gt_depth;        // [H,W] for the reference view
    Array mask;            // [H,W]
    Array gt_levels[4];    // /8, /4, /2, full
    Array mask_levels[4];  // valid where every pooled pixel was valid
};

TrainSample sample_from_scene(const Scene& scene, int ref_index, int max_srcs = 8);

/// Per pixel: |offset| ~ U(0.5, 4) * delta_base with a uniform sign, so
/// negatives are confusable but never inside the guard band around GT.
Array sample_negative_depths(const Array& d_gt, double delta_base, int n_neg, Rng& rng);

/// Mean absolute depth error over the masked pixels.
Var depth_loss(const Var& d_est, const Array& d_gt, const Array& mask);

/// Binary cross entropy on matching costs at GT vs negative depths, averaged
/// over levels and source views, plus the two regularizers.
Var feature_loss(const CdsMvsModel& model, const CascadeOutput& out, const TrainSample& sample,
                 const LossConfig& cfg, Rng& rng);

Var total_loss(const Var& l_feat, const std::vector<Var>& l_depth, double feat_weight);

/// Geometric schedule: tau_start at epoch 0, tau_end at the last epoch.
double anneal_tau(int epoch, const LossConfig& cfg);

struct TrainResult {
    std::vector<double> val_mae_per_epoch;  // empty entries when no holdout
    std::vector<double> train_mae_per_epoch;
    std::string checkpoint_path;
    std::string best_path;
    std::string metrics_path;
};

/// Seeded full training loop; writes metrics.csv, checkpoint.cdsw and
/// best.cdsw under out_dir. Aborts (throws) when the loss turns non-finite.
TrainResult train(CdsMvsModel& model, const std::vector<TrainSample>& train_set,
                  const std::vector<TrainSample>& holdout, const LossConfig& cfg,
                  const std::string& out_dir);

/// Mean absolute error of the refined (stage 3) depth over a sample set.
double eval_mae(const CdsMvsModel& model, const std::vector<TrainSample>& samples, double tau);

struct DepthQuality {
    double mae = 0;
    double precision = 0; // fraction of masked pixels with |err| < threshold
    double stage_mae[4] = {0, 0, 0, 0};
};

/// Full-resolution MAE/precision plus per-stage MAE (each stage against the
/// area-downsampled ground truth).
DepthQuality eval_depth_quality(const CdsMvsModel& model, const std::vector<TrainSample>& samples,
                                double tau, double threshold);

/// Plain-text "key = value" config; unknown keys are an error.
LossConfig parse_loss_config(const std::string& path);
void write_loss_config(const std::string& path, const LossConfig& cfg);

} // namespace cds
