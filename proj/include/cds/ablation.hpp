#pragma once

#include <string>
#include <vector>

#include "cds/training.hpp"

namespace cds {

/// One cell of the 2x2 ablation grid: curvature type x visibility input.
struct AblationVariant {
    std::string name;       // A..D
    CurvatureMode mode = CurvatureMode::Learnable;
    bool vis_with_curvature = true;
};

struct AblationResult {
    AblationVariant variant;
    double holdout_mae = 0;
    double precision = 0;
    bool diverged = false;
};

/// The grid: A = original curvature / entropy-only visibility,
/// B = original / curvature+entropy, C = learnable / entropy-only,
/// D = learnable / curvature+entropy.
std::vector<AblationVariant> ablation_grid();

/// Filter the grid by a mode keyword: all, learnable, original, vis, no-vis.
std::vector<AblationVariant> select_variants(const std::string& mode);

/// Trains every variant with identical data, seed and schedule; writes
/// ablation.csv plus one training directory per variant under out_dir.
std::vector<AblationResult> run_ablation(const std::vector<TrainSample>& train_set,
                                         const std::vector<TrainSample>& holdout,
                                         const LossConfig& cfg,
                                         const std::vector<AblationVariant>& variants,
                                         const std::string& out_dir);

std::string format_ablation_table(const std::vector<AblationResult>& results);

} // namespace cds
