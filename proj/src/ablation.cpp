#include "cds/ablation.hpp"


#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace cds {

std::vector<AblationVariant> ablation_grid() {
    return {
        {"A", CurvatureMode::Original, false},
        {"B", CurvatureMode::Original, true},
        {"C", CurvatureMode::Learnable, false},
        {"D", CurvatureMode::Learnable, true},
    };
}

std::vector<AblationVariant> select_variants(const std::string& mode) {
    std::vector<AblationVariant> out;
    for (const auto& v : ablation_grid()) {
        const bool keep = mode == "all" || (mode == "learnable" && v.mode == CurvatureMode::Learnable) ||
                          (mode == "original" && v.mode == CurvatureMode::Original) ||
                          (mode == "vis" && v.vis_with_curvature) ||
                          (mode == "no-vis" && !v.vis_with_curvature);
        if (keep) out.push_back(v);
    }
    if (out.empty()) throw std::invalid_argument("unknown ablation mode: " + mode);
    return out;
}

std::vector<AblationResult> run_ablation(const std::vector<TrainSample>& train_set,
                                         const std::vector<TrainSample>& holdout,
                                         const LossConfig& cfg,
                                         const std::vector<AblationVariant>& variants,
                                         const std::string& out_dir) {
    std::filesystem::create_directories(out_dir);
    std::vector<AblationResult> results;
    const double delta = train_set.empty()
                             ? 0.1
                             : (train_set[0].ref.cam.d_max - train_set[0].ref.cam.d_min) / 48.0;

    for (const auto& variant : variants) {
        AblationResult res;
        res.variant = variant;
        MvsModelConfig mcfg;
        mcfg.feat.mode = variant.mode;
        mcfg.vis_with_curvature = variant.vis_with_curvature;
        mcfg.init_seed = cfg.seed;
        CdsMvsModel model(mcfg);
        try {
            train(model, train_set, holdout, cfg, out_dir + "/variant_" + variant.name);
            const DepthQuality q =
                eval_depth_quality(model, holdout.empty() ? train_set : holdout, cfg.tau_end, 2.0 * delta);
            res.holdout_mae = q.mae;
            res.precision = q.precision;
            res.diverged = !std::isfinite(q.mae);
        } catch (const std::exception&) {
            res.diverged = true; // the divergence guard aborts the run
        }
        results.push_back(res);
    }

    std::ofstream csv(out_dir + "/ablation.csv");
    csv << "variant,curvature,vis_input,holdout_mae,precision_2delta,diverged\n" << std::setprecision(9);
    for (const auto& r : results)
        csv << r.variant.name << "," << (r.variant.mode == CurvatureMode::Learnable ? "learnable" : "original")
            << "," << (r.variant.vis_with_curvature ? "curvature+entropy" : "entropy") << "," << r.holdout_mae
            << "," << r.precision << "," << (r.diverged ? 1 : 0) << "\n";
    return results;
}

std::string format_ablation_table(const std::vector<AblationResult>& results) {
    std::ostringstream os;
    os << std::left << std::setw(9) << "variant" << std::setw(11) << "curvature" << std::setw(19)
       << "vis input" << std::setw(14) << "holdout MAE" << std::setw(12) << "prec@2d" << "status\n";
    for (const auto& r : results) {
        os << std::left << std::setw(9) << r.variant.name << std::setw(11)
           << (r.variant.mode == CurvatureMode::Learnable ? "learnable" : "original") << std::setw(19)
           << (r.variant.vis_with_curvature ? "curvature+entropy" : "entropy") << std::setw(14)
           << std::setprecision(6) << r.holdout_mae << std::setw(12) << r.precision
           << (r.diverged ? "diverged" : "ok") << "\n";
    }
    return os.str();
}

} // namespace cds
