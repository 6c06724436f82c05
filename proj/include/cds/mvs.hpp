#pragma once

#include <functional>

#include "cds/cdsfnet.hpp"
#include "cds/geometry.hpp"

namespace cds {

/// Per-view reliability from the estimated curvature and the cost entropy:
/// conv3x3(2->8) + leaky ReLU + conv3x3(8->1) + sigmoid. The final layer is
/// zero-initialized, so an untrained net outputs 0.5 everywhere.
struct VisNet {
    VisNet() = default;
    VisNet(Model& model, const std::string& prefix, bool with_curvature, Rng& rng);
    Var forward(const Var& nc_est, const Var& entropy) const; // -> [1,h,w] in (0,1)
    bool with_curvature = true;
    Var w1, b1, w2, b2;
};

/// 3-D regularizer: conv3x3x3 stack 1->8->8->1 with a residual connection to
/// the input volume, then softmax over depth. Zero-initialized final layer
/// makes the untrained net the plain softmax of its input.
struct RegNet3D {
    RegNet3D() = default;
    RegNet3D(Model& model, const std::string& prefix, Rng& rng);
    Var forward(const Var& volume) const; // [D,h,w] -> probability volume [D,h,w]
    Var w1, b1, w2, b2, w3, b3;
};

/// Full-resolution depth residual from the upsampled depth and the image.
struct RefineNet {
    RefineNet() = default;
    RefineNet(Model& model, const std::string& prefix, Rng& rng);
    /// depth_up: [1,H,W]; returns [H,W] = depth_up + denormalized residual.
    Var forward(const Var& depth_up, const Array& image, double d_min, double d_max) const;
    Var w1, b1, w2, b2, w3, b3;
};

/// Channel-mean inner product between reference features and each warped
/// slice: [C,H,W] x [D,C,H,W] -> [D,H,W].
Var two_view_cost(const Var& f_ref, const Var& warped);

/// Shannon entropy of the softmax-normalized cost over the depth axis.
Var cost_entropy(const Var& volume); // [D,H,W] -> [H,W]

/// Visibility-weighted mean over views; denominator floored at 1e-8.
Var aggregate_costs(const std::vector<Var>& volumes, const std::vector<Var>& weights);

/// Expected depth under the probability volume.
Var regress_depth(const Var& prob, const Array& hypotheses); // -> [H,W]

/// Sum of the 4 probability slices nearest the per-pixel argmax; the window
/// shifts inward at the volume ends.
Array confidence_map(const Array& prob); // [D,H,W] -> [H,W]

struct MvsModelConfig {
    CdsfNetConfig feat;
    bool vis_with_curvature = true;
    CascadeConfig cascade;
    uint64_t init_seed = 1;
    // Cost contrasts reaching the 3-D regularizers are small; the heads need
    // a faster learning rate than the deep feature stack to sharpen the
    // probability volumes within a short schedule.
    double reg_lr_mult = 5.0;
};

struct InputView {
    Array image; // [3,H,W]
    Camera cam;
};

class CdsMvsModel {
public:
    explicit CdsMvsModel(const MvsModelConfig& cfg);

    Model params;
    CdsfNet feat;
    VisNet vis[3];
    RegNet3D reg[3];
    RefineNet refine;
    MvsModelConfig cfg;

    /// Test-harness hook: when set, replaces feature extraction entirely.
    std::function<FeaturePyramid(const Array& image, const Vec3& epipole, double tau)> feature_hook;

    FeaturePyramid extract(const Array& image, const Vec3& epipole, double tau) const;
};

struct CascadeOutput {
    Var depth[4];        // stage depths at 1/8, 1/4, 1/2 and full resolution, each [h,w]
    Array confidence[3]; // per-stage confidences for the sweep stages
    Array prob[3];       // per-stage probability volumes [D,h,w]
    Array hypotheses[3]; // per-stage hypothesis depths [D,h,w]
    std::vector<Array> visibility[3]; // per-stage, per-view weight maps [1,h,w]
    // Per-pair pyramids kept for the feature loss.
    std::vector<FeaturePyramid> ref_pyramids, src_pyramids;
    std::vector<Vec3> ref_epipoles; // e_{0,i} at full resolution
};

/// Runs the whole coarse-to-fine pipeline for one reference view.
CascadeOutput cascade_forward(const CdsMvsModel& model, const InputView& ref,
                              const std::vector<InputView>& srcs, double tau);

/// Mean-subtracted image pyramids standing in for learned features (test
/// harness hook for plane-sweep sanity checks).
FeaturePyramid identity_feature_pyramid(const Array& image);

/// Normalized 3x3 luminance patches per level (9 channels): the channel-wise
/// inner product of these descriptors is a windowed photometric correlation,
/// the classic untrained plane-sweep matcher.
FeaturePyramid photometric_feature_pyramid(const Array& image);

/// Product of the three stage confidences, each bilinearly upsampled to the
/// full resolution.
Array full_res_confidence(const CascadeOutput& out, int H, int W);

/// Reconstructs the architecture options encoded in a checkpoint's parameter
/// names and shapes (curvature mode, candidate sizes, visibility input).
MvsModelConfig infer_model_config(const std::string& checkpoint_path);

} // namespace cds
