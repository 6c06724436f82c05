#pragma once

#include "cds/cdsconv.hpp"

namespace cds {

struct CdsfNetConfig {
    std::vector<int> stem_sizes{3, 5, 7}; // first layer candidates
    std::vector<int> body_sizes{3, 5};    // deeper layers
    CurvatureMode mode = CurvatureMode::Learnable;
};

/// Per-pair feature pyramid; level 0 is the coarsest (1/8 resolution).
struct FeaturePyramid {
    Var features[3];   // [32,H/8,W/8], [16,H/4,W/4], [8,H/2,W/2]
    Var curvatures[3]; // [1,h,w] estimated normal curvature per level
};

/// UNet-shaped stack of CdsConv layers. Extraction is a function of both the
/// image and the epipole of the image pair, so reference features are
/// recomputed per source pairing.
class CdsfNet {
public:
    CdsfNet() = default;
    CdsfNet(Model& model, const std::string& prefix, const CdsfNetConfig& cfg, Rng& rng);

    /// Input resolution must be divisible by 8. The epipole is given in
    /// full-resolution pixel coordinates and rescaled per level.
    FeaturePyramid extract(const Array& image, const Vec3& epipole, double tau) const;

    const CdsfNetConfig& config() const { return cfg_; }

    CdsConvLayer enc2a, enc2b; // 1/2 resolution, 8 channels
    CdsConvLayer enc1a, enc1b; // 1/4 resolution, 16 channels
    CdsConvLayer enc0a, enc0b; // 1/8 resolution, 32 channels
    CdsConvLayer head0, head1, head2;
    Var fuse1_w, fuse1_b; // 1x1 fusion after upsample+skip concat (48->16)
    Var fuse2_w, fuse2_b; // (24->8)

private:
    CdsfNetConfig cfg_;
};

} // namespace cds
