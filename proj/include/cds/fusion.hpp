#pragma once

#include <vector>

#include "cds/image_io.hpp"
#include "cds/mvs.hpp"

namespace cds {

struct FusionParams {
    double conf_thresh = 0.3;      // on the product of stage confidences
    int n_consistent = 2;          // other views that must agree
    double max_reproj_px = 1.0;
    double max_rel_depth_diff = 0.01;
};

/// Geometric-consistency fusion of per-view depth maps into a colored cloud.
/// A pixel survives when its confidence passes and at least n_consistent
/// other views reproject onto it within the pixel/depth tolerances; agreeing
/// depth estimates are averaged before unprojection.
PointCloud fuse(const std::vector<Array>& depths, const std::vector<Array>& confidences,
                const std::vector<InputView>& views, const FusionParams& params);

} // namespace cds
