#pragma once

#include <vector>

#include "cds/array.hpp"
#include "cds/image_io.hpp"

namespace cds {

struct DepthEval {
    double mae = 0;
    std::vector<double> precision; // fraction of |err| < threshold, per input threshold
};

/// precision@tau and MAE over masked pixels; throws on an empty mask.
DepthEval eval_depth(const Array& est, const Array& gt, const Array& mask,
                     const std::vector<double>& thresholds);

struct CloudEval {
    double accuracy = 0;     // mean est->gt nearest distance, clipped at dist_thresh
    double completeness = 0; // mean gt->est nearest distance
    double overall = 0;
};

/// Nearest neighbours via a uniform grid with cell size dist_thresh; points
/// without a neighbour inside dist_thresh are clipped out of the mean.
CloudEval eval_cloud(const PointCloud& est, const PointCloud& gt, double dist_thresh);

/// Median nearest-neighbour distance over a deterministic subsample; the
/// conventional evaluation threshold is 20x this spacing.
double estimate_point_spacing(const PointCloud& cloud);

} // namespace cds
