#include "cds/evalmetrics.hpp"

#include <algorithm>
#include <cmath>
#include <vector>
#include <stdexcept>
#include <unordered_map>

namespace cds {

DepthEval eval_depth(const Array& est, const Array& gt, const Array& mask,
                     const std::vector<double>& thresholds) {
    if (!est.same_shape(gt) || !est.same_shape(mask))
        throw std::invalid_argument("eval_depth: shape mismatch");
    DepthEval out;
    out.precision.assign(thresholds.size(), 0.0);
    double count = 0;
    for (long i = 0; i < est.numel(); ++i) {
        if (mask[i] <= 0) continue;
        const double err = std::abs(est[i] - gt[i]);
        out.mae += err;
        for (size_t t = 0; t < thresholds.size(); ++t)
            if (err < thresholds[t]) out.precision[t] += 1.0;
        count += 1;
    }
    if (count == 0) throw std::invalid_argument("eval_depth: empty mask");
    out.mae /= count;
    for (auto& p : out.precision) p /= count;
    return out;
}

namespace {

struct GridIndex {
    double cell;
    std::unordered_map<long long, std::vector<int>> cells;
    const std::vector<PlyPoint>* pts;

    static long long key(long ix, long iy, long iz) {
        return ((ix & 0x1fffffll) << 42) | ((iy & 0x1fffffll) << 21) | (iz & 0x1fffffll);
    }

    GridIndex(const std::vector<PlyPoint>& points, double cell_size) : cell(cell_size), pts(&points) {
        for (int i = 0; i < static_cast<int>(points.size()); ++i) {
            const auto& p = points[static_cast<size_t>(i)];
            cells[key(static_cast<long>(std::floor(p.x / cell)), static_cast<long>(std::floor(p.y / cell)),
                      static_cast<long>(std::floor(p.z / cell)))]
                .push_back(i);
        }
    }

    // nearest distance within one cell ring (covers radius <= cell)
    double nearest(const PlyPoint& q) const {
        const long ix = static_cast<long>(std::floor(q.x / cell));
        const long iy = static_cast<long>(std::floor(q.y / cell));
        const long iz = static_cast<long>(std::floor(q.z / cell));
        double best = 1e300;
        for (long dz = -1; dz <= 1; ++dz)
            for (long dy = -1; dy <= 1; ++dy)
                for (long dx = -1; dx <= 1; ++dx) {
                    const auto it = cells.find(key(ix + dx, iy + dy, iz + dz));
                    if (it == cells.end()) continue;
                    for (int i : it->second) {
                        const auto& p = (*pts)[static_cast<size_t>(i)];
                        const double d2 = (p.x - q.x) * (p.x - q.x) + (p.y - q.y) * (p.y - q.y) +
                                          (p.z - q.z) * (p.z - q.z);
                        best = std::min(best, d2);
                    }
                }
        return std::sqrt(best);
    }
};

double directed_error(const std::vector<PlyPoint>& from, const GridIndex& to_index, double thresh) {
    double sum = 0;
    long kept = 0;
    for (const auto& p : from) {
        const double d = to_index.nearest(p);
        if (d > thresh) continue; // outliers clipped out of the mean
        sum += d;
        ++kept;
    }
    return kept ? sum / static_cast<double>(kept) : thresh;
}

} // namespace

double estimate_point_spacing(const PointCloud& cloud) {
    const size_t n = cloud.points.size();
    if (n < 2) throw std::invalid_argument("estimate_point_spacing: need at least 2 points");
    const size_t queries = std::min<size_t>(n, 200);
    const size_t pool = std::min<size_t>(n, 2000);
    const size_t qstep = std::max<size_t>(1, n / queries);
    const size_t pstep = std::max<size_t>(1, n / pool);
    std::vector<double> dists;
    for (size_t i = 0; i < n; i += qstep) {
        const auto& q = cloud.points[i];
        double best = 1e300;
        for (size_t j = 0; j < n; j += pstep) {
            if (j == i) continue;
            const auto& p = cloud.points[j];
            const double d2 = (p.x - q.x) * (p.x - q.x) + (p.y - q.y) * (p.y - q.y) + (p.z - q.z) * (p.z - q.z);
            best = std::min(best, d2);
        }
        dists.push_back(std::sqrt(best));
    }
    std::nth_element(dists.begin(), dists.begin() + static_cast<long>(dists.size() / 2), dists.end());
    return dists[dists.size() / 2];
}

CloudEval eval_cloud(const PointCloud& est, const PointCloud& gt, double dist_thresh) {
    if (est.points.empty() || gt.points.empty()) throw std::invalid_argument("eval_cloud: empty cloud");
    if (dist_thresh <= 0) throw std::invalid_argument("eval_cloud: threshold must be positive");
    const GridIndex est_idx(est.points, dist_thresh);
    const GridIndex gt_idx(gt.points, dist_thresh);
    CloudEval out;
    out.accuracy = directed_error(est.points, gt_idx, dist_thresh);
    out.completeness = directed_error(gt.points, est_idx, dist_thresh);
    out.overall = 0.5 * (out.accuracy + out.completeness);
    return out;
}

} // namespace cds
