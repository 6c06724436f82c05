#include "cds/fusion.hpp"

#include <cmath>
#include <stdexcept>

namespace cds {

namespace {

// Bilinear depth lookup; fails (returns <= 0) when any tap is missing.
double depth_at(const Array& d, double x, double y) {
    const int H = d.dim(0), W = d.dim(1);
    if (!(x >= 0 && x <= W - 1 && y >= 0 && y <= H - 1)) return -1.0;
    const int x0 = std::min(static_cast<int>(x), W - 2);
    const int y0 = std::min(static_cast<int>(y), H - 2);
    const double fx = x - x0, fy = y - y0;
    const double v00 = d.at(y0, x0), v10 = d.at(y0, x0 + 1);
    const double v01 = d.at(y0 + 1, x0), v11 = d.at(y0 + 1, x0 + 1);
    if (v00 <= 0 || v10 <= 0 || v01 <= 0 || v11 <= 0) return -1.0;
    return (1 - fy) * ((1 - fx) * v00 + fx * v10) + fy * ((1 - fx) * v01 + fx * v11);
}

} // namespace

PointCloud fuse(const std::vector<Array>& depths, const std::vector<Array>& confidences,
                const std::vector<InputView>& views, const FusionParams& params) {
    const size_t n = views.size();
    if (n < 2) throw std::invalid_argument("fuse: need at least 2 views");
    if (depths.size() != n || confidences.size() != n)
        throw std::invalid_argument("fuse: depth/confidence count mismatch");

    PointCloud cloud;
    for (size_t r = 0; r < n; ++r) {
        const Array& d_ref = depths[r];
        const Camera& cam_ref = views[r].cam;
        const int H = d_ref.dim(0), W = d_ref.dim(1);
        const long plane = static_cast<long>(H) * W;
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                const double d = d_ref.at(y, x);
                if (d <= 0) continue;
                if (confidences[r].at(y, x) < params.conf_thresh) continue;
                const Vec3 p = unproject(x, y, d, cam_ref);

                int agree = 0;
                double depth_sum = d;
                for (size_t j = 0; j < n; ++j) {
                    if (j == r) continue;
                    const Projected q = project(p, views[j].cam);
                    if (q.depth <= 0) continue;
                    const double dj = depth_at(depths[j], q.x, q.y);
                    if (dj <= 0) continue;
                    const Vec3 pj = unproject(q.x, q.y, dj, views[j].cam);
                    const Projected back = project(pj, cam_ref);
                    if (back.depth <= 0) continue;
                    const double err_px = std::hypot(back.x - x, back.y - y);
                    const double rel = std::abs(back.depth - d) / d;
                    if (err_px < params.max_reproj_px && rel < params.max_rel_depth_diff) {
                        ++agree;
                        depth_sum += back.depth;
                    }
                }
                if (agree < params.n_consistent) continue;
                const Vec3 pt = unproject(x, y, depth_sum / (agree + 1), cam_ref);
                PlyPoint out;
                out.x = pt.x;
                out.y = pt.y;
                out.z = pt.z;
                const long idx = static_cast<long>(y) * W + x;
                out.r = views[r].image[idx];
                out.g = views[r].image[plane + idx];
                out.b = views[r].image[2 * plane + idx];
                cloud.points.push_back(out);
            }
    }
    return cloud;
}

} // namespace cds
