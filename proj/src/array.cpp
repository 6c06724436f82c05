#include "cds/array.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace cds {

long shape_numel(const std::vector<int>& shape) {
    long n = 1;
    for (int d : shape) {
        if (d <= 0) throw std::invalid_argument("Array: non-positive dimension");
        n *= d;
    }
    return n;
}

Array::Array(std::vector<int> shape, double fill)
    : shape_(std::move(shape)), data_(static_cast<size_t>(shape_numel(shape_)), fill) {}

Array::Array(std::vector<int> shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (shape_numel(shape_) != static_cast<long>(data_.size()))
        throw std::invalid_argument("Array: shape/data size mismatch");
}

bool Array::all_finite() const {
    for (double v : data_)
        if (!std::isfinite(v)) return false;
    return true;
}

void Array::fill(double v) {
    for (auto& x : data_) x = v;
}

std::string Array::shape_str() const {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < shape_.size(); ++i) os << (i ? "," : "") << shape_[i];
    os << "]";
    return os.str();
}

Array bilinear_upsample2(const Array& a) {
    const bool chan = a.rank() == 3;
    const int C = chan ? a.dim(0) : 1;
    const int H = chan ? a.dim(1) : a.dim(0);
    const int W = chan ? a.dim(2) : a.dim(1);
    const int H2 = H * 2, W2 = W * 2;
    Array out(chan ? std::vector<int>{C, H2, W2} : std::vector<int>{H2, W2});
    for (int c = 0; c < C; ++c) {
        const double* src = a.data() + static_cast<long>(c) * H * W;
        double* dst = out.data() + static_cast<long>(c) * H2 * W2;
        for (int y = 0; y < H2; ++y) {
            double sy = (y + 0.5) * 0.5 - 0.5;
            int y0 = static_cast<int>(std::floor(sy));
            double fy = sy - y0;
            int y0c = std::min(std::max(y0, 0), H - 1);
            int y1c = std::min(std::max(y0 + 1, 0), H - 1);
            for (int x = 0; x < W2; ++x) {
                double sx = (x + 0.5) * 0.5 - 0.5;
                int x0 = static_cast<int>(std::floor(sx));
                double fx = sx - x0;
                int x0c = std::min(std::max(x0, 0), W - 1);
                int x1c = std::min(std::max(x0 + 1, 0), W - 1);
                double v = (1 - fy) * ((1 - fx) * src[y0c * W + x0c] + fx * src[y0c * W + x1c]) +
                           fy * ((1 - fx) * src[y1c * W + x0c] + fx * src[y1c * W + x1c]);
                dst[y * W2 + x] = v;
            }
        }
    }
    return out;
}

Array area_downsample2(const Array& a) {
    const bool chan = a.rank() == 3;
    const int C = chan ? a.dim(0) : 1;
    const int H = chan ? a.dim(1) : a.dim(0);
    const int W = chan ? a.dim(2) : a.dim(1);
    if (H % 2 || W % 2) throw std::invalid_argument("area_downsample2: odd dimensions");
    const int H2 = H / 2, W2 = W / 2;
    Array out(chan ? std::vector<int>{C, H2, W2} : std::vector<int>{H2, W2});
    for (int c = 0; c < C; ++c) {
        const double* src = a.data() + static_cast<long>(c) * H * W;
        double* dst = out.data() + static_cast<long>(c) * H2 * W2;
        for (int y = 0; y < H2; ++y)
            for (int x = 0; x < W2; ++x)
                dst[y * W2 + x] = 0.25 * (src[(2 * y) * W + 2 * x] + src[(2 * y) * W + 2 * x + 1] +
                                          src[(2 * y + 1) * W + 2 * x] + src[(2 * y + 1) * W + 2 * x + 1]);
    }
    return out;
}

Array luminance(const Array& rgb) {
    if (rgb.rank() != 3 || rgb.dim(0) != 3) throw std::invalid_argument("luminance: expected [3,H,W]");
    const int H = rgb.dim(1), W = rgb.dim(2);
    Array out({H, W});
    const long n = static_cast<long>(H) * W;
    const double* r = rgb.data();
    const double* g = r + n;
    const double* b = g + n;
    for (long i = 0; i < n; ++i) out[i] = 0.299 * r[i] + 0.587 * g[i] + 0.114 * b[i];
    return out;
}

} // namespace cds
