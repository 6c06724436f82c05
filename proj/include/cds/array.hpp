#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace cds {

/// Dense row-major f64 array. Shapes are small (rank <= 5), data is owned.
class Array {
public:
    Array() = default;
    explicit Array(std::vector<int> shape, double fill = 0.0);
    Array(std::vector<int> shape, std::vector<double> data);

    const std::vector<int>& shape() const { return shape_; }
    int rank() const { return static_cast<int>(shape_.size()); }
    int dim(int i) const { return shape_[static_cast<size_t>(i)]; }
    long numel() const { return static_cast<long>(data_.size()); }
    bool empty() const { return data_.empty(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    double& operator[](long i) { return data_[static_cast<size_t>(i)]; }
    double operator[](long i) const { return data_[static_cast<size_t>(i)]; }

    double& at(int a, int b) { return data_[static_cast<size_t>(a) * dim(1) + b]; }
    double at(int a, int b) const { return data_[static_cast<size_t>(a) * dim(1) + b]; }
    double& at(int a, int b, int c) {
        return data_[(static_cast<size_t>(a) * dim(1) + b) * dim(2) + c];
    }
    double at(int a, int b, int c) const {
        return data_[(static_cast<size_t>(a) * dim(1) + b) * dim(2) + c];
    }
    double& at(int a, int b, int c, int d) {
        return data_[((static_cast<size_t>(a) * dim(1) + b) * dim(2) + c) * dim(3) + d];
    }
    double at(int a, int b, int c, int d) const {
        return data_[((static_cast<size_t>(a) * dim(1) + b) * dim(2) + c) * dim(3) + d];
    }

    bool same_shape(const Array& o) const { return shape_ == o.shape_; }
    bool all_finite() const;
    void fill(double v);

    std::string shape_str() const;

private:
    std::vector<int> shape_;
    std::vector<double> data_;
};

long shape_numel(const std::vector<int>& shape);

// Plain-array helpers used on non-differentiable paths (ground truth, hypotheses).
Array bilinear_upsample2(const Array& a);   // [H,W] or [C,H,W] -> doubled spatial dims
Array area_downsample2(const Array& a);     // 2x2 average pooling, dims must be even
Array luminance(const Array& rgb);          // [3,H,W] -> [H,W], 0.299/0.587/0.114 weights

} // namespace cds
