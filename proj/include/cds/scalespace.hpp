#pragma once

#include "cds/array.hpp"
#include "cds/geometry.hpp"

namespace cds {

/// Sampled Gaussian and its derivatives up to second order, on the integer
/// grid with k = 2*ceil(3*sigma)+1. G sums to exactly 1; every derivative
/// kernel is mean-corrected to sum exactly 0.
struct GaussianBank {
    double sigma = 0;
    int ksize = 0;
    Array g, gx, gy, gxx, gxy, gyy; // each [k,k]
};

GaussianBank gaussian_bank(double sigma);

/// One sampled Gaussian-derivative kernel on an explicit k x k grid
/// (dx + dy <= 2). Derivative kernels are mean-corrected, G is normalized.
Array gaussian_derivative_kernel(int dx, int dy, double sigma, int ksize);

/// Plain single-channel "same" convolution with reflect padding.
Array conv_same_reflect(const Array& img, const Array& kernel);

/// Full normal-curvature formula: second-derivative response along omega over
/// the first-fundamental-form denominator.
Array normal_curvature_exact(const Array& img, const EpipolarField& omega, double sigma);

/// Denominator-free form on kernels rescaled by kernel_scale, valid when
/// derivative responses stay well below 1.
Array normal_curvature_approx(const Array& img, const EpipolarField& omega, double sigma,
                              double kernel_scale = 0.01);

} // namespace cds
