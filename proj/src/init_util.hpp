#pragma once

#include <cmath>

#include "cds/array.hpp"
#include "cds/rng.hpp"

namespace cds::detail {

// Kaiming-uniform bound for leaky ReLU (slope 0.1): keeps activation
// variance roughly constant through the stack, which the pipeline needs
// since it has no normalization layers.
inline double he_bound(long fan_in, double slope = 0.1) {
    return std::sqrt(6.0 / ((1.0 + slope * slope) * static_cast<double>(fan_in)));
}

inline Array he_uniform(std::vector<int> shape, long fan_in, Rng& rng) {
    Array a(std::move(shape));
    const double b = he_bound(fan_in);
    for (long i = 0; i < a.numel(); ++i) a[i] = rng.uniform(-b, b);
    return a;
}

} // namespace cds::detail
