#pragma once

#include <functional>
#include <vector>

#include "cds/autodiff.hpp"

namespace cds {

struct GradCheckResult {
    double max_rel_err = 0.0;
    long checked = 0;
    bool ok(double tol) const { return checked > 0 && max_rel_err <= tol; }
};

/// Compares analytic gradients of scalar_fn against central finite differences
/// (f(x+eps) - f(x-eps)) / 2eps at every coordinate of every input (or a
/// deterministic subsample of max_coords_per_input when positive).
/// Relative error is |g - n| / max(1, |g|, |n|).
GradCheckResult grad_check(const std::function<Var(const std::vector<Var>&)>& scalar_fn,
                           std::vector<Array> inputs, double eps = 1e-5,
                           long max_coords_per_input = 0);

} // namespace cds
