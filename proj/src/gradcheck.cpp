#include "cds/gradcheck.hpp"

#include <cmath>
#include <stdexcept>

namespace cds {

GradCheckResult grad_check(const std::function<Var(const std::vector<Var>&)>& scalar_fn,
                           std::vector<Array> inputs, double eps, long max_coords_per_input) {
    std::vector<Var> leaves;
    leaves.reserve(inputs.size());
    for (auto& a : inputs) leaves.emplace_back(a, true);

    Var loss = scalar_fn(leaves);
    if (loss.numel() != 1) throw std::invalid_argument("grad_check: fn must return a scalar");
    backward(loss);

    auto eval = [&](const std::vector<Var>& vs) {
        const Var l = scalar_fn(vs);
        return l.value()[0];
    };

    GradCheckResult res;
    for (size_t vi = 0; vi < leaves.size(); ++vi) {
        const Array& g = leaves[vi].node()->grad;
        const long n = leaves[vi].numel();
        long stride = 1;
        if (max_coords_per_input > 0 && n > max_coords_per_input) stride = n / max_coords_per_input;
        for (long i = 0; i < n; i += stride) {
            std::vector<Var> probe;
            probe.reserve(leaves.size());
            for (size_t j = 0; j < leaves.size(); ++j) probe.push_back(Var(leaves[j].value(), false));
            Array& pv = probe[vi].mutable_value();
            const double x0 = pv[i];
            pv[i] = x0 + eps;
            const double fp = eval(probe);
            pv[i] = x0 - eps;
            const double fm = eval(probe);
            pv[i] = x0;
            const double numeric = (fp - fm) / (2.0 * eps);
            const double analytic = g.empty() ? 0.0 : g[i];
            const double denom = std::max({1.0, std::abs(numeric), std::abs(analytic)});
            res.max_rel_err = std::max(res.max_rel_err, std::abs(numeric - analytic) / denom);
            ++res.checked;
        }
    }
    return res;
}

} // namespace cds
