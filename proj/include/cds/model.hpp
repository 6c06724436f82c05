#pragma once

#include <string>
#include <vector>

#include "cds/autodiff.hpp"

namespace cds {

struct Param {
    Var var;
    std::string name;
    double lr_mult = 1.0;
};

/// Owns the learnable leaves of a network. Names must be unique; the
/// checkpoint stores tensors in sorted name order.
class Model {
public:
    Var add(const std::string& name, Array init, double lr_mult = 1.0);
    Param* find(const std::string& name);
    const std::vector<Param>& params() const { return params_; }
    std::vector<Param>& params() { return params_; }

    /// p <- p - lr * mult * grad(p), then grads are zeroed.
    void sgd_step(double lr);
    void zero_grad();
    double grad_norm() const;
    /// Rescales all gradients when their global norm exceeds max_norm.
    void clip_grad_norm(double max_norm);
    long total_parameters() const;

    /// Checkpoint file: magic "CDSW", u32 version, then per param in sorted
    /// name order: u32 name length, name bytes, u32 rank, u32 dims, f64 data.
    /// All integers and floats little-endian.
    void save(const std::string& path) const;
    void load(const std::string& path); // shapes and names must match

    struct ParamInfo {
        std::string name;
        std::vector<int> shape;
    };
    /// Names and shapes only; used to infer the architecture of a checkpoint.
    static std::vector<ParamInfo> peek(const std::string& path);

private:
    std::vector<Param> params_;
};

} // namespace cds
