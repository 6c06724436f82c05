#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "cds/array.hpp"

namespace cds {

enum class PaddingMode { Reflect, Zero };

struct Node;
using NodePtr = std::shared_ptr<Node>;

/// One vertex of the computation graph. Nodes are created in topological
/// order (parents always have smaller ids), so a reverse sweep by id is a
/// valid reverse topological order.
struct Node {
    Array value;
    Array grad; // lazily allocated, same shape as value
    bool requires_grad = false;
    std::vector<NodePtr> parents;
    std::function<void(Node&)> backward_fn; // pulls this->grad into parent grads
    long id = 0;

    Array& ensure_grad();
};

/// Value-semantics handle to a graph node.
class Var {
public:
    Var() = default;
    explicit Var(Array value, bool requires_grad = false);

    bool defined() const { return static_cast<bool>(node_); }
    const Array& value() const { return node_->value; }
    Array& mutable_value() { return node_->value; }
    const Array& grad() const { return node_->grad; }
    Array& grad_mut() { return node_->ensure_grad(); }
    bool requires_grad() const { return node_ && node_->requires_grad; }
    const std::vector<int>& shape() const { return node_->value.shape(); }
    long numel() const { return node_->value.numel(); }
    NodePtr node() const { return node_; }

    static Var from_node(NodePtr n);

private:
    NodePtr node_;
};

/// Convenience: non-differentiable leaf holding a constant array.
Var constant(Array value);

// Elementwise / reduction primitives. All are pure; each returns a fresh node.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var div(const Var& a, const Var& b);
Var add_scalar(const Var& a, double s);
Var mul_scalar(const Var& a, double s);
Var exp(const Var& a);
Var log(const Var& a);
Var sqrt(const Var& a);
Var square(const Var& a);
Var abs(const Var& a);
Var leaky_relu(const Var& a, double slope = 0.1);
Var sigmoid(const Var& a);
Var clamp_min(const Var& a, double lo);
Var sum(const Var& a);  // -> scalar [1]
Var mean(const Var& a); // -> scalar [1]
Var reduce_sum_axis0(const Var& a);

// Shape plumbing.
Var reshape(const Var& a, std::vector<int> shape);
Var concat0(const std::vector<Var>& parts); // along axis 0, trailing dims equal
Var take0(const Var& a, int index);         // drop leading axis, select block

// Broadcast helpers over the leading axis.
Var scale_channels(const Var& x, const Var& w);   // x:[L,H,W] * w:[H,W] (or [1,H,W])
Var add_channel_bias(const Var& x, const Var& b); // x:[C,...] + b:[C]

/// Per-pixel inner product over the channel axis: a,b:[C,H,W] -> [H,W].
Var inner_product_channels(const Var& a, const Var& b);

/// Softmax over axis 0 with temperature; max-subtracted for stability.
Var softmax_temperature(const Var& logits, double tau);

/// 2-D convolution, "same" padding of (k-1)/2, odd kernels only.
/// input [C_in,H,W], kernel [C_out,C_in,k,k] -> [C_out,H',W'].
Var conv2d(const Var& input, const Var& kernel, int stride = 1, PaddingMode pad = PaddingMode::Reflect);

/// 3-D convolution over [C_in,D,H,W] with kernel [C_out,C_in,k,k,k], stride 1, same padding.
Var conv3d(const Var& input, const Var& kernel, PaddingMode pad = PaddingMode::Reflect);

/// Bilinear sampling at continuous pixel coordinates.
/// input [C,H,W], coords [2,H',W'] with channel 0 = x, channel 1 = y.
/// Samples outside the image contribute zero.
Var grid_sample_bilinear(const Var& input, const Var& coords);

/// Validity of grid_sample coordinates: 1 where (x,y) lies in [0,W-1]x[0,H-1].
Array grid_sample_valid_mask(const Array& coords, int H, int W);

/// Bilinear x2 upsampling of [C,H,W].
Var upsample_bilinear2(const Var& a);

/// Reverse-mode sweep from a scalar loss. Grads accumulate additively; call
/// Model::zero_grad between steps.
void backward(const Var& loss);

} // namespace cds
