#include "cds/autodiff.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

#include "node_factory.hpp"

namespace cds {

namespace {

std::atomic<long> g_node_counter{0};

void check_same_shape(const Var& a, const Var& b, const char* op) {
    if (!a.value().same_shape(b.value()))
        throw std::invalid_argument(std::string(op) + ": shape mismatch " + a.value().shape_str() + " vs " +
                                    b.value().shape_str());
}

} // namespace

namespace detail {

NodePtr make_node(Array value, std::vector<NodePtr> parents, std::function<void(Node&)> bw) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    bool rg = false;
    for (const auto& p : parents)
        if (p && p->requires_grad) rg = true;
    n->requires_grad = rg;
    if (rg) {
        n->parents = std::move(parents);
        n->backward_fn = std::move(bw);
    }
    n->id = ++g_node_counter;
    return n;
}

} // namespace detail

using detail::make_node;

Array& Node::ensure_grad() {
    if (grad.empty()) grad = Array(value.shape());
    return grad;
}

Var::Var(Array value, bool requires_grad) {
    node_ = std::make_shared<Node>();
    node_->value = std::move(value);
    node_->requires_grad = requires_grad;
    node_->id = ++g_node_counter;
}

Var Var::from_node(NodePtr n) {
    Var v;
    v.node_ = std::move(n);
    return v;
}

Var constant(Array value) {
    return Var(std::move(value), false);
}

// ---- elementwise binary ----

Var add(const Var& a, const Var& b) {
    check_same_shape(a, b, "add");
    Array out(a.shape());
    const long n = out.numel();
    for (long i = 0; i < n; ++i) out[i] = a.value()[i] + b.value()[i];
    auto pa = a.node(), pb = b.node();
    return Var::from_node(make_node(std::move(out), {pa, pb}, [pa, pb](Node& self) {
        const long n = self.value.numel();
        if (pa->requires_grad) {
            Array& g = pa->ensure_grad();
            for (long i = 0; i < n; ++i) g[i] += self.grad[i];
        }
        if (pb->requires_grad) {
            Array& g = pb->ensure_grad();
            for (long i = 0; i < n; ++i) g[i] += self.grad[i];
        }
    }));
}

Var sub(const Var& a, const Var& b) {
    check_same_shape(a, b, "sub");
    Array out(a.shape());
    const long n = out.numel();
    for (long i = 0; i < n; ++i) out[i] = a.value()[i] - b.value()[i];
    auto pa = a.node(), pb = b.node();
    return Var::from_node(make_node(std::move(out), {pa, pb}, [pa, pb](Node& self) {
        const long n = self.value.numel();
        if (pa->requires_grad) {
            Array& g = pa->ensure_grad();
            for (long i = 0; i < n; ++i) g[i] += self.grad[i];
        }
        if (pb->requires_grad) {
            Array& g = pb->ensure_grad();
            for (long i = 0; i < n; ++i) g[i] -= self.grad[i];
        }
    }));
}

Var mul(const Var& a, const Var& b) {
    check_same_shape(a, b, "mul");
    Array out(a.shape());
    const long n = out.numel();
    for (long i = 0; i < n; ++i) out[i] = a.value()[i] * b.value()[i];
    auto pa = a.node(), pb = b.node();
    return Var::from_node(make_node(std::move(out), {pa, pb}, [pa, pb](Node& self) {
        const long n = self.value.numel();
        if (pa->requires_grad) {
            Array& g = pa->ensure_grad();
            for (long i = 0; i < n; ++i) g[i] += self.grad[i] * pb->value[i];
        }
        if (pb->requires_grad) {
            Array& g = pb->ensure_grad();
            for (long i = 0; i < n; ++i) g[i] += self.grad[i] * pa->value[i];
        }
    }));
}

Var div(const Var& a, const Var& b) {
    check_same_shape(a, b, "div");
    Array out(a.shape());
    const long n = out.numel();
    for (long i = 0; i < n; ++i) out[i] = a.value()[i] / b.value()[i];
    auto pa = a.node(), pb = b.node();
    return Var::from_node(make_node(std::move(out), {pa, pb}, [pa, pb](Node& self) {
        const long n = self.value.numel();
        if (pa->requires_grad) {
            Array& g = pa->ensure_grad();
            for (long i = 0; i < n; ++i) g[i] += self.grad[i] / pb->value[i];
        }
        if (pb->requires_grad) {
            Array& g = pb->ensure_grad();
            for (long i = 0; i < n; ++i) {
                const double bv = pb->value[i];
                g[i] -= self.grad[i] * pa->value[i] / (bv * bv);
            }
        }
    }));
}

// ---- elementwise unary ----

namespace {

/// out = f(a); backward: da += g * dfdx(a_value, out_value)
template <typename F, typename DF>
Var unary_op(const Var& a, F f, DF dfdx) {
    Array out(a.shape());
    const long n = out.numel();
    for (long i = 0; i < n; ++i) out[i] = f(a.value()[i]);
    auto pa = a.node();
    return Var::from_node(make_node(std::move(out), {pa}, [pa, dfdx](Node& self) {
        if (!pa->requires_grad) return;
        Array& g = pa->ensure_grad();
        const long n = self.value.numel();
        for (long i = 0; i < n; ++i) g[i] += self.grad[i] * dfdx(pa->value[i], self.value[i]);
    }));
}

} // namespace

Var add_scalar(const Var& a, double s) {
    return unary_op(a, [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

Var mul_scalar(const Var& a, double s) {
    return unary_op(a, [s](double x) { return x * s; }, [s](double, double) { return s; });
}

Var exp(const Var& a) {
    return unary_op(a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var log(const Var& a) {
    return unary_op(a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Var sqrt(const Var& a) {
    return unary_op(a, [](double x) { return std::sqrt(x); },
                    [](double, double y) { return 0.5 / y; });
}

Var square(const Var& a) {
    return unary_op(a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Var abs(const Var& a) {
    return unary_op(a, [](double x) { return std::abs(x); },
                    [](double x, double) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); });
}

Var leaky_relu(const Var& a, double slope) {
    return unary_op(a, [slope](double x) { return x > 0 ? x : slope * x; },
                    [slope](double x, double) { return x > 0 ? 1.0 : slope; });
}

Var sigmoid(const Var& a) {
    return unary_op(a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
                    [](double, double y) { return y * (1.0 - y); });
}

Var clamp_min(const Var& a, double lo) {
    return unary_op(a, [lo](double x) { return x < lo ? lo : x; },
                    [lo](double x, double) { return x < lo ? 0.0 : 1.0; });
}

// ---- reductions ----

Var sum(const Var& a) {
    double s = 0.0;
    const long n = a.numel();
    for (long i = 0; i < n; ++i) s += a.value()[i];
    auto pa = a.node();
    return Var::from_node(make_node(Array({1}, s), {pa}, [pa](Node& self) {
        if (!pa->requires_grad) return;
        Array& g = pa->ensure_grad();
        const double gs = self.grad[0];
        const long n = g.numel();
        for (long i = 0; i < n; ++i) g[i] += gs;
    }));
}

Var mean(const Var& a) {
    return mul_scalar(sum(a), 1.0 / static_cast<double>(a.numel()));
}

Var reduce_sum_axis0(const Var& a) {
    if (a.value().rank() < 2) throw std::invalid_argument("reduce_sum_axis0: rank < 2");
    const int L = a.value().dim(0);
    std::vector<int> oshape(a.shape().begin() + 1, a.shape().end());
    Array out(oshape);
    const long m = out.numel();
    for (int l = 0; l < L; ++l) {
        const double* src = a.value().data() + static_cast<long>(l) * m;
        for (long i = 0; i < m; ++i) out[i] += src[i];
    }
    auto pa = a.node();
    return Var::from_node(make_node(std::move(out), {pa}, [pa, L, m](Node& self) {
        if (!pa->requires_grad) return;
        Array& g = pa->ensure_grad();
        for (int l = 0; l < L; ++l) {
            double* dst = g.data() + static_cast<long>(l) * m;
            for (long i = 0; i < m; ++i) dst[i] += self.grad[i];
        }
    }));
}

// ---- shape plumbing ----

Var reshape(const Var& a, std::vector<int> shape) {
    if (shape_numel(shape) != a.numel()) throw std::invalid_argument("reshape: numel mismatch");
    Array out(std::move(shape));
    const long n = a.numel();
    for (long i = 0; i < n; ++i) out[i] = a.value()[i];
    auto pa = a.node();
    return Var::from_node(make_node(std::move(out), {pa}, [pa](Node& self) {
        if (!pa->requires_grad) return;
        Array& g = pa->ensure_grad();
        const long n = g.numel();
        for (long i = 0; i < n; ++i) g[i] += self.grad[i];
    }));
}

Var concat0(const std::vector<Var>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat0: no inputs");
    std::vector<int> oshape = parts[0].shape();
    long trailing = 1;
    for (size_t i = 1; i < oshape.size(); ++i) trailing *= oshape[i];
    int total0 = 0;
    for (const auto& p : parts) {
        if (p.value().rank() != static_cast<int>(oshape.size()))
            throw std::invalid_argument("concat0: rank mismatch");
        for (size_t i = 1; i < oshape.size(); ++i)
            if (p.shape()[i] != oshape[i]) throw std::invalid_argument("concat0: trailing dims mismatch");
        total0 += p.shape()[0];
    }
    oshape[0] = total0;
    Array out(oshape);
    long off = 0;
    std::vector<NodePtr> parents;
    parents.reserve(parts.size());
    for (const auto& p : parts) {
        const long n = p.numel();
        for (long i = 0; i < n; ++i) out[off + i] = p.value()[i];
        off += n;
        parents.push_back(p.node());
    }
    auto ps = parents;
    return Var::from_node(make_node(std::move(out), std::move(parents), [ps](Node& self) {
        long off = 0;
        for (const auto& p : ps) {
            const long n = p->value.numel();
            if (p->requires_grad) {
                Array& g = p->ensure_grad();
                for (long i = 0; i < n; ++i) g[i] += self.grad[off + i];
            }
            off += n;
        }
    }));
}

Var take0(const Var& a, int index) {
    if (a.value().rank() < 2) throw std::invalid_argument("take0: rank < 2");
    if (index < 0 || index >= a.value().dim(0)) throw std::invalid_argument("take0: index out of range");
    std::vector<int> oshape(a.shape().begin() + 1, a.shape().end());
    Array out(oshape);
    const long m = out.numel();
    const double* src = a.value().data() + static_cast<long>(index) * m;
    for (long i = 0; i < m; ++i) out[i] = src[i];
    auto pa = a.node();
    return Var::from_node(make_node(std::move(out), {pa}, [pa, index, m](Node& self) {
        if (!pa->requires_grad) return;
        Array& g = pa->ensure_grad();
        double* dst = g.data() + static_cast<long>(index) * m;
        for (long i = 0; i < m; ++i) dst[i] += self.grad[i];
    }));
}

// ---- broadcast over the leading axis ----

Var scale_channels(const Var& x, const Var& w) {
    if (x.value().rank() < 2) throw std::invalid_argument("scale_channels: x rank < 2");
    const int L = x.value().dim(0);
    const long m = x.numel() / L;
    if (w.numel() != m) throw std::invalid_argument("scale_channels: weight size mismatch");
    Array out(x.shape());
    for (int l = 0; l < L; ++l) {
        const double* xs = x.value().data() + static_cast<long>(l) * m;
        double* os = out.data() + static_cast<long>(l) * m;
        for (long i = 0; i < m; ++i) os[i] = xs[i] * w.value()[i];
    }
    auto px = x.node(), pw = w.node();
    return Var::from_node(make_node(std::move(out), {px, pw}, [px, pw, L, m](Node& self) {
        if (px->requires_grad) {
            Array& g = px->ensure_grad();
            for (int l = 0; l < L; ++l) {
                double* gs = g.data() + static_cast<long>(l) * m;
                const double* ss = self.grad.data() + static_cast<long>(l) * m;
                for (long i = 0; i < m; ++i) gs[i] += ss[i] * pw->value[i];
            }
        }
        if (pw->requires_grad) {
            Array& g = pw->ensure_grad();
            for (int l = 0; l < L; ++l) {
                const double* xs = px->value.data() + static_cast<long>(l) * m;
                const double* ss = self.grad.data() + static_cast<long>(l) * m;
                for (long i = 0; i < m; ++i) g[i] += ss[i] * xs[i];
            }
        }
    }));
}

Var add_channel_bias(const Var& x, const Var& b) {
    if (x.value().rank() < 2) throw std::invalid_argument("add_channel_bias: x rank < 2");
    const int C = x.value().dim(0);
    if (b.numel() != C) throw std::invalid_argument("add_channel_bias: bias size mismatch");
    const long m = x.numel() / C;
    Array out(x.shape());
    for (int c = 0; c < C; ++c) {
        const double* xs = x.value().data() + static_cast<long>(c) * m;
        double* os = out.data() + static_cast<long>(c) * m;
        const double bv = b.value()[c];
        for (long i = 0; i < m; ++i) os[i] = xs[i] + bv;
    }
    auto px = x.node(), pb = b.node();
    return Var::from_node(make_node(std::move(out), {px, pb}, [px, pb, C, m](Node& self) {
        if (px->requires_grad) {
            Array& g = px->ensure_grad();
            const long n = g.numel();
            for (long i = 0; i < n; ++i) g[i] += self.grad[i];
        }
        if (pb->requires_grad) {
            Array& g = pb->ensure_grad();
            for (int c = 0; c < C; ++c) {
                const double* ss = self.grad.data() + static_cast<long>(c) * m;
                double acc = 0.0;
                for (long i = 0; i < m; ++i) acc += ss[i];
                g[c] += acc;
            }
        }
    }));
}

Var inner_product_channels(const Var& a, const Var& b) {
    check_same_shape(a, b, "inner_product_channels");
    if (a.value().rank() != 3) throw std::invalid_argument("inner_product_channels: expected [C,H,W]");
    const int C = a.value().dim(0), H = a.value().dim(1), W = a.value().dim(2);
    const long m = static_cast<long>(H) * W;
    Array out({H, W});
    for (int c = 0; c < C; ++c) {
        const double* as = a.value().data() + c * m;
        const double* bs = b.value().data() + c * m;
        for (long i = 0; i < m; ++i) out[i] += as[i] * bs[i];
    }
    auto pa = a.node(), pb = b.node();
    return Var::from_node(make_node(std::move(out), {pa, pb}, [pa, pb, C, m](Node& self) {
        if (pa->requires_grad) {
            Array& g = pa->ensure_grad();
            for (int c = 0; c < C; ++c) {
                double* gs = g.data() + c * m;
                const double* bs = pb->value.data() + c * m;
                for (long i = 0; i < m; ++i) gs[i] += self.grad[i] * bs[i];
            }
        }
        if (pb->requires_grad) {
            Array& g = pb->ensure_grad();
            for (int c = 0; c < C; ++c) {
                double* gs = g.data() + c * m;
                const double* as = pa->value.data() + c * m;
                for (long i = 0; i < m; ++i) gs[i] += self.grad[i] * as[i];
            }
        }
    }));
}

Var softmax_temperature(const Var& logits, double tau) {
    if (tau <= 0.0) throw std::invalid_argument("softmax_temperature: tau must be positive");
    if (logits.value().rank() < 1) throw std::invalid_argument("softmax_temperature: rank < 1");
    const int K = logits.value().dim(0);
    const long m = logits.numel() / K;
    Array out(logits.shape());
    for (long i = 0; i < m; ++i) {
        double mx = -1e300;
        for (int k = 0; k < K; ++k) mx = std::max(mx, logits.value()[k * m + i]);
        double z = 0.0;
        for (int k = 0; k < K; ++k) {
            const double e = std::exp((logits.value()[k * m + i] - mx) / tau);
            out[k * m + i] = e;
            z += e;
        }
        for (int k = 0; k < K; ++k) out[k * m + i] /= z;
    }
    auto pa = logits.node();
    return Var::from_node(make_node(std::move(out), {pa}, [pa, K, m, tau](Node& self) {
        if (!pa->requires_grad) return;
        Array& g = pa->ensure_grad();
        for (long i = 0; i < m; ++i) {
            double dot = 0.0;
            for (int k = 0; k < K; ++k) dot += self.grad[k * m + i] * self.value[k * m + i];
            for (int k = 0; k < K; ++k) {
                const double p = self.value[k * m + i];
                g[k * m + i] += p * (self.grad[k * m + i] - dot) / tau;
            }
        }
    }));
}

// ---- backward sweep ----

void backward(const Var& loss) {
    if (!loss.defined()) throw std::invalid_argument("backward: undefined loss");
    if (loss.numel() != 1) throw std::invalid_argument("backward: loss must be scalar");
    if (!loss.node()->requires_grad) return; // nothing depends on parameters

    // Collect reachable grad-requiring nodes; ids give a reverse topological order.
    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<Node*> stack{loss.node().get()};
    seen.insert(loss.node().get());
    while (!stack.empty()) {
        Node* n = stack.back();
        stack.pop_back();
        order.push_back(n);
        for (const auto& p : n->parents)
            if (p && p->requires_grad && seen.insert(p.get()).second) stack.push_back(p.get());
    }
    std::sort(order.begin(), order.end(), [](const Node* a, const Node* b) { return a->id > b->id; });

    // Intermediate grads are scratch for this sweep; only leaves accumulate
    // across calls.
    for (Node* n : order)
        if (n->backward_fn && !n->grad.empty()) n->grad.fill(0.0);

    loss.node()->ensure_grad()[0] += 1.0;
    for (Node* n : order) {
        if (!n->backward_fn) continue;
        if (n->grad.empty()) continue; // no downstream contribution
        n->backward_fn(*n);
    }
}

} // namespace cds
