#include "cds/cdsconv.hpp"

#include <cmath>
#include <stdexcept>

#include "cds/scalespace.hpp"
#include "init_util.hpp"

namespace cds {

namespace {

Array uniform_kernel(std::vector<int> shape, double bound, Rng& rng) {
    Array a(std::move(shape));
    for (long i = 0; i < a.numel(); ++i) a[i] = rng.uniform(-bound, bound);
    return a;
}

} // namespace

OmegaQuadratics omega_quadratics(const EpipolarField& omega) {
    const int H = omega.omega.dim(1), W = omega.omega.dim(2);
    const long m = static_cast<long>(H) * W;
    OmegaQuadratics q;
    q.uu = Array({1, H, W});
    q.uv2 = Array({1, H, W});
    q.vv = Array({1, H, W});
    for (long i = 0; i < m; ++i) {
        const double u = omega.omega[i], v = omega.omega[m + i];
        q.uu[i] = u * u;
        q.uv2[i] = 2.0 * u * v;
        q.vv[i] = v * v;
    }
    return q;
}

CdsConvLayer::CdsConvLayer(Model& model, const std::string& prefix, const CdsConvSpec& spec, Rng& rng)
    : spec_(spec) {
    const int K = num_scales();
    if (K < 1 || K > 4) throw std::invalid_argument("CdsConvLayer: 1..4 candidate scales");
    const int C = spec_.in_channels;

    for (int s = 0; s < K; ++s) {
        const int k = spec_.kernel_sizes[static_cast<size_t>(s)];
        const double sigma = sigma_for_size(k);
        const std::string base = prefix + ".s" + std::to_string(k);
        if (spec_.mode == CurvatureMode::Learnable) {
            // Gaussian second-derivative prior scaled toward zero, averaged
            // over input channels.
            auto init_from = [&](int dx, int dy) {
                const Array g = gaussian_derivative_kernel(dx, dy, sigma, k);
                Array w({1, C, k, k});
                for (int c = 0; c < C; ++c)
                    for (long i = 0; i < g.numel(); ++i)
                        w[static_cast<long>(c) * g.numel() + i] = 0.01 * g[i] / C;
                return w;
            };
            kxx.push_back(model.add(base + ".kxx", init_from(2, 0)));
            kxy.push_back(model.add(base + ".kxy", init_from(1, 1)));
            kyy.push_back(model.add(base + ".kyy", init_from(0, 2)));
        } else {
            auto fixed = [&](int dx, int dy) {
                const Array g = gaussian_derivative_kernel(dx, dy, sigma, k);
                Array w({1, 1, k, k});
                for (long i = 0; i < g.numel(); ++i) w[i] = g[i];
                return w;
            };
            gdx_.push_back(fixed(1, 0));
            gdy_.push_back(fixed(0, 1));
            gdxx_.push_back(fixed(2, 0));
            gdxy_.push_back(fixed(1, 1));
            gdyy_.push_back(fixed(0, 2));
        }
        // sqrt(K) gain: the K-way soft blend averages candidate outputs and
        // would otherwise shrink activation variance by 1/K per layer.
        Array fk({spec_.out_channels, C, k, k});
        const double bound = detail::he_bound(static_cast<long>(C) * k * k) * std::sqrt(static_cast<double>(K));
        for (long i = 0; i < fk.numel(); ++i) fk[i] = rng.uniform(-bound, bound);
        feat.push_back(model.add(base + ".feat", std::move(fk)));
    }

    if (spec_.mode == CurvatureMode::Original) {
        mean_kernel_ = Array({1, C, 1, 1}, 1.0 / C);
    }

    if (K > 1) {
        sel_w1 = model.add(prefix + ".sel.w1", uniform_kernel({8, K, 3, 3}, 1.0 / std::sqrt(9.0 * K), rng));
        sel_b1 = model.add(prefix + ".sel.b1", Array({8}));
        sel_w2 = model.add(prefix + ".sel.w2", uniform_kernel({K, 8, 3, 3}, 0.1 / std::sqrt(72.0), rng));
        sel_b2 = model.add(prefix + ".sel.b2", Array({K}));
    }
}

Var CdsConvLayer::curvature(const Var& f_in, const EpipolarField& omega, int scale_idx) const {
    const OmegaQuadratics q = omega_quadratics(omega);
    const int s = scale_idx;

    if (spec_.mode == CurvatureMode::Learnable) {
        Var rxx = conv2d(f_in, kxx[static_cast<size_t>(s)], spec_.stride, PaddingMode::Reflect);
        Var rxy = conv2d(f_in, kxy[static_cast<size_t>(s)], spec_.stride, PaddingMode::Reflect);
        Var ryy = conv2d(f_in, kyy[static_cast<size_t>(s)], spec_.stride, PaddingMode::Reflect);
        return add(add(mul(rxx, constant(q.uu)), mul(rxy, constant(q.uv2))), mul(ryy, constant(q.vv)));
    }

    // Original handcrafted form: channel mean, frozen Gaussian derivatives,
    // full fundamental-form denominator.
    Var cm = conv2d(f_in, constant(mean_kernel_), 1, PaddingMode::Reflect);
    Var ix = conv2d(cm, constant(gdx_[static_cast<size_t>(s)]), spec_.stride, PaddingMode::Reflect);
    Var iy = conv2d(cm, constant(gdy_[static_cast<size_t>(s)]), spec_.stride, PaddingMode::Reflect);
    Var ixx = conv2d(cm, constant(gdxx_[static_cast<size_t>(s)]), spec_.stride, PaddingMode::Reflect);
    Var ixy = conv2d(cm, constant(gdxy_[static_cast<size_t>(s)]), spec_.stride, PaddingMode::Reflect);
    Var iyy = conv2d(cm, constant(gdyy_[static_cast<size_t>(s)]), spec_.stride, PaddingMode::Reflect);

    const long mo = ix.numel();
    Array u({1, ix.value().dim(1), ix.value().dim(2)});
    Array v(u.shape());
    for (long i = 0; i < mo; ++i) {
        u[i] = omega.omega[i];
        v[i] = omega.omega[mo + i];
    }
    Var num = add(add(mul(ixx, constant(q.uu)), mul(ixy, constant(q.uv2))), mul(iyy, constant(q.vv)));
    Var dir = add(mul(ix, constant(u)), mul(iy, constant(v)));
    Var den = mul(sqrt(add_scalar(add(square(ix), square(iy)), 1.0)), add_scalar(square(dir), 1.0));
    return div(num, den);
}

Var CdsConvLayer::select_scale(const Var& curvs, double tau) const {
    const int K = num_scales();
    if (K == 1) return constant(Array(curvs.shape(), 1.0));
    Var h = leaky_relu(add_channel_bias(conv2d(curvs, sel_w1, 1, PaddingMode::Reflect), sel_b1));
    Var logits = add_channel_bias(conv2d(h, sel_w2, 1, PaddingMode::Reflect), sel_b2);
    return softmax_temperature(logits, tau);
}

CdsConvOutput CdsConvLayer::forward(const Var& f_in, const EpipolarField& omega, double tau) const {
    const int K = num_scales();
    std::vector<Var> curvs;
    curvs.reserve(static_cast<size_t>(K));
    for (int s = 0; s < K; ++s) curvs.push_back(curvature(f_in, omega, s));

    CdsConvOutput out;
    out.weights = select_scale(K == 1 ? curvs[0] : concat0(curvs), tau);

    for (int s = 0; s < K; ++s) {
        Var w_s = take0(out.weights, s);
        Var f_s = conv2d(f_in, feat[static_cast<size_t>(s)], spec_.stride, PaddingMode::Reflect);
        Var fw = K == 1 ? f_s : scale_channels(f_s, w_s);
        Var cw = K == 1 ? curvs[0] : scale_channels(curvs[static_cast<size_t>(s)], w_s);
        out.features = s == 0 ? fw : add(out.features, fw);
        out.nc_est = s == 0 ? cw : add(out.nc_est, cw);
    }
    return out;
}

} // namespace cds
