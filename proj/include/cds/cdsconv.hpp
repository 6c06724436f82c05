#pragma once

#include <string>
#include <vector>

#include "cds/autodiff.hpp"
#include "cds/geometry.hpp"
#include "cds/model.hpp"
#include "cds/rng.hpp"

namespace cds {

/// Learnable: per-scale trainable second-derivative kernels (Eq.-5-style).
/// Original: frozen Gaussian derivatives on the channel mean with the full
/// first/second fundamental form ratio (the handcrafted-curvature ablation).
enum class CurvatureMode { Learnable, Original };

struct CdsConvSpec {
    int in_channels = 0;
    int out_channels = 0;
    std::vector<int> kernel_sizes; // candidate sizes, one per scale, odd
    int stride = 1;                // 1 or 2; all outputs share the stride
    CurvatureMode mode = CurvatureMode::Learnable;
};

struct CdsConvOutput {
    Var features; // [C_out, h, w]
    Var nc_est;   // [1, h, w] curvature blended with the selection weights
    Var weights;  // [K, h, w] per-pixel scale weights, sum to 1
};

/// Dynamic-scale convolution: estimates a normal curvature along the epipolar
/// direction at K candidate scales, classifies the proper scale per pixel,
/// and blends K candidate feature kernels with the resulting weights.
class CdsConvLayer {
public:
    CdsConvLayer() = default;
    CdsConvLayer(Model& model, const std::string& prefix, const CdsConvSpec& spec, Rng& rng);

    /// Curvature at one candidate scale; omega is sampled at the layer's
    /// output resolution. Differentiable w.r.t. features (and kernels in
    /// Learnable mode).
    Var curvature(const Var& f_in, const EpipolarField& omega, int scale_idx) const;

    /// Per-pixel scale weights from the stack of K curvature maps.
    Var select_scale(const Var& curvs, double tau) const;

    CdsConvOutput forward(const Var& f_in, const EpipolarField& omega, double tau) const;

    const CdsConvSpec& spec() const { return spec_; }
    int num_scales() const { return static_cast<int>(spec_.kernel_sizes.size()); }
    static double sigma_for_size(int k) { return k / 6.0; }

    // Learnable-mode curvature kernels, one triple per scale, shape [1,C,k,k].
    std::vector<Var> kxx, kxy, kyy;
    // Candidate feature kernels, shape [C_out,C,k,k].
    std::vector<Var> feat;
    // Scale classifier: conv3x3(K->8) + leaky ReLU + conv3x3(8->K).
    Var sel_w1, sel_b1, sel_w2, sel_b2;

private:
    CdsConvSpec spec_;
    // Original-mode frozen Gaussian derivative kernels per scale, [1,1,k,k].
    std::vector<Array> gdx_, gdy_, gdxx_, gdxy_, gdyy_;
    Array mean_kernel_; // [1,C,1,1] channel averaging
};

/// u*u, 2*u*v, v*v maps of a direction field, each [1,H,W]; shared by the
/// curvature paths.
struct OmegaQuadratics {
    Array uu, uv2, vv;
};
OmegaQuadratics omega_quadratics(const EpipolarField& omega);

} // namespace cds
