#include <cmath>
#include <stdexcept>
#include <vector>

#include "cds/autodiff.hpp"
#include "node_factory.hpp"

namespace cds {

using detail::make_node;

namespace {

int reflect_index(int i, int n) {
    if (n == 1) return 0;
    while (i < 0 || i >= n) {
        if (i < 0) i = -i;
        if (i >= n) i = 2 * n - 2 - i;
    }
    return i;
}

// Index map for "same" padding; -1 marks zero-padded cells.
std::vector<int> pad_map(int n, int pad, PaddingMode mode) {
    std::vector<int> map(static_cast<size_t>(n + 2 * pad));
    for (int i = 0; i < n + 2 * pad; ++i) {
        const int src = i - pad;
        if (src >= 0 && src < n)
            map[static_cast<size_t>(i)] = src;
        else
            map[static_cast<size_t>(i)] = mode == PaddingMode::Reflect ? reflect_index(src, n) : -1;
    }
    return map;
}

void fill_padded_plane(const double* src, double* dst, int W, int Wp, const std::vector<int>& my,
                       const std::vector<int>& mx) {
    const int Hp = static_cast<int>(my.size());
    for (int y = 0; y < Hp; ++y) {
        const int sy = my[static_cast<size_t>(y)];
        double* row = dst + static_cast<long>(y) * Wp;
        if (sy < 0) {
            for (int x = 0; x < Wp; ++x) row[x] = 0.0;
            continue;
        }
        const double* srow = src + static_cast<long>(sy) * W;
        for (int x = 0; x < Wp; ++x) {
            const int sx = mx[static_cast<size_t>(x)];
            row[x] = sx < 0 ? 0.0 : srow[sx];
        }
    }
}

} // namespace

Var conv2d(const Var& input, const Var& kernel, int stride, PaddingMode pad_mode) {
    const Array& in = input.value();
    const Array& kr = kernel.value();
    if (in.rank() != 3) throw std::invalid_argument("conv2d: input must be [C,H,W]");
    if (kr.rank() != 4) throw std::invalid_argument("conv2d: kernel must be [Co,Ci,k,k]");
    const int Ci = in.dim(0), H = in.dim(1), W = in.dim(2);
    const int Co = kr.dim(0), k = kr.dim(2);
    if (kr.dim(1) != Ci)
        throw std::invalid_argument("conv2d: kernel expects " + std::to_string(kr.dim(1)) +
                                    " input channels, got " + std::to_string(Ci));
    if (kr.dim(3) != k || k % 2 == 0) throw std::invalid_argument("conv2d: kernel must be odd square");
    if (stride < 1) throw std::invalid_argument("conv2d: stride must be >= 1");
    const int pad = (k - 1) / 2;
    const int Ho = (H + 2 * pad - k) / stride + 1;
    const int Wo = (W + 2 * pad - k) / stride + 1;
    const int Hp = H + 2 * pad, Wp = W + 2 * pad;

    const auto my = pad_map(H, pad, pad_mode);
    const auto mx = pad_map(W, pad, pad_mode);
    std::vector<double> padded(static_cast<size_t>(Ci) * Hp * Wp);
    for (int ci = 0; ci < Ci; ++ci)
        fill_padded_plane(in.data() + static_cast<long>(ci) * H * W,
                          padded.data() + static_cast<long>(ci) * Hp * Wp, W, Wp, my, mx);

    Array out({Co, Ho, Wo});
    for (int co = 0; co < Co; ++co) {
        double* oplane = out.data() + static_cast<long>(co) * Ho * Wo;
        for (int ci = 0; ci < Ci; ++ci) {
            const double* pplane = padded.data() + static_cast<long>(ci) * Hp * Wp;
            const double* kplane = kr.data() + (static_cast<long>(co) * Ci + ci) * k * k;
            for (int ky = 0; ky < k; ++ky) {
                for (int kx = 0; kx < k; ++kx) {
                    const double w = kplane[ky * k + kx];
                    if (w == 0.0) continue;
                    for (int oy = 0; oy < Ho; ++oy) {
                        const double* prow = pplane + static_cast<long>(oy * stride + ky) * Wp + kx;
                        double* orow = oplane + static_cast<long>(oy) * Wo;
                        if (stride == 1) {
                            for (int ox = 0; ox < Wo; ++ox) orow[ox] += w * prow[ox];
                        } else {
                            for (int ox = 0; ox < Wo; ++ox) orow[ox] += w * prow[ox * stride];
                        }
                    }
                }
            }
        }
    }

    auto pin = input.node(), pker = kernel.node();
    auto bw = [pin, pker, stride, pad_mode, Ci, H, W, Co, k, Ho, Wo](Node& self) {
        const int pad = (k - 1) / 2;
        const int Hp = H + 2 * pad, Wp = W + 2 * pad;
        const auto my = pad_map(H, pad, pad_mode);
        const auto mx = pad_map(W, pad, pad_mode);
        std::vector<double> padded(static_cast<size_t>(Ci) * Hp * Wp);
        for (int ci = 0; ci < Ci; ++ci)
            fill_padded_plane(pin->value.data() + static_cast<long>(ci) * H * W,
                              padded.data() + static_cast<long>(ci) * Hp * Wp, W, Wp, my, mx);

        if (pker->requires_grad) {
            Array& gk = pker->ensure_grad();
            for (int co = 0; co < Co; ++co) {
                const double* gplane = self.grad.data() + static_cast<long>(co) * Ho * Wo;
                for (int ci = 0; ci < Ci; ++ci) {
                    const double* pplane = padded.data() + static_cast<long>(ci) * Hp * Wp;
                    double* gkp = gk.data() + (static_cast<long>(co) * Ci + ci) * k * k;
                    for (int ky = 0; ky < k; ++ky) {
                        for (int kx = 0; kx < k; ++kx) {
                            double acc = 0.0;
                            for (int oy = 0; oy < Ho; ++oy) {
                                const double* prow = pplane + static_cast<long>(oy * stride + ky) * Wp + kx;
                                const double* grow = gplane + static_cast<long>(oy) * Wo;
                                if (stride == 1) {
                                    for (int ox = 0; ox < Wo; ++ox) acc += grow[ox] * prow[ox];
                                } else {
                                    for (int ox = 0; ox < Wo; ++ox) acc += grow[ox] * prow[ox * stride];
                                }
                            }
                            gkp[ky * k + kx] += acc;
                        }
                    }
                }
            }
        }

        if (pin->requires_grad) {
            std::vector<double> gpad(static_cast<size_t>(Ci) * Hp * Wp, 0.0);
            const double* kd = pker->value.data();
            for (int co = 0; co < Co; ++co) {
                const double* gplane = self.grad.data() + static_cast<long>(co) * Ho * Wo;
                for (int ci = 0; ci < Ci; ++ci) {
                    double* gpp = gpad.data() + static_cast<long>(ci) * Hp * Wp;
                    const double* kplane = kd + (static_cast<long>(co) * Ci + ci) * k * k;
                    for (int ky = 0; ky < k; ++ky) {
                        for (int kx = 0; kx < k; ++kx) {
                            const double w = kplane[ky * k + kx];
                            if (w == 0.0) continue;
                            for (int oy = 0; oy < Ho; ++oy) {
                                double* prow = gpp + static_cast<long>(oy * stride + ky) * Wp + kx;
                                const double* grow = gplane + static_cast<long>(oy) * Wo;
                                if (stride == 1) {
                                    for (int ox = 0; ox < Wo; ++ox) prow[ox] += w * grow[ox];
                                } else {
                                    for (int ox = 0; ox < Wo; ++ox) prow[ox * stride] += w * grow[ox];
                                }
                            }
                        }
                    }
                }
            }
            Array& gi = pin->ensure_grad();
            for (int ci = 0; ci < Ci; ++ci) {
                const double* gpp = gpad.data() + static_cast<long>(ci) * Hp * Wp;
                double* gip = gi.data() + static_cast<long>(ci) * H * W;
                for (int y = 0; y < Hp; ++y) {
                    const int sy = my[static_cast<size_t>(y)];
                    if (sy < 0) continue;
                    for (int x = 0; x < Wp; ++x) {
                        const int sx = mx[static_cast<size_t>(x)];
                        if (sx < 0) continue;
                        gip[static_cast<long>(sy) * W + sx] += gpp[static_cast<long>(y) * Wp + x];
                    }
                }
            }
        }
    };
    return Var::from_node(make_node(std::move(out), {pin, pker}, std::move(bw)));
}

Var conv3d(const Var& input, const Var& kernel, PaddingMode pad_mode) {
    const Array& in = input.value();
    const Array& kr = kernel.value();
    if (in.rank() != 4) throw std::invalid_argument("conv3d: input must be [C,D,H,W]");
    if (kr.rank() != 5) throw std::invalid_argument("conv3d: kernel must be [Co,Ci,k,k,k]");
    const int Ci = in.dim(0), D = in.dim(1), H = in.dim(2), W = in.dim(3);
    const int Co = kr.dim(0), k = kr.dim(2);
    if (kr.dim(1) != Ci) throw std::invalid_argument("conv3d: channel mismatch");
    if (kr.dim(3) != k || kr.dim(4) != k || k % 2 == 0)
        throw std::invalid_argument("conv3d: kernel must be odd cube");
    const int pad = (k - 1) / 2;
    const int Dp = D + 2 * pad, Hp = H + 2 * pad, Wp = W + 2 * pad;

    const auto md = pad_map(D, pad, pad_mode);
    const auto my = pad_map(H, pad, pad_mode);
    const auto mx = pad_map(W, pad, pad_mode);

    auto build_padded = [&](const double* src, double* dst) {
        for (int z = 0; z < Dp; ++z) {
            const int sz = md[static_cast<size_t>(z)];
            double* dplane = dst + static_cast<long>(z) * Hp * Wp;
            if (sz < 0) {
                for (long i = 0; i < static_cast<long>(Hp) * Wp; ++i) dplane[i] = 0.0;
                continue;
            }
            fill_padded_plane(src + static_cast<long>(sz) * H * W, dplane, W, Wp, my, mx);
        }
    };

    std::vector<double> padded(static_cast<size_t>(Ci) * Dp * Hp * Wp);
    for (int ci = 0; ci < Ci; ++ci)
        build_padded(in.data() + static_cast<long>(ci) * D * H * W,
                     padded.data() + static_cast<long>(ci) * Dp * Hp * Wp);

    Array out({Co, D, H, W});
    for (int co = 0; co < Co; ++co) {
        double* ovol = out.data() + static_cast<long>(co) * D * H * W;
        for (int ci = 0; ci < Ci; ++ci) {
            const double* pvol = padded.data() + static_cast<long>(ci) * Dp * Hp * Wp;
            const double* kvol = kr.data() + (static_cast<long>(co) * Ci + ci) * k * k * k;
            for (int kz = 0; kz < k; ++kz)
                for (int ky = 0; ky < k; ++ky)
                    for (int kx = 0; kx < k; ++kx) {
                        const double w = kvol[(kz * k + ky) * k + kx];
                        if (w == 0.0) continue;
                        for (int z = 0; z < D; ++z) {
                            const double* pplane = pvol + (static_cast<long>(z + kz) * Hp + ky) * Wp + kx;
                            double* oplane = ovol + static_cast<long>(z) * H * W;
                            for (int y = 0; y < H; ++y) {
                                const double* prow = pplane + static_cast<long>(y) * Wp;
                                double* orow = oplane + static_cast<long>(y) * W;
                                for (int x = 0; x < W; ++x) orow[x] += w * prow[x];
                            }
                        }
                    }
        }
    }

    auto pin = input.node(), pker = kernel.node();
    auto bw = [pin, pker, pad_mode, Ci, D, H, W, Co, k](Node& self) {
        const int pad = (k - 1) / 2;
        const int Dp = D + 2 * pad, Hp = H + 2 * pad, Wp = W + 2 * pad;
        const auto md = pad_map(D, pad, pad_mode);
        const auto my = pad_map(H, pad, pad_mode);
        const auto mx = pad_map(W, pad, pad_mode);
        std::vector<double> padded(static_cast<size_t>(Ci) * Dp * Hp * Wp);
        for (int ci = 0; ci < Ci; ++ci) {
            const double* src = pin->value.data() + static_cast<long>(ci) * D * H * W;
            double* dst = padded.data() + static_cast<long>(ci) * Dp * Hp * Wp;
            for (int z = 0; z < Dp; ++z) {
                const int sz = md[static_cast<size_t>(z)];
                double* dplane = dst + static_cast<long>(z) * Hp * Wp;
                if (sz < 0) {
                    for (long i = 0; i < static_cast<long>(Hp) * Wp; ++i) dplane[i] = 0.0;
                    continue;
                }
                fill_padded_plane(src + static_cast<long>(sz) * H * W, dplane, W, Wp, my, mx);
            }
        }

        if (pker->requires_grad) {
            Array& gk = pker->ensure_grad();
            for (int co = 0; co < Co; ++co) {
                const double* gvol = self.grad.data() + static_cast<long>(co) * D * H * W;
                for (int ci = 0; ci < Ci; ++ci) {
                    const double* pvol = padded.data() + static_cast<long>(ci) * Dp * Hp * Wp;
                    double* gkv = gk.data() + (static_cast<long>(co) * Ci + ci) * k * k * k;
                    for (int kz = 0; kz < k; ++kz)
                        for (int ky = 0; ky < k; ++ky)
                            for (int kx = 0; kx < k; ++kx) {
                                double acc = 0.0;
                                for (int z = 0; z < D; ++z) {
                                    const double* pplane =
                                        pvol + (static_cast<long>(z + kz) * Hp + ky) * Wp + kx;
                                    const double* gplane = gvol + static_cast<long>(z) * H * W;
                                    for (int y = 0; y < H; ++y) {
                                        const double* prow = pplane + static_cast<long>(y) * Wp;
                                        const double* grow = gplane + static_cast<long>(y) * W;
                                        for (int x = 0; x < W; ++x) acc += grow[x] * prow[x];
                                    }
                                }
                                gkv[(kz * k + ky) * k + kx] += acc;
                            }
                }
            }
        }

        if (pin->requires_grad) {
            std::vector<double> gpad(static_cast<size_t>(Ci) * Dp * Hp * Wp, 0.0);
            const double* kd = pker->value.data();
            for (int co = 0; co < Co; ++co) {
                const double* gvol = self.grad.data() + static_cast<long>(co) * D * H * W;
                for (int ci = 0; ci < Ci; ++ci) {
                    double* gpv = gpad.data() + static_cast<long>(ci) * Dp * Hp * Wp;
                    const double* kvol = kd + (static_cast<long>(co) * Ci + ci) * k * k * k;
                    for (int kz = 0; kz < k; ++kz)
                        for (int ky = 0; ky < k; ++ky)
                            for (int kx = 0; kx < k; ++kx) {
                                const double w = kvol[(kz * k + ky) * k + kx];
                                if (w == 0.0) continue;
                                for (int z = 0; z < D; ++z) {
                                    double* pplane = gpv + (static_cast<long>(z + kz) * Hp + ky) * Wp + kx;
                                    const double* gplane = gvol + static_cast<long>(z) * H * W;
                                    for (int y = 0; y < H; ++y) {
                                        double* prow = pplane + static_cast<long>(y) * Wp;
                                        const double* grow = gplane + static_cast<long>(y) * W;
                                        for (int x = 0; x < W; ++x) prow[x] += w * grow[x];
                                    }
                                }
                            }
                }
            }
            Array& gi = pin->ensure_grad();
            for (int ci = 0; ci < Ci; ++ci) {
                const double* gpv = gpad.data() + static_cast<long>(ci) * Dp * Hp * Wp;
                double* giv = gi.data() + static_cast<long>(ci) * D * H * W;
                for (int z = 0; z < Dp; ++z) {
                    const int sz = md[static_cast<size_t>(z)];
                    if (sz < 0) continue;
                    for (int y = 0; y < Hp; ++y) {
                        const int sy = my[static_cast<size_t>(y)];
                        if (sy < 0) continue;
                        for (int x = 0; x < Wp; ++x) {
                            const int sx = mx[static_cast<size_t>(x)];
                            if (sx < 0) continue;
                            giv[(static_cast<long>(sz) * H + sy) * W + sx] +=
                                gpv[(static_cast<long>(z) * Hp + y) * Wp + x];
                        }
                    }
                }
            }
        }
    };
    return Var::from_node(make_node(std::move(out), {pin, pker}, std::move(bw)));
}

Var grid_sample_bilinear(const Var& input, const Var& coords) {
    const Array& in = input.value();
    const Array& co = coords.value();
    if (in.rank() != 3) throw std::invalid_argument("grid_sample: input must be [C,H,W]");
    if (co.rank() != 3 || co.dim(0) != 2) throw std::invalid_argument("grid_sample: coords must be [2,H,W]");
    const int C = in.dim(0), H = in.dim(1), W = in.dim(2);
    const int Ho = co.dim(1), Wo = co.dim(2);
    const long m = static_cast<long>(Ho) * Wo;
    const long hw = static_cast<long>(H) * W;

    Array out({C, Ho, Wo});
    for (long i = 0; i < m; ++i) {
        const double x = co[i];
        const double y = co[m + i];
        if (!(x > -1.0 - W && x < 2.0 * W) || !(y > -1.0 - H && y < 2.0 * H)) continue; // far outside
        const int x0 = static_cast<int>(std::floor(x));
        const int y0 = static_cast<int>(std::floor(y));
        const double fx = x - x0, fy = y - y0;
        const bool in00 = x0 >= 0 && x0 < W && y0 >= 0 && y0 < H;
        const bool in10 = x0 + 1 >= 0 && x0 + 1 < W && y0 >= 0 && y0 < H;
        const bool in01 = x0 >= 0 && x0 < W && y0 + 1 >= 0 && y0 + 1 < H;
        const bool in11 = x0 + 1 >= 0 && x0 + 1 < W && y0 + 1 >= 0 && y0 + 1 < H;
        const double w00 = (1 - fx) * (1 - fy), w10 = fx * (1 - fy), w01 = (1 - fx) * fy, w11 = fx * fy;
        for (int c = 0; c < C; ++c) {
            const double* plane = in.data() + c * hw;
            double v = 0.0;
            if (in00) v += w00 * plane[static_cast<long>(y0) * W + x0];
            if (in10) v += w10 * plane[static_cast<long>(y0) * W + x0 + 1];
            if (in01) v += w01 * plane[static_cast<long>(y0 + 1) * W + x0];
            if (in11) v += w11 * plane[static_cast<long>(y0 + 1) * W + x0 + 1];
            out[c * m + i] = v;
        }
    }

    auto pin = input.node(), pco = coords.node();
    auto bw = [pin, pco, C, H, W, m, hw](Node& self) {
        const bool need_in = pin->requires_grad;
        const bool need_co = pco->requires_grad;
        Array* gi = need_in ? &pin->ensure_grad() : nullptr;
        Array* gc = need_co ? &pco->ensure_grad() : nullptr;
        for (long i = 0; i < m; ++i) {
            const double x = pco->value[i];
            const double y = pco->value[m + i];
            if (!(x > -1.0 - W && x < 2.0 * W) || !(y > -1.0 - H && y < 2.0 * H)) continue;
            const int x0 = static_cast<int>(std::floor(x));
            const int y0 = static_cast<int>(std::floor(y));
            const double fx = x - x0, fy = y - y0;
            const bool in00 = x0 >= 0 && x0 < W && y0 >= 0 && y0 < H;
            const bool in10 = x0 + 1 >= 0 && x0 + 1 < W && y0 >= 0 && y0 < H;
            const bool in01 = x0 >= 0 && x0 < W && y0 + 1 >= 0 && y0 + 1 < H;
            const bool in11 = x0 + 1 >= 0 && x0 + 1 < W && y0 + 1 >= 0 && y0 + 1 < H;
            const double w00 = (1 - fx) * (1 - fy), w10 = fx * (1 - fy), w01 = (1 - fx) * fy, w11 = fx * fy;
            double gx = 0.0, gy = 0.0;
            for (int c = 0; c < C; ++c) {
                const double g = self.grad[c * m + i];
                if (g == 0.0) continue;
                const double* plane = pin->value.data() + c * hw;
                double v00 = 0, v10 = 0, v01 = 0, v11 = 0;
                if (in00) v00 = plane[static_cast<long>(y0) * W + x0];
                if (in10) v10 = plane[static_cast<long>(y0) * W + x0 + 1];
                if (in01) v01 = plane[static_cast<long>(y0 + 1) * W + x0];
                if (in11) v11 = plane[static_cast<long>(y0 + 1) * W + x0 + 1];
                if (need_in) {
                    double* gplane = gi->data() + c * hw;
                    if (in00) gplane[static_cast<long>(y0) * W + x0] += g * w00;
                    if (in10) gplane[static_cast<long>(y0) * W + x0 + 1] += g * w10;
                    if (in01) gplane[static_cast<long>(y0 + 1) * W + x0] += g * w01;
                    if (in11) gplane[static_cast<long>(y0 + 1) * W + x0 + 1] += g * w11;
                }
                if (need_co) {
                    gx += g * ((v10 - v00) * (1 - fy) + (v11 - v01) * fy);
                    gy += g * ((v01 - v00) * (1 - fx) + (v11 - v10) * fx);
                }
            }
            if (need_co) {
                (*gc)[i] += gx;
                (*gc)[m + i] += gy;
            }
        }
    };
    return Var::from_node(make_node(std::move(out), {pin, pco}, std::move(bw)));
}

Array grid_sample_valid_mask(const Array& coords, int H, int W) {
    if (coords.rank() != 3 || coords.dim(0) != 2)
        throw std::invalid_argument("grid_sample_valid_mask: coords must be [2,H,W]");
    const int Ho = coords.dim(1), Wo = coords.dim(2);
    const long m = static_cast<long>(Ho) * Wo;
    Array mask({Ho, Wo});
    for (long i = 0; i < m; ++i) {
        const double x = coords[i], y = coords[m + i];
        mask[i] = (x >= 0.0 && x <= W - 1.0 && y >= 0.0 && y <= H - 1.0) ? 1.0 : 0.0;
    }
    return mask;
}

Var upsample_bilinear2(const Var& a) {
    const Array& in = a.value();
    if (in.rank() != 3) throw std::invalid_argument("upsample_bilinear2: input must be [C,H,W]");
    const int C = in.dim(0), H = in.dim(1), W = in.dim(2);
    const int H2 = H * 2, W2 = W * 2;

    // Precompute source taps (clamped) and fractions per output row/col.
    std::vector<int> y0(static_cast<size_t>(H2)), y1(static_cast<size_t>(H2));
    std::vector<double> fy(static_cast<size_t>(H2));
    for (int y = 0; y < H2; ++y) {
        const double sy = (y + 0.5) * 0.5 - 0.5;
        const int b = static_cast<int>(std::floor(sy));
        fy[static_cast<size_t>(y)] = sy - b;
        y0[static_cast<size_t>(y)] = std::min(std::max(b, 0), H - 1);
        y1[static_cast<size_t>(y)] = std::min(std::max(b + 1, 0), H - 1);
    }
    std::vector<int> x0(static_cast<size_t>(W2)), x1(static_cast<size_t>(W2));
    std::vector<double> fx(static_cast<size_t>(W2));
    for (int x = 0; x < W2; ++x) {
        const double sx = (x + 0.5) * 0.5 - 0.5;
        const int b = static_cast<int>(std::floor(sx));
        fx[static_cast<size_t>(x)] = sx - b;
        x0[static_cast<size_t>(x)] = std::min(std::max(b, 0), W - 1);
        x1[static_cast<size_t>(x)] = std::min(std::max(b + 1, 0), W - 1);
    }

    Array out({C, H2, W2});
    for (int c = 0; c < C; ++c) {
        const double* src = in.data() + static_cast<long>(c) * H * W;
        double* dst = out.data() + static_cast<long>(c) * H2 * W2;
        for (int y = 0; y < H2; ++y) {
            const double* r0 = src + static_cast<long>(y0[y]) * W;
            const double* r1 = src + static_cast<long>(y1[y]) * W;
            const double gy = fy[static_cast<size_t>(y)];
            double* drow = dst + static_cast<long>(y) * W2;
            for (int x = 0; x < W2; ++x) {
                const double gx = fx[static_cast<size_t>(x)];
                drow[x] = (1 - gy) * ((1 - gx) * r0[x0[x]] + gx * r0[x1[x]]) +
                          gy * ((1 - gx) * r1[x0[x]] + gx * r1[x1[x]]);
            }
        }
    }

    auto pa = a.node();
    auto bw = [pa, C, H, W, H2, W2, y0, y1, fy, x0, x1, fx](Node& self) {
        if (!pa->requires_grad) return;
        Array& gi = pa->ensure_grad();
        for (int c = 0; c < C; ++c) {
            double* gsrc = gi.data() + static_cast<long>(c) * H * W;
            const double* gdst = self.grad.data() + static_cast<long>(c) * H2 * W2;
            for (int y = 0; y < H2; ++y) {
                const double gy = fy[static_cast<size_t>(y)];
                double* r0 = gsrc + static_cast<long>(y0[y]) * W;
                double* r1 = gsrc + static_cast<long>(y1[y]) * W;
                const double* grow = gdst + static_cast<long>(y) * W2;
                for (int x = 0; x < W2; ++x) {
                    const double g = grow[x];
                    if (g == 0.0) continue;
                    const double gx = fx[static_cast<size_t>(x)];
                    r0[x0[x]] += g * (1 - gy) * (1 - gx);
                    r0[x1[x]] += g * (1 - gy) * gx;
                    r1[x0[x]] += g * gy * (1 - gx);
                    r1[x1[x]] += g * gy * gx;
                }
            }
        }
    };
    return Var::from_node(make_node(std::move(out), {pa}, std::move(bw)));
}

} // namespace cds
