#include "cds/scalespace.hpp"

#include <cmath>
#include <stdexcept>

namespace cds {

namespace {

int reflect_index(int i, int n) {
    if (n == 1) return 0;
    while (i < 0 || i >= n) {
        if (i < 0) i = -i;
        if (i >= n) i = 2 * n - 2 - i;
    }
    return i;
}

} // namespace

Array gaussian_derivative_kernel(int dx, int dy, double sigma, int ksize) {
    if (sigma <= 0.0) throw std::invalid_argument("gaussian kernel: sigma must be positive");
    if (ksize % 2 == 0 || ksize < 1) throw std::invalid_argument("gaussian kernel: ksize must be odd");
    if (dx + dy > 2 || dx < 0 || dy < 0) throw std::invalid_argument("gaussian kernel: order <= 2 only");
    const int r = ksize / 2;
    const double s2 = sigma * sigma;
    Array k({ksize, ksize});
    for (int y = -r; y <= r; ++y)
        for (int x = -r; x <= r; ++x) {
            const double g = std::exp(-(x * x + y * y) / (2.0 * s2)) / (2.0 * M_PI * s2);
            double factor = 1.0;
            if (dx == 1) factor *= -x / s2;
            if (dx == 2) factor *= (x * x / (s2 * s2) - 1.0 / s2);
            if (dy == 1) factor *= -y / s2;
            if (dy == 2) factor *= (y * y / (s2 * s2) - 1.0 / s2);
            k.at(y + r, x + r) = factor * g;
        }

    double sum = 0.0;
    for (long i = 0; i < k.numel(); ++i) sum += k[i];
    if (dx == 0 && dy == 0) {
        for (long i = 0; i < k.numel(); ++i) k[i] /= sum; // unit mass
        return k;
    }

    const double mean = sum / static_cast<double>(k.numel());
    for (long i = 0; i < k.numel(); ++i) k[i] -= mean; // exact zero sum

    // Truncation at 3*sigma biases the derivative responses by a few percent;
    // rescale so the matching monomial response is exact. Convolution flips
    // sample offsets, hence the sign on odd orders.
    double moment = 0.0;
    for (int y = -r; y <= r; ++y)
        for (int x = -r; x <= r; ++x) {
            double mono = 1.0;
            if (dx == 1) mono *= -x;
            if (dx == 2) mono *= 0.5 * x * x;
            if (dy == 1) mono *= -y;
            if (dy == 2) mono *= 0.5 * y * y;
            if (dx == 1 && dy == 1) mono = x * y; // (-x)(-y)
            moment += mono * k.at(y + r, x + r);
        }
    for (long i = 0; i < k.numel(); ++i) k[i] /= moment;
    return k;
}

GaussianBank gaussian_bank(double sigma) {
    if (sigma <= 0.0) throw std::invalid_argument("gaussian_bank: sigma must be positive");
    GaussianBank b;
    b.sigma = sigma;
    b.ksize = 2 * static_cast<int>(std::ceil(3.0 * sigma)) + 1;
    b.g = gaussian_derivative_kernel(0, 0, sigma, b.ksize);
    b.gx = gaussian_derivative_kernel(1, 0, sigma, b.ksize);
    b.gy = gaussian_derivative_kernel(0, 1, sigma, b.ksize);
    b.gxx = gaussian_derivative_kernel(2, 0, sigma, b.ksize);
    b.gxy = gaussian_derivative_kernel(1, 1, sigma, b.ksize);
    b.gyy = gaussian_derivative_kernel(0, 2, sigma, b.ksize);
    return b;
}

Array conv_same_reflect(const Array& img, const Array& kernel) {
    if (img.rank() != 2 || kernel.rank() != 2) throw std::invalid_argument("conv_same_reflect: 2-D inputs only");
    const int H = img.dim(0), W = img.dim(1);
    const int k = kernel.dim(0), r = k / 2;
    Array out({H, W});
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            double acc = 0.0;
            for (int ky = 0; ky < k; ++ky) {
                const int sy = reflect_index(y + ky - r, H);
                for (int kx = 0; kx < k; ++kx) {
                    const int sx = reflect_index(x + kx - r, W);
                    acc += img.at(sy, sx) * kernel.at(ky, kx);
                }
            }
            out.at(y, x) = acc;
        }
    return out;
}

Array normal_curvature_exact(const Array& img, const EpipolarField& omega, double sigma) {
    const Array& gray = img;
    if (gray.rank() != 2) throw std::invalid_argument("normal_curvature_exact: single-channel [H,W] input");
    const int H = gray.dim(0), W = gray.dim(1);
    if (omega.omega.dim(1) != H || omega.omega.dim(2) != W)
        throw std::invalid_argument("normal_curvature_exact: omega resolution mismatch");

    const GaussianBank b = gaussian_bank(sigma);
    const Array ix = conv_same_reflect(gray, b.gx);
    const Array iy = conv_same_reflect(gray, b.gy);
    const Array ixx = conv_same_reflect(gray, b.gxx);
    const Array ixy = conv_same_reflect(gray, b.gxy);
    const Array iyy = conv_same_reflect(gray, b.gyy);

    const long m = static_cast<long>(H) * W;
    Array out({H, W});
    for (long i = 0; i < m; ++i) {
        const double u = omega.omega[i], v = omega.omega[m + i];
        const double num = u * u * ixx[i] + 2.0 * u * v * ixy[i] + v * v * iyy[i];
        const double dir = u * ix[i] + v * iy[i];
        const double den = std::sqrt(1.0 + ix[i] * ix[i] + iy[i] * iy[i]) * (1.0 + dir * dir);
        out[i] = num / den;
    }
    return out;
}

Array normal_curvature_approx(const Array& img, const EpipolarField& omega, double sigma,
                              double kernel_scale) {
    if (img.rank() != 2) throw std::invalid_argument("normal_curvature_approx: single-channel [H,W] input");
    const int H = img.dim(0), W = img.dim(1);
    const GaussianBank b = gaussian_bank(sigma);

    auto scaled = [&](const Array& k) {
        Array s = k;
        for (long i = 0; i < s.numel(); ++i) s[i] *= kernel_scale;
        return s;
    };
    const Array ixx = conv_same_reflect(img, scaled(b.gxx));
    const Array ixy = conv_same_reflect(img, scaled(b.gxy));
    const Array iyy = conv_same_reflect(img, scaled(b.gyy));

    const long m = static_cast<long>(H) * W;
    Array out({H, W});
    for (long i = 0; i < m; ++i) {
        const double u = omega.omega[i], v = omega.omega[m + i];
        out[i] = u * u * ixx[i] + 2.0 * u * v * ixy[i] + v * v * iyy[i];
    }
    return out;
}

} // namespace cds
