#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "stormbench/tensor/fft.hpp"
#include "stormbench/tensor/tensor.hpp"
#include "stormbench/util/errors.hpp"
#include "stormbench/util/rng.hpp"

namespace stormbench {

/// A real 2D grid on the unit torus, [H, W] with x along the width axis.
using Field = Tensor<double>;

struct GrfParams {
    double alpha = 2.5;  // spectral decay exponent
    double tau = 7.0;    // inverse length scale
    std::size_t height = 64;
    std::size_t width = 64;

    void validate() const {
        if (!(alpha > 1.0)) throw ConfigError("grf alpha must be > 1");
        if (!(tau > 0.0)) throw ConfigError("grf tau must be > 0");
        if (!fft::is_pow2(height) || !fft::is_pow2(width))
            throw ConfigError("grf grid extents must be powers of two");
    }
};

/// Per-component standard deviation of the Fourier coefficient at integer
/// wavenumber magnitude squared `k2`:
///   sigma(k) = tau^(alpha-1) * (4 pi^2 |k|^2 + tau^2)^(-alpha/2).
inline double grf_sigma(const GrfParams& p, double k2) {
    const double four_pi2 = 4.0 * std::numbers::pi * std::numbers::pi;
    return std::pow(p.tau, p.alpha - 1.0) * std::pow(four_pi2 * k2 + p.tau * p.tau, -0.5 * p.alpha);
}

/// Draws a zero-mean periodic Gaussian random field.
///
/// Coefficients c_k are Hermitian (c_{-k} = conj c_k); for each conjugate pair
/// the real and imaginary parts are independent N(0, sigma(k)^2), and
/// self-conjugate bins are real N(0, 2 sigma(k)^2). The k = 0 bin is zero. The
/// field is the unnormalized inverse sum f(x) = sum_k c_k exp(2 pi i k.x).
inline Field sample_grf(const GrfParams& p, std::uint64_t seed) {
    p.validate();
    const std::size_t H = p.height, W = p.width;
    Rng rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> re(H * W, 0.0), im(H * W, 0.0);
    for (std::size_t i = 0; i < H; ++i) {
        for (std::size_t j = 0; j < W; ++j) {
            const std::size_t pi = (H - i) % H, pj = (W - j) % W;
            const std::size_t self = i * W + j, pair = pi * W + pj;
            if (pair < self) continue;  // filled together with its partner
            const long ky = fft::wavenumber(i, H), kx = fft::wavenumber(j, W);
            const double k2 = static_cast<double>(kx * kx + ky * ky);
            const double sigma = grf_sigma(p, k2);
            if (pair == self) {
                const double v = std::numbers::sqrt2 * sigma * normal(rng);
                re[self] = k2 == 0.0 ? 0.0 : v;
                continue;
            }
            const double a = sigma * normal(rng);
            const double b = sigma * normal(rng);
            re[self] = a;
            im[self] = b;
            re[pair] = a;
            im[pair] = -b;
        }
    }
    fft::transform2d<double>(re, im, 1, H, W, true);
    return Field({H, W}, std::move(re));
}

}  // namespace stormbench
