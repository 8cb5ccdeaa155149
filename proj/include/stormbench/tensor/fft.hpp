#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <map>
#include <memory>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "stormbench/util/errors.hpp"

namespace stormbench::fft {

constexpr bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

/// Iterative radix-2 Cooley-Tukey plan for one transform length.
template <class T>
class Plan {
public:
    explicit Plan(std::size_t n) : n_(n), twiddle_(n / 2), bitrev_(n) {
        if (!is_pow2(n)) throw ShapeError("fft length " + std::to_string(n) + " is not a power of two");
        std::size_t bits = 0;
        while ((std::size_t{1} << bits) < n) ++bits;
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t r = 0;
            for (std::size_t b = 0; b < bits; ++b)
                if (i & (std::size_t{1} << b)) r |= std::size_t{1} << (bits - 1 - b);
            bitrev_[i] = r;
        }
        for (std::size_t k = 0; k < n / 2; ++k) {
            // Twiddles in long double so the 32-bit plan is correctly rounded.
            long double ang = -2.0L * std::numbers::pi_v<long double> * static_cast<long double>(k) / n;
            twiddle_[k] = {static_cast<T>(std::cos(ang)), static_cast<T>(std::sin(ang))};
        }
    }

    std::size_t size() const { return n_; }

    /// Unnormalized transform in place; `inverse` flips the exponent sign.
    void execute(std::complex<T>* x, bool inverse) const {
        const std::size_t n = n_;
        for (std::size_t i = 0; i < n; ++i)
            if (i < bitrev_[i]) std::swap(x[i], x[bitrev_[i]]);
        for (std::size_t len = 2; len <= n; len <<= 1) {
            const std::size_t half = len / 2;
            const std::size_t stride = n / len;
            for (std::size_t start = 0; start < n; start += len) {
                for (std::size_t k = 0; k < half; ++k) {
                    const std::complex<T> w = twiddle_[k * stride];
                    const T wr = w.real();
                    const T wi = inverse ? -w.imag() : w.imag();
                    const std::complex<T> a = x[start + k];
                    const std::complex<T> c = x[start + k + half];
                    // Plain product; operator* on std::complex adds NaN recovery calls.
                    const std::complex<T> b{c.real() * wr - c.imag() * wi, c.real() * wi + c.imag() * wr};
                    x[start + k] = a + b;
                    x[start + k + half] = a - b;
                }
            }
        }
    }

private:
    std::size_t n_;
    std::vector<std::complex<T>> twiddle_;
    std::vector<std::size_t> bitrev_;
};

template <class T>
const Plan<T>& plan_for(std::size_t n) {
    thread_local std::map<std::size_t, std::unique_ptr<Plan<T>>> cache;
    auto& slot = cache[n];
    if (!slot) slot = std::make_unique<Plan<T>>(n);
    return *slot;
}

/// 2D transform over the trailing two axes of `batch` stacked H x W planes
/// held as split real/imaginary arrays. The result is multiplied by `scale`.
/// Columns that are identically zero on input are skipped in the first pass.
template <class T>
void transform2d(std::span<T> re, std::span<T> im, std::size_t batch, std::size_t h, std::size_t w, bool inverse,
                 T scale = T(1)) {
    if (!is_pow2(h) || !is_pow2(w))
        throw ShapeError("fft2 extents " + std::to_string(h) + "x" + std::to_string(w) + " must be powers of two");
    const auto& ph = plan_for<T>(h);
    const auto& pw = plan_for<T>(w);
    std::vector<std::complex<T>> buf(std::max(h, w));
    const std::size_t plane = h * w;
    for (std::size_t b = 0; b < batch; ++b) {
        T* r = re.data() + b * plane;
        T* m = im.data() + b * plane;
        for (std::size_t j = 0; j < w; ++j) {
            bool zero = true;
            for (std::size_t i = 0; i < h; ++i) {
                buf[i] = {r[i * w + j], m[i * w + j]};
                if (zero && (r[i * w + j] != T(0) || m[i * w + j] != T(0))) zero = false;
            }
            if (zero) continue;
            ph.execute(buf.data(), inverse);
            for (std::size_t i = 0; i < h; ++i) {
                r[i * w + j] = buf[i].real();
                m[i * w + j] = buf[i].imag();
            }
        }
        for (std::size_t i = 0; i < h; ++i) {
            T* rr = r + i * w;
            T* mr = m + i * w;
            for (std::size_t j = 0; j < w; ++j) buf[j] = {rr[j], mr[j]};
            pw.execute(buf.data(), inverse);
            for (std::size_t j = 0; j < w; ++j) {
                rr[j] = buf[j].real() * scale;
                mr[j] = buf[j].imag() * scale;
            }
        }
    }
}

/// Signed integer wavenumber of FFT bin `i` for a length-n transform.
inline long wavenumber(std::size_t i, std::size_t n) {
    return i < n / 2 ? static_cast<long>(i) : static_cast<long>(i) - static_cast<long>(n);
}

}  // namespace stormbench::fft
