#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "stormbench/tensor/gemm.hpp"
#include "stormbench/tensor/tensor.hpp"

namespace stormbench {

/// Boundary handling for same-size convolutions. The x axis is the last
/// (width) axis and y the second to last (height) axis.
enum class PadMode { circular_x_zero_y, circular_both, zero };

inline const char* to_string(PadMode m) {
    switch (m) {
        case PadMode::circular_x_zero_y: return "circular_x_zero_y";
        case PadMode::circular_both: return "circular_both";
        case PadMode::zero: return "zero";
    }
    return "?";
}

inline PadMode parse_pad_mode(const std::string& s) {
    if (s == "circular_x_zero_y") return PadMode::circular_x_zero_y;
    if (s == "circular_both" || s == "circular") return PadMode::circular_both;
    if (s == "zero") return PadMode::zero;
    throw std::invalid_argument("unknown pad mode '" + s + "'");
}

namespace detail {

/// For every (tap, output pixel) pair, the flat source pixel or -1 for padding.
inline std::vector<std::int64_t> conv_gather_index(std::size_t h, std::size_t w, std::size_t k, PadMode mode) {
    const long pad = static_cast<long>(k / 2);
    const long H = static_cast<long>(h), W = static_cast<long>(w);
    const bool wrap_y = mode == PadMode::circular_both;
    const bool wrap_x = mode != PadMode::zero;
    std::vector<std::int64_t> idx(k * k * h * w);
    std::size_t n = 0;
    for (std::size_t ki = 0; ki < k; ++ki)
        for (std::size_t kj = 0; kj < k; ++kj)
            for (long i = 0; i < H; ++i)
                for (long j = 0; j < W; ++j) {
                    long si = i + static_cast<long>(ki) - pad;
                    long sj = j + static_cast<long>(kj) - pad;
                    if (wrap_y) si = ((si % H) + H) % H;
                    if (wrap_x) sj = ((sj % W) + W) % W;
                    idx[n++] = (si < 0 || si >= H || sj < 0 || sj >= W) ? -1 : si * W + sj;
                }
    return idx;
}

template <class T>
void im2col(const T* x, std::size_t cin, std::size_t hw, std::size_t taps, const std::vector<std::int64_t>& idx,
            T* cols) {
    for (std::size_t c = 0; c < cin; ++c) {
        const T* plane = x + c * hw;
        for (std::size_t t = 0; t < taps; ++t) {
            const std::int64_t* src = idx.data() + t * hw;
            T* dst = cols + (c * taps + t) * hw;
            for (std::size_t p = 0; p < hw; ++p) dst[p] = src[p] < 0 ? T(0) : plane[src[p]];
        }
    }
}

template <class T>
void col2im(const T* cols, std::size_t cin, std::size_t hw, std::size_t taps, const std::vector<std::int64_t>& idx,
            T* gx) {
    for (std::size_t c = 0; c < cin; ++c) {
        T* plane = gx + c * hw;
        for (std::size_t t = 0; t < taps; ++t) {
            const std::int64_t* src = idx.data() + t * hw;
            const T* g = cols + (c * taps + t) * hw;
            for (std::size_t p = 0; p < hw; ++p)
                if (src[p] >= 0) plane[src[p]] += g[p];
        }
    }
}

}  // namespace detail

/// Same-size 2D cross-correlation.
///
/// input [B,Cin,H,W], kernel [Cout,Cin,k,k] with k odd, bias [Cout] or an
/// undefined tensor. Padding is (k-1)/2 on each side with the given boundary
/// handling, so the output is [B,Cout,H,W].
template <class T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& kernel, const Tensor<T>& bias, PadMode mode) {
    detail::require_rank(input, 4, "conv2d", "input");
    detail::require_rank(kernel, 4, "conv2d", "kernel");
    const auto& s = input.shape();
    const auto& ks = kernel.shape();
    const std::size_t batch = s[0], cin = s[1], h = s[2], w = s[3], cout = ks[0], k = ks[2];
    if (ks[1] != cin || ks[3] != k || k % 2 == 0)
        throw ShapeError("conv2d: kernel " + to_string(ks) + " incompatible with input " + to_string(s) +
                         " (need [Cout, " + std::to_string(cin) + ", k, k] with odd k)");
    if (bias.defined()) detail::require_shape(bias, {cout}, "conv2d", "bias");

    const std::size_t hw = h * w, taps = k * k;
    Tensor<T> out({batch, cout, h, w});
    auto od = out.mutable_data();
    std::vector<std::int64_t> idx;
    std::vector<T> cols;
    if (k > 1) {
        idx = detail::conv_gather_index(h, w, k, mode);
        cols.resize(cin * taps * hw);
    }
    for (std::size_t b = 0; b < batch; ++b) {
        const T* xb = input.data().data() + b * cin * hw;
        const T* rhs = xb;
        if (k > 1) {
            detail::im2col(xb, cin, hw, taps, idx, cols.data());
            rhs = cols.data();
        }
        T* yb = od.data() + b * cout * hw;
        detail::gemm<T>(false, false, cout, hw, cin * taps, kernel.data().data(), rhs, yb, false);
        if (bias.defined())
            for (std::size_t o = 0; o < cout; ++o) {
                const T bo = bias.data()[o];
                for (std::size_t p = 0; p < hw; ++p) yb[o * hw + p] += bo;
            }
    }

    if (detail::needs_record<T>({&input, &kernel, &bias})) {
        std::vector<detail::ImplPtr<T>> ins{input.impl(), kernel.impl()};
        if (bias.defined()) ins.push_back(bias.impl());
        detail::record<T>(
            "conv2d", ins, {out.impl()},
            [xi = input.impl(), ki = kernel.impl(), bi = bias.defined() ? bias.impl() : nullptr, oi = out.impl(),
             idx = std::move(idx), batch, cin, cout, hw, taps] {
                std::vector<T> cols(taps > 1 ? cin * taps * hw : 0);
                std::vector<T> gcols(taps > 1 && xi->tracked() ? cin * taps * hw : 0);
                for (std::size_t b = 0; b < batch; ++b) {
                    const T* g = oi->grad.data() + b * cout * hw;
                    const T* xb = xi->data.data() + b * cin * hw;
                    if (bi && bi->tracked()) {
                        auto& gb = bi->grad_buffer();
                        for (std::size_t o = 0; o < cout; ++o) {
                            T acc = 0;
                            for (std::size_t p = 0; p < hw; ++p) acc += g[o * hw + p];
                            gb[o] += acc;
                        }
                    }
                    if (ki->tracked()) {
                        const T* rhs = xb;
                        if (taps > 1) {
                            detail::im2col(xb, cin, hw, taps, idx, cols.data());
                            rhs = cols.data();
                        }
                        detail::gemm<T>(false, true, cout, cin * taps, hw, g, rhs, ki->grad_buffer().data(), true);
                    }
                    if (xi->tracked()) {
                        T* gx = xi->grad_buffer().data() + b * cin * hw;
                        if (taps > 1) {
                            detail::gemm<T>(true, false, cin * taps, hw, cout, ki->data.data(), g, gcols.data(), false);
                            detail::col2im(gcols.data(), cin, hw, taps, idx, gx);
                        } else {
                            detail::gemm<T>(true, false, cin, hw, cout, ki->data.data(), g, gx, true);
                        }
                    }
                }
            });
    }
    return out;
}

}  // namespace stormbench
