#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>
#include <vector>

#include <unsupported/Eigen/SpecialFunctions>

#include "stormbench/tensor/gemm.hpp"
#include "stormbench/tensor/tensor.hpp"

namespace stormbench {

namespace detail {

/// Operands either match exactly or differ only in a leading extent of 1.
struct BatchBroadcast {
    Shape out;
    bool a_repeat = false;
    bool b_repeat = false;
    std::size_t inner = 0;
};

inline BatchBroadcast broadcast_batch(const Shape& a, const Shape& b, const char* op) {
    BatchBroadcast bc;
    if (a == b) {
        bc.out = a;
        bc.inner = numel(a);
        return bc;
    }
    bool tail_equal = a.size() == b.size() && !a.empty() && std::equal(a.begin() + 1, a.end(), b.begin() + 1);
    if (!tail_equal || (a[0] != 1 && b[0] != 1))
        throw ShapeError(std::string(op) + ": shapes " + to_string(a) + " and " + to_string(b) +
                         " differ beyond the batch extent");
    bc.out = a[0] == 1 ? b : a;
    bc.a_repeat = a[0] == 1 && b[0] != 1;
    bc.b_repeat = b[0] == 1 && a[0] != 1;
    bc.inner = numel(a) / a[0];
    return bc;
}

template <class T, class F, class D>
Tensor<T> unary(const char* name, const Tensor<T>& x, F f, D deriv) {
    Tensor<T> out(x.shape());
    auto xs = x.data();
    auto ys = out.mutable_data();
    for (std::size_t i = 0; i < xs.size(); ++i) ys[i] = f(xs[i]);
    if (needs_record<T>({&x})) {
        record<T>(name, {x.impl()}, {out.impl()}, [xi = x.impl(), oi = out.impl(), deriv] {
            if (!xi->tracked()) return;
            auto& gx = xi->grad_buffer();
            const auto& g = oi->grad;
            for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * deriv(xi->data[i], oi->data[i]);
        });
    }
    return out;
}

}  // namespace detail

template <class T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    auto bc = detail::broadcast_batch(a.shape(), b.shape(), "add");
    Tensor<T> out(bc.out);
    auto o = out.mutable_data();
    auto ad = a.data();
    auto bd = b.data();
    for (std::size_t i = 0; i < o.size(); ++i)
        o[i] = ad[bc.a_repeat ? i % bc.inner : i] + bd[bc.b_repeat ? i % bc.inner : i];
    if (detail::needs_record<T>({&a, &b})) {
        detail::record<T>("add", {a.impl(), b.impl()}, {out.impl()}, [ai = a.impl(), bi = b.impl(), oi = out.impl(), bc] {
            const auto& g = oi->grad;
            if (ai->tracked()) {
                auto& ga = ai->grad_buffer();
                for (std::size_t i = 0; i < g.size(); ++i) ga[bc.a_repeat ? i % bc.inner : i] += g[i];
            }
            if (bi->tracked()) {
                auto& gb = bi->grad_buffer();
                for (std::size_t i = 0; i < g.size(); ++i) gb[bc.b_repeat ? i % bc.inner : i] += g[i];
            }
        });
    }
    return out;
}

template <class T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
    auto bc = detail::broadcast_batch(a.shape(), b.shape(), "mul");
    Tensor<T> out(bc.out);
    auto o = out.mutable_data();
    auto ad = a.data();
    auto bd = b.data();
    for (std::size_t i = 0; i < o.size(); ++i)
        o[i] = ad[bc.a_repeat ? i % bc.inner : i] * bd[bc.b_repeat ? i % bc.inner : i];
    if (detail::needs_record<T>({&a, &b})) {
        detail::record<T>("mul", {a.impl(), b.impl()}, {out.impl()}, [ai = a.impl(), bi = b.impl(), oi = out.impl(), bc] {
            const auto& g = oi->grad;
            if (ai->tracked()) {
                auto& ga = ai->grad_buffer();
                for (std::size_t i = 0; i < g.size(); ++i) {
                    std::size_t ia = bc.a_repeat ? i % bc.inner : i;
                    std::size_t ib = bc.b_repeat ? i % bc.inner : i;
                    ga[ia] += g[i] * bi->data[ib];
                }
            }
            if (bi->tracked()) {
                auto& gb = bi->grad_buffer();
                for (std::size_t i = 0; i < g.size(); ++i) {
                    std::size_t ia = bc.a_repeat ? i % bc.inner : i;
                    std::size_t ib = bc.b_repeat ? i % bc.inner : i;
                    gb[ib] += g[i] * ai->data[ia];
                }
            }
        });
    }
    return out;
}

template <class T>
Tensor<T> scalar_mul(const Tensor<T>& x, T s) {
    return detail::unary<T>("scalar_mul", x, [s](T v) { return s * v; }, [s](T, T) { return s; });
}

template <class T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
    return add(a, scalar_mul(b, T(-1)));
}

template <class T>
Tensor<T> tanh(const Tensor<T>& x) {
    return detail::unary<T>("tanh", x, [](T v) { return std::tanh(v); }, [](T, T y) { return T(1) - y * y; });
}

template <class T>
Tensor<T> sigmoid(const Tensor<T>& x) {
    return detail::unary<T>(
        "sigmoid", x, [](T v) { return T(1) / (T(1) + std::exp(-v)); }, [](T, T y) { return y * (T(1) - y); });
}

template <class T>
Tensor<T> relu(const Tensor<T>& x) {
    return detail::unary<T>(
        "relu", x, [](T v) { return v > T(0) ? v : T(0); }, [](T v, T) { return v > T(0) ? T(1) : T(0); });
}

namespace detail {

/// Applies `f` to [0, n) in aligned fixed-size blocks so every element takes
/// the same vectorized path whatever the alignment of the source buffers.
template <class T, class F>
void blockwise(std::size_t n, F f) {
    constexpr std::size_t kBlock = 256;
    using Block = Eigen::Array<T, kBlock, 1>;
    alignas(64) T buf[3][kBlock];
    for (std::size_t i = 0; i < n; i += kBlock) {
        const std::size_t m = std::min(kBlock, n - i);
        f(i, m, Eigen::Map<Block, Eigen::Aligned64>(buf[0]), Eigen::Map<Block, Eigen::Aligned64>(buf[1]),
          Eigen::Map<Block, Eigen::Aligned64>(buf[2]));
    }
}

}  // namespace detail

/// Exact GELU, x * Phi(x) with Phi the standard normal CDF.
template <class T>
Tensor<T> gelu(const Tensor<T>& x) {
    static constexpr T inv_sqrt2 = T(1) / std::numbers::sqrt2_v<T>;
    static constexpr T inv_sqrt2pi = std::numbers::inv_sqrtpi_v<T> * inv_sqrt2;
    const std::size_t n = x.numel();
    Tensor<T> out(x.shape());
    const T* src = x.data().data();
    T* dst = out.mutable_data().data();
    detail::blockwise<T>(n, [&](std::size_t i, std::size_t m, auto v, auto y, auto) {
        v.setZero();
        std::copy(src + i, src + i + m, v.data());
        y = T(0.5) * v * (T(1) + (v * inv_sqrt2).erf());
        std::copy(y.data(), y.data() + m, dst + i);
    });
    if (detail::needs_record<T>({&x})) {
        detail::record<T>("gelu", {x.impl()}, {out.impl()}, [xi = x.impl(), oi = out.impl(), n] {
            if (!xi->tracked()) return;
            const T* xv = xi->data.data();
            const T* gv = oi->grad.data();
            T* gx = xi->grad_buffer().data();
            detail::blockwise<T>(n, [&](std::size_t i, std::size_t m, auto v, auto g, auto d) {
                v.setZero();
                g.setZero();
                std::copy(xv + i, xv + i + m, v.data());
                std::copy(gv + i, gv + i + m, g.data());
                d = g * (T(0.5) * (T(1) + (v * inv_sqrt2).erf()) + v * inv_sqrt2pi * (T(-0.5) * v.square()).exp());
                for (std::size_t k = 0; k < m; ++k) gx[i + k] += d[static_cast<Eigen::Index>(k)];
            });
        });
    }
    return out;
}

/// Mean over all elements of the squared difference.
template <class T>
Tensor<T> mse(const Tensor<T>& pred, const Tensor<T>& target) {
    detail::require_shape(target, pred.shape(), "mse", "target");
    auto p = pred.data();
    auto t = target.data();
    long double acc = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        long double d = static_cast<long double>(p[i]) - t[i];
        acc += d * d;
    }
    const T n = static_cast<T>(p.size());
    Tensor<T> out = Tensor<T>::scalar(static_cast<T>(acc / p.size()));
    if (detail::needs_record<T>({&pred, &target})) {
        detail::record<T>("mse", {pred.impl(), target.impl()}, {out.impl()},
                          [pi = pred.impl(), ti = target.impl(), oi = out.impl(), n] {
                              const T g = oi->grad[0] * T(2) / n;
                              if (pi->tracked()) {
                                  auto& gp = pi->grad_buffer();
                                  for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += g * (pi->data[i] - ti->data[i]);
                              }
                              if (ti->tracked()) {
                                  auto& gt = ti->grad_buffer();
                                  for (std::size_t i = 0; i < gt.size(); ++i) gt[i] -= g * (pi->data[i] - ti->data[i]);
                              }
                          });
    }
    return out;
}

template <class T>
Tensor<T> sum(const Tensor<T>& x) {
    long double acc = 0;
    for (T v : x.data()) acc += v;
    Tensor<T> out = Tensor<T>::scalar(static_cast<T>(acc));
    if (detail::needs_record<T>({&x})) {
        detail::record<T>("sum", {x.impl()}, {out.impl()}, [xi = x.impl(), oi = out.impl()] {
            auto& gx = xi->grad_buffer();
            for (auto& g : gx) g += oi->grad[0];
        });
    }
    return out;
}

/// 2x2 average pooling over the trailing two axes of [B,C,H,W].
template <class T>
Tensor<T> avgpool2(const Tensor<T>& x) {
    detail::require_rank(x, 4, "avgpool2", "input");
    const auto& s = x.shape();
    if (s[2] % 2 || s[3] % 2) throw ShapeError("avgpool2: spatial extents must be even, got " + to_string(s));
    const std::size_t planes = s[0] * s[1], h = s[2], w = s[3], ho = h / 2, wo = w / 2;
    Tensor<T> out({s[0], s[1], ho, wo});
    auto xd = x.data();
    auto od = out.mutable_data();
    for (std::size_t p = 0; p < planes; ++p)
        for (std::size_t i = 0; i < ho; ++i)
            for (std::size_t j = 0; j < wo; ++j) {
                const T* base = xd.data() + p * h * w + 2 * i * w + 2 * j;
                od[p * ho * wo + i * wo + j] = T(0.25) * (base[0] + base[1] + base[w] + base[w + 1]);
            }
    if (detail::needs_record<T>({&x})) {
        detail::record<T>("avgpool2", {x.impl()}, {out.impl()}, [xi = x.impl(), oi = out.impl(), planes, h, w] {
            auto& gx = xi->grad_buffer();
            const std::size_t ho = h / 2, wo = w / 2;
            for (std::size_t p = 0; p < planes; ++p)
                for (std::size_t i = 0; i < ho; ++i)
                    for (std::size_t j = 0; j < wo; ++j) {
                        T g = T(0.25) * oi->grad[p * ho * wo + i * wo + j];
                        T* base = gx.data() + p * h * w + 2 * i * w + 2 * j;
                        base[0] += g;
                        base[1] += g;
                        base[w] += g;
                        base[w + 1] += g;
                    }
        });
    }
    return out;
}

/// Transposed convolution with a 2x2 kernel and stride 2 (exact upsampling by 2).
/// kernel: [Cin, Cout, 2, 2]; bias: [Cout] or undefined.
template <class T>
Tensor<T> conv_transpose2_stride2(const Tensor<T>& x, const Tensor<T>& kernel, const Tensor<T>& bias) {
    detail::require_rank(x, 4, "conv_transpose2_stride2", "input");
    detail::require_rank(kernel, 4, "conv_transpose2_stride2", "kernel");
    const auto& s = x.shape();
    const std::size_t batch = s[0], cin = s[1], h = s[2], w = s[3], cout = kernel.extent(1);
    if (kernel.extent(0) != cin || kernel.extent(2) != 2 || kernel.extent(3) != 2)
        throw ShapeError("conv_transpose2_stride2: kernel " + to_string(kernel.shape()) + " incompatible with input " +
                         to_string(s));
    if (bias.defined()) detail::require_shape(bias, {cout}, "conv_transpose2_stride2", "bias");
    const std::size_t hw = h * w, ho = 2 * h, wo = 2 * w;
    Tensor<T> out({batch, cout, ho, wo});
    std::vector<T> cols(cout * 4 * hw);
    auto od = out.mutable_data();
    for (std::size_t b = 0; b < batch; ++b) {
        // cols[(o*4 + d), pixel] = sum_c K[c, o*4+d] x[c, pixel]
        detail::gemm<T>(true, false, cout * 4, hw, cin, kernel.data().data(), x.data().data() + b * cin * hw,
                        cols.data(), false);
        for (std::size_t o = 0; o < cout; ++o) {
            const T bo = bias.defined() ? bias.data()[o] : T(0);
            T* plane = od.data() + (b * cout + o) * ho * wo;
            for (std::size_t d = 0; d < 4; ++d) {
                const std::size_t di = d / 2, dj = d % 2;
                const T* src = cols.data() + (o * 4 + d) * hw;
                for (std::size_t i = 0; i < h; ++i)
                    for (std::size_t j = 0; j < w; ++j) plane[(2 * i + di) * wo + 2 * j + dj] = src[i * w + j] + bo;
            }
        }
    }
    if (detail::needs_record<T>({&x, &kernel, &bias})) {
        std::vector<detail::ImplPtr<T>> ins{x.impl(), kernel.impl()};
        if (bias.defined()) ins.push_back(bias.impl());
        detail::record<T>("conv_transpose2_stride2", ins, {out.impl()},
                          [xi = x.impl(), ki = kernel.impl(), bi = bias.defined() ? bias.impl() : nullptr,
                           oi = out.impl(), batch, cin, cout, h, w] {
                              const std::size_t hw = h * w, wo = 2 * w;
                              std::vector<T> gcols(cout * 4 * hw);
                              for (std::size_t b = 0; b < batch; ++b) {
                                  const T* gplane = oi->grad.data() + b * cout * 4 * hw;
                                  for (std::size_t o = 0; o < cout; ++o)
                                      for (std::size_t d = 0; d < 4; ++d) {
                                          const std::size_t di = d / 2, dj = d % 2;
                                          T* dst = gcols.data() + (o * 4 + d) * hw;
                                          const T* src = gplane + o * 4 * hw;
                                          for (std::size_t i = 0; i < h; ++i)
                                              for (std::size_t j = 0; j < w; ++j)
                                                  dst[i * w + j] = src[(2 * i + di) * wo + 2 * j + dj];
                                      }
                                  if (bi && bi->tracked()) {
                                      auto& gb = bi->grad_buffer();
                                      for (std::size_t o = 0; o < cout; ++o)
                                          for (std::size_t k = 0; k < 4 * hw; ++k) gb[o] += gcols[o * 4 * hw + k];
                                  }
                                  if (ki->tracked())
                                      detail::gemm<T>(false, true, cin, cout * 4, hw, xi->data.data() + b * cin * hw,
                                                      gcols.data(), ki->grad_buffer().data(), true);
                                  if (xi->tracked())
                                      detail::gemm<T>(false, false, cin, hw, cout * 4, ki->data.data(), gcols.data(),
                                                      xi->grad_buffer().data() + b * cin * hw, true);
                              }
                          });
    }
    return out;
}

/// Affine map over the last axis: y[..., o] = sum_i x[..., i] W[o, i] + b[o].
template <class T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias) {
    detail::require_rank(weight, 2, "linear", "weight");
    if (x.rank() == 0 || x.shape().back() != weight.extent(1))
        throw ShapeError("linear: input " + to_string(x.shape()) + " incompatible with weight " +
                         to_string(weight.shape()));
    const std::size_t in = weight.extent(1), outf = weight.extent(0), rows = x.numel() / in;
    if (bias.defined()) detail::require_shape(bias, {outf}, "linear", "bias");
    Shape os = x.shape();
    os.back() = outf;
    Tensor<T> out(os);
    auto od = out.mutable_data();
    detail::gemm<T>(false, true, rows, outf, in, x.data().data(), weight.data().data(), od.data(), false);
    if (bias.defined())
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t o = 0; o < outf; ++o) od[r * outf + o] += bias.data()[o];
    if (detail::needs_record<T>({&x, &weight, &bias})) {
        std::vector<detail::ImplPtr<T>> ins{x.impl(), weight.impl()};
        if (bias.defined()) ins.push_back(bias.impl());
        detail::record<T>("linear", ins, {out.impl()},
                          [xi = x.impl(), wi = weight.impl(), bi = bias.defined() ? bias.impl() : nullptr,
                           oi = out.impl(), rows, in, outf] {
                              const T* g = oi->grad.data();
                              if (xi->tracked())
                                  detail::gemm<T>(false, false, rows, in, outf, g, wi->data.data(),
                                                  xi->grad_buffer().data(), true);
                              if (wi->tracked())
                                  detail::gemm<T>(true, false, outf, in, rows, g, xi->data.data(),
                                                  wi->grad_buffer().data(), true);
                              if (bi && bi->tracked()) {
                                  auto& gb = bi->grad_buffer();
                                  for (std::size_t r = 0; r < rows; ++r)
                                      for (std::size_t o = 0; o < outf; ++o) gb[o] += g[r * outf + o];
                              }
                          });
    }
    return out;
}

/// Concatenation along axis 1 of rank-4 [B,C,H,W] tensors.
template <class T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts) {
    if (parts.empty()) throw ShapeError("concat: no inputs");
    const Shape& first = parts.front().shape();
    if (first.size() != 4) throw ShapeError("concat: inputs must be rank 4, got " + to_string(first));
    std::size_t channels = 0;
    for (const auto& p : parts) {
        const auto& s = p.shape();
        if (s.size() != 4 || s[0] != first[0] || s[2] != first[2] || s[3] != first[3])
            throw ShapeError("concat: shape " + to_string(s) + " incompatible with " + to_string(first));
        channels += s[1];
    }
    const std::size_t batch = first[0], plane = first[2] * first[3];
    Tensor<T> out({batch, channels, first[2], first[3]});
    auto od = out.mutable_data();
    std::vector<std::size_t> offsets;
    std::size_t off = 0;
    for (const auto& p : parts) {
        offsets.push_back(off);
        const std::size_t c = p.extent(1);
        for (std::size_t b = 0; b < batch; ++b)
            std::copy_n(p.data().data() + b * c * plane, c * plane, od.data() + (b * channels + off) * plane);
        off += c;
    }
    bool any = false;
    for (const auto& p : parts) any = any || detail::needs_record<T>({&p});
    if (any) {
        std::vector<detail::ImplPtr<T>> ins;
        for (const auto& p : parts) ins.push_back(p.impl());
        detail::record<T>("concat", ins, {out.impl()}, [ins, oi = out.impl(), offsets, batch, channels, plane] {
            for (std::size_t k = 0; k < ins.size(); ++k) {
                if (!ins[k]->tracked()) continue;
                auto& g = ins[k]->grad_buffer();
                const std::size_t c = ins[k]->shape[1];
                for (std::size_t b = 0; b < batch; ++b) {
                    const T* src = oi->grad.data() + (b * channels + offsets[k]) * plane;
                    T* dst = g.data() + b * c * plane;
                    for (std::size_t i = 0; i < c * plane; ++i) dst[i] += src[i];
                }
            }
        });
    }
    return out;
}

/// Channels [begin, end) of a rank-4 [B,C,H,W] tensor.
template <class T>
Tensor<T> slice_channels(const Tensor<T>& x, std::size_t begin, std::size_t end) {
    detail::require_rank(x, 4, "slice_channels", "input");
    const auto& s = x.shape();
    if (begin >= end || end > s[1])
        throw ShapeError("slice_channels: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                         ") invalid for " + to_string(s));
    const std::size_t batch = s[0], c = s[1], plane = s[2] * s[3], n = end - begin;
    Tensor<T> out({batch, n, s[2], s[3]});
    for (std::size_t b = 0; b < batch; ++b)
        std::copy_n(x.data().data() + (b * c + begin) * plane, n * plane, out.mutable_data().data() + b * n * plane);
    if (detail::needs_record<T>({&x})) {
        detail::record<T>("slice_channels", {x.impl()}, {out.impl()},
                          [xi = x.impl(), oi = out.impl(), batch, c, plane, begin, n] {
                              auto& g = xi->grad_buffer();
                              for (std::size_t b = 0; b < batch; ++b) {
                                  const T* src = oi->grad.data() + b * n * plane;
                                  T* dst = g.data() + (b * c + begin) * plane;
                                  for (std::size_t i = 0; i < n * plane; ++i) dst[i] += src[i];
                              }
                          });
    }
    return out;
}

}  // namespace stormbench
