#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "stormbench/tensor/fft.hpp"
#include "stormbench/tensor/tensor.hpp"

namespace stormbench {

namespace detail {

inline void require_spatial(const Shape& s, const char* op) {
    if (s.size() < 2) throw ShapeError(std::string(op) + ": need at least two axes, got " + to_string(s));
    if (!fft::is_pow2(s[s.size() - 1]) || !fft::is_pow2(s[s.size() - 2]))
        throw ShapeError(std::string(op) + ": spatial extents of " + to_string(s) + " must be powers of two");
}

template <class T>
void accumulate(std::vector<T>& dst, const std::vector<T>& src) {
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

}  // namespace detail

/// Unnormalized 2D DFT over the trailing two axes of a real tensor.
template <class T>
ComplexTensor<T> fft2(const Tensor<T>& x) {
    const auto& s = x.shape();
    detail::require_spatial(s, "fft2");
    const std::size_t h = s[s.size() - 2], w = s[s.size() - 1], batch = x.numel() / (h * w);
    Tensor<T> re(s, std::vector<T>(x.data().begin(), x.data().end()));
    Tensor<T> im(s);
    fft::transform2d<T>(re.mutable_data(), im.mutable_data(), batch, h, w, false);
    if (detail::needs_record<T>({&x})) {
        // Adjoint of the forward DFT is the unnormalized inverse; only the real
        // part reaches a real input.
        detail::record<T>("fft2", {x.impl()}, {re.impl(), im.impl()},
                          [xi = x.impl(), ri = re.impl(), ii = im.impl(), batch, h, w] {
                              std::vector<T> gr = ri->has_grad() ? ri->grad : std::vector<T>(ri->data.size());
                              std::vector<T> gi = ii->has_grad() ? ii->grad : std::vector<T>(ii->data.size());
                              fft::transform2d<T>(gr, gi, batch, h, w, true);
                              detail::accumulate(xi->grad_buffer(), gr);
                          });
    }
    return {re, im};
}

/// Inverse 2D DFT over the trailing two axes, scaled by 1/(H*W).
template <class T>
ComplexTensor<T> ifft2(const ComplexTensor<T>& x) {
    const auto& s = x.shape();
    detail::require_spatial(s, "ifft2");
    const std::size_t h = s[s.size() - 2], w = s[s.size() - 1], batch = x.numel() / (h * w);
    const T scale = T(1) / static_cast<T>(h * w);
    Tensor<T> re(s, std::vector<T>(x.re.data().begin(), x.re.data().end()));
    Tensor<T> im(s, std::vector<T>(x.im.data().begin(), x.im.data().end()));
    fft::transform2d<T>(re.mutable_data(), im.mutable_data(), batch, h, w, true, scale);
    if (detail::needs_record<T>({&x.re, &x.im})) {
        detail::record<T>("ifft2", {x.re.impl(), x.im.impl()}, {re.impl(), im.impl()},
                          [xr = x.re.impl(), xm = x.im.impl(), ri = re.impl(), ii = im.impl(), batch, h, w, scale] {
                              std::vector<T> gr = ri->has_grad() ? ri->grad : std::vector<T>(ri->data.size());
                              std::vector<T> gi = ii->has_grad() ? ii->grad : std::vector<T>(ii->data.size());
                              fft::transform2d<T>(gr, gi, batch, h, w, false, scale);
                              if (xr->tracked()) detail::accumulate(xr->grad_buffer(), gr);
                              if (xm->tracked()) detail::accumulate(xm->grad_buffer(), gi);
                          });
    }
    return {re, im};
}

/// Per-mode complex channel mixing on a truncated band of wavenumbers.
///
/// x: [B,Cin,H,Wm] spectrum; weight: [Cin,Cout,2*m1,m2]. Weight rows r < m1
/// act on first-axis bins 0..m1-1, rows r >= m1 on the m1 highest bins
/// (negative frequencies) H-m1..H-1. Second-axis bins 0..m2-1 are retained;
/// every other output mode is zero.
template <class T>
ComplexTensor<T> spectral_mul(const ComplexTensor<T>& x, const ComplexTensor<T>& weight) {
    const auto& s = x.shape();
    const auto& ws = weight.shape();
    if (s.size() != 4 || ws.size() != 4)
        throw ShapeError("spectral_mul: need rank-4 input and weight, got " + to_string(s) + " and " + to_string(ws));
    const std::size_t batch = s[0], cin = s[1], h = s[2], wm = s[3];
    const std::size_t cout = ws[1], m1 = ws[2] / 2, m2 = ws[3];
    if (ws[0] != cin || ws[2] % 2 != 0)
        throw ShapeError("spectral_mul: weight " + to_string(ws) + " incompatible with input " + to_string(s));
    if (m1 == 0 || m2 == 0 || 2 * m1 > h || m2 > wm)
        throw ShapeError("spectral_mul: modes (" + std::to_string(m1) + ", " + std::to_string(m2) +
                         ") exceed the Nyquist limit for spectrum " + to_string(s));

    const std::size_t plane = h * wm, wplane = 2 * m1 * m2;
    auto row_of = [h, m1](std::size_t r) { return r < m1 ? r : h - 2 * m1 + r; };

    Tensor<T> yr({batch, cout, h, wm});
    Tensor<T> yi({batch, cout, h, wm});
    {
        const T* xr = x.re.data().data();
        const T* xm = x.im.data().data();
        const T* wr = weight.re.data().data();
        const T* wi = weight.im.data().data();
        T* orr = yr.mutable_data().data();
        T* oi = yi.mutable_data().data();
        for (std::size_t b = 0; b < batch; ++b)
            for (std::size_t i = 0; i < cin; ++i)
                for (std::size_t o = 0; o < cout; ++o)
                    for (std::size_t r = 0; r < 2 * m1; ++r) {
                        const std::size_t kx = row_of(r);
                        const std::size_t xoff = (b * cin + i) * plane + kx * wm;
                        const std::size_t ooff = (b * cout + o) * plane + kx * wm;
                        const std::size_t woff = (i * cout + o) * wplane + r * m2;
                        for (std::size_t c = 0; c < m2; ++c) {
                            const T ar = xr[xoff + c], ai = xm[xoff + c];
                            const T br = wr[woff + c], bi = wi[woff + c];
                            orr[ooff + c] += ar * br - ai * bi;
                            oi[ooff + c] += ar * bi + ai * br;
                        }
                    }
    }

    if (detail::needs_record<T>({&x.re, &x.im, &weight.re, &weight.im})) {
        detail::record<T>(
            "spectral_mul", {x.re.impl(), x.im.impl(), weight.re.impl(), weight.im.impl()}, {yr.impl(), yi.impl()},
            [xr = x.re.impl(), xm = x.im.impl(), wr = weight.re.impl(), wi = weight.im.impl(), orr = yr.impl(),
             oi = yi.impl(), batch, cin, cout, m1, m2, plane, wplane, wm, row_of] {
                std::vector<T> zero;
                const auto& gr = orr->has_grad() ? orr->grad : (zero.assign(orr->data.size(), T(0)), zero);
                std::vector<T> zero2;
                const auto& gi = oi->has_grad() ? oi->grad : (zero2.assign(oi->data.size(), T(0)), zero2);
                const bool want_x = xr->tracked() || xm->tracked();
                const bool want_w = wr->tracked() || wi->tracked();
                std::vector<T>* gxr = want_x ? &xr->grad_buffer() : nullptr;
                std::vector<T>* gxi = want_x ? &xm->grad_buffer() : nullptr;
                std::vector<T>* gwr = want_w ? &wr->grad_buffer() : nullptr;
                std::vector<T>* gwi = want_w ? &wi->grad_buffer() : nullptr;
                for (std::size_t b = 0; b < batch; ++b)
                    for (std::size_t i = 0; i < cin; ++i)
                        for (std::size_t o = 0; o < cout; ++o)
                            for (std::size_t r = 0; r < 2 * m1; ++r) {
                                const std::size_t kx = row_of(r);
                                const std::size_t xoff = (b * cin + i) * plane + kx * wm;
                                const std::size_t ooff = (b * cout + o) * plane + kx * wm;
                                const std::size_t woff = (i * cout + o) * wplane + r * m2;
                                for (std::size_t c = 0; c < m2; ++c) {
                                    const T g_r = gr[ooff + c], g_i = gi[ooff + c];
                                    if (want_x) {
                                        // gx += g * conj(w)
                                        const T br = wr->data[woff + c], bi = wi->data[woff + c];
                                        (*gxr)[xoff + c] += g_r * br + g_i * bi;
                                        (*gxi)[xoff + c] += g_i * br - g_r * bi;
                                    }
                                    if (want_w) {
                                        // gw += conj(x) * g
                                        const T ar = xr->data[xoff + c], ai = xm->data[xoff + c];
                                        (*gwr)[woff + c] += ar * g_r + ai * g_i;
                                        (*gwi)[woff + c] += ar * g_i - ai * g_r;
                                    }
                                }
                            }
            });
    }
    return {yr, yi};
}

/// Complex mode-n product: contracts axis `axis` of x (extent r) with the
/// second axis of factor [n, r], giving a tensor whose `axis` has extent n.
template <class T>
ComplexTensor<T> mode_product(const ComplexTensor<T>& x, const ComplexTensor<T>& factor, std::size_t axis) {
    const auto& s = x.shape();
    const auto& fs = factor.shape();
    if (axis >= s.size() || fs.size() != 2 || fs[1] != s[axis])
        throw ShapeError("mode_product: factor " + to_string(fs) + " incompatible with axis " + std::to_string(axis) +
                         " of " + to_string(s));
    std::size_t outer = 1, inner = 1;
    for (std::size_t a = 0; a < axis; ++a) outer *= s[a];
    for (std::size_t a = axis + 1; a < s.size(); ++a) inner *= s[a];
    const std::size_t r = s[axis], n = fs[0];
    Shape os = s;
    os[axis] = n;
    Tensor<T> yr(os), yi(os);
    {
        const T* xr = x.re.data().data();
        const T* xm = x.im.data().data();
        const T* ur = factor.re.data().data();
        const T* ui = factor.im.data().data();
        T* orr = yr.mutable_data().data();
        T* oi = yi.mutable_data().data();
        for (std::size_t q = 0; q < outer; ++q)
            for (std::size_t a = 0; a < n; ++a)
                for (std::size_t p = 0; p < r; ++p) {
                    const T fr = ur[a * r + p], fi = ui[a * r + p];
                    const T* sr = xr + (q * r + p) * inner;
                    const T* si = xm + (q * r + p) * inner;
                    T* dr = orr + (q * n + a) * inner;
                    T* di = oi + (q * n + a) * inner;
                    for (std::size_t t = 0; t < inner; ++t) {
                        dr[t] += fr * sr[t] - fi * si[t];
                        di[t] += fr * si[t] + fi * sr[t];
                    }
                }
    }
    if (detail::needs_record<T>({&x.re, &x.im, &factor.re, &factor.im})) {
        detail::record<T>(
            "mode_product", {x.re.impl(), x.im.impl(), factor.re.impl(), factor.im.impl()}, {yr.impl(), yi.impl()},
            [xr = x.re.impl(), xm = x.im.impl(), ur = factor.re.impl(), ui = factor.im.impl(), orr = yr.impl(),
             oi = yi.impl(), outer, inner, r, n] {
                std::vector<T> z1, z2;
                const auto& gr = orr->has_grad() ? orr->grad : (z1.assign(orr->data.size(), T(0)), z1);
                const auto& gi = oi->has_grad() ? oi->grad : (z2.assign(oi->data.size(), T(0)), z2);
                const bool want_x = xr->tracked() || xm->tracked();
                const bool want_u = ur->tracked() || ui->tracked();
                std::vector<T>* gxr = want_x ? &xr->grad_buffer() : nullptr;
                std::vector<T>* gxi = want_x ? &xm->grad_buffer() : nullptr;
                std::vector<T>* gur = want_u ? &ur->grad_buffer() : nullptr;
                std::vector<T>* gui = want_u ? &ui->grad_buffer() : nullptr;
                for (std::size_t q = 0; q < outer; ++q)
                    for (std::size_t a = 0; a < n; ++a)
                        for (std::size_t p = 0; p < r; ++p) {
                            const T fr = ur->data[a * r + p], fi = ui->data[a * r + p];
                            const std::size_t xo = (q * r + p) * inner, yo = (q * n + a) * inner;
                            T acc_r = 0, acc_i = 0;
                            for (std::size_t t = 0; t < inner; ++t) {
                                const T g_r = gr[yo + t], g_i = gi[yo + t];
                                if (want_x) {
                                    (*gxr)[xo + t] += g_r * fr + g_i * fi;
                                    (*gxi)[xo + t] += g_i * fr - g_r * fi;
                                }
                                if (want_u) {
                                    const T sr = xr->data[xo + t], si = xm->data[xo + t];
                                    acc_r += sr * g_r + si * g_i;
                                    acc_i += sr * g_i - si * g_r;
                                }
                            }
                            if (want_u) {
                                (*gur)[a * r + p] += acc_r;
                                (*gui)[a * r + p] += acc_i;
                            }
                        }
            });
    }
    return {yr, yi};
}

}  // namespace stormbench
