#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "stormbench/models/model.hpp"

namespace stormbench {

/// Raised by the optimizer when a gradient holds NaN or Inf.
class NonFiniteGradient : public std::runtime_error {
public:
    NonFiniteGradient(const std::string& param, std::size_t index, double value)
        : std::runtime_error("non-finite gradient " + std::to_string(value) + " in '" + param + "' at element " +
                             std::to_string(index)),
          param_(param) {}

    const std::string& param() const noexcept { return param_; }

private:
    std::string param_;
};

/// lr0 * (1 + cos(pi * step / total)) / 2.
inline double cosine_lr(std::size_t step, std::size_t total, double lr0) {
    if (total == 0) throw std::invalid_argument("cosine_lr needs total >= 1");
    if (step > total) throw std::invalid_argument("cosine_lr step " + std::to_string(step) + " beyond total");
    if (step == total) return 0.0;
    const double x = static_cast<double>(step) / static_cast<double>(total);
    return lr0 * 0.5 * (1.0 + std::cos(std::numbers::pi * x));
}

struct AdamParams {
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
};

template <class T>
struct AdamState {
    std::vector<std::vector<T>> m, v;
    std::size_t t = 0;

    std::size_t bytes() const {
        std::size_t n = 0;
        for (const auto& x : m) n += x.size();
        for (const auto& x : v) n += x.size();
        return n * sizeof(T);
    }
};

namespace detail {

template <class T>
std::span<const T> grad_or_empty(const Tensor<T>& t) {
    return t.has_grad() ? t.grad() : std::span<const T>{};
}

}  // namespace detail

/// Global L2 norm over all parameter gradients; missing gradients count as zero.
template <class T>
double grad_norm(const std::vector<NamedParam<T>>& params) {
    double s = 0.0;
    for (const auto& p : params)
        for (T g : detail::grad_or_empty(p.tensor)) s += static_cast<double>(g) * static_cast<double>(g);
    return std::sqrt(s);
}

/// Rescales every gradient by max_norm / g when the global norm g exceeds
/// max_norm. Returns g.
template <class T>
double clip_grad_norm(std::vector<NamedParam<T>>& params, double max_norm) {
    if (!(max_norm > 0.0)) throw std::invalid_argument("clip_grad_norm needs max_norm > 0");
    const double g = grad_norm(params);
    if (g > max_norm) {
        const double scale = max_norm / g;
        for (auto& p : params) {
            if (!p.tensor.has_grad()) continue;
            for (T& v : p.tensor.mutable_grad()) v = static_cast<T>(static_cast<double>(v) * scale);
        }
    }
    return g;
}

/// One bias-corrected Adam update. Throws NonFiniteGradient before touching
/// any parameter if a gradient is NaN or Inf.
template <class T>
void adam_step(std::vector<NamedParam<T>>& params, AdamState<T>& state, double lr, const AdamParams& hp = {}) {
    for (const auto& p : params) {
        auto g = detail::grad_or_empty(p.tensor);
        for (std::size_t i = 0; i < g.size(); ++i)
            if (!std::isfinite(g[i])) throw NonFiniteGradient(p.name, i, static_cast<double>(g[i]));
    }
    if (state.m.empty()) {
        for (const auto& p : params) {
            state.m.emplace_back(p.tensor.numel(), T(0));
            state.v.emplace_back(p.tensor.numel(), T(0));
        }
    }
    if (state.m.size() != params.size()) throw std::logic_error("adam state does not match the parameter list");
    ++state.t;
    const double c1 = 1.0 - std::pow(hp.beta1, static_cast<double>(state.t));
    const double c2 = 1.0 - std::pow(hp.beta2, static_cast<double>(state.t));
    const T b1 = static_cast<T>(hp.beta1), b2 = static_cast<T>(hp.beta2);
    const T step = static_cast<T>(lr / c1), inv_c2 = static_cast<T>(1.0 / c2), eps = static_cast<T>(hp.eps);
    for (std::size_t k = 0; k < params.size(); ++k) {
        Tensor<T>& p = params[k].tensor;
        auto theta = p.mutable_data();
        auto g = detail::grad_or_empty(p);
        auto& m = state.m[k];
        auto& v = state.v[k];
        for (std::size_t i = 0; i < theta.size(); ++i) {
            const T gi = g.empty() ? T(0) : g[i];
            m[i] = b1 * m[i] + (T(1) - b1) * gi;
            v[i] = b2 * v[i] + (T(1) - b2) * gi * gi;
            theta[i] -= step * m[i] / (std::sqrt(v[i] * inv_c2) + eps);
        }
    }
}

template <class T>
void zero_grads(std::vector<NamedParam<T>>& params) {
    for (auto& p : params) p.tensor.clear_grad();
}

}  // namespace stormbench
