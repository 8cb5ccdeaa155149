#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <vector>

#include "stormbench/models/model.hpp"

namespace stormbench {

/// Largest |value| over a set of sequences.
template <class T>
double max_abs(const std::vector<Tensor<T>>& seqs) {
    double m = 0.0;
    for (const auto& s : seqs)
        for (T v : s.data()) m = std::max(m, std::abs(static_cast<double>(v)));
    return m;
}

/// Closed-loop rollout from ic ([h,H,W] or [B,h,H,W]) for up to max_steps.
/// Returns the first step whose frame holds a non-finite value or a value
/// with |v| > threshold, or nothing if the rollout stays bounded.
template <class T>
std::optional<std::size_t> stability_sweep(const Model<T>& model, const Tensor<T>& ic, std::size_t max_steps,
                                           double threshold) {
    if (max_steps < 1) throw std::invalid_argument("stability_sweep needs max_steps >= 1");
    Tensor<T> x = ic;
    if (ic.rank() == 3)
        x = Tensor<T>({1, ic.extent(0), ic.extent(1), ic.extent(2)}, std::vector<T>(ic.data().begin(), ic.data().end()));
    NoGradGuard no_grad;
    std::optional<std::size_t> hit;
    model.rollout_each(x, max_steps, [&](std::size_t s, const Tensor<T>& f) {
        for (T v : f.data()) {
            const double a = std::abs(static_cast<double>(v));
            if (!std::isfinite(a) || a > threshold) {
                hit = s;
                return false;
            }
        }
        return true;
    });
    return hit;
}

}  // namespace stormbench
