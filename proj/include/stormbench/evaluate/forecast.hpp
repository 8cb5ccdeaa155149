#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <vector>

#include "stormbench/evaluate/metrics.hpp"
#include "stormbench/models/model.hpp"

namespace stormbench {

struct ForecastScores {
    LeadScores rmse;
    std::vector<double> acc;  // mean over samples with a defined ACC
    std::optional<std::size_t> blowup_step;
    std::size_t samples = 0;
};

/// Packs the first h frames of sequences [first, first + n) into [n, h, H, W].
template <class T>
Tensor<T> stack_history(const std::vector<Tensor<T>>& seqs, std::size_t first, std::size_t n, std::size_t h,
                        std::size_t offset = 0) {
    const auto& s0 = seqs.at(first);
    const std::size_t N = s0.extent(1) * s0.extent(2);
    std::vector<T> buf;
    buf.reserve(n * h * N);
    for (std::size_t b = 0; b < n; ++b) {
        auto d = seqs.at(first + b).data().subspan(offset * N, h * N);
        buf.insert(buf.end(), d.begin(), d.end());
    }
    return Tensor<T>({n, h, s0.extent(1), s0.extent(2)}, std::move(buf));
}

/// Rolls the model out over every frame after the first h of each sequence
/// and scores it against the truth. A rollout that turns non-finite scores
/// infinite RMSE from then on and sets blowup_step to the earliest such step.
template <class T>
ForecastScores score_forecasts(const Model<T>& model, const std::vector<Tensor<T>>& seqs,
                               const Tensor<T>* clim = nullptr, std::size_t batch = 4) {
    if (seqs.empty()) throw std::invalid_argument("no sequences to score");
    const std::size_t h = model.history();
    const std::size_t T_ = seqs.front().extent(0), H = seqs.front().extent(1), W = seqs.front().extent(2);
    if (T_ <= h) throw ShapeError("sequences of " + std::to_string(T_) + " frames leave nothing to forecast after " +
                                  std::to_string(h) + " observed");
    const std::size_t steps = T_ - h, N = H * W;
    NoGradGuard no_grad;
    ForecastScores out;
    out.samples = seqs.size();
    std::vector<double> rmse_sum(steps, 0.0), acc_sum(steps, 0.0);
    std::vector<std::size_t> acc_n(steps, 0);
    const Tensor<T> clim_tail = clim ? frames(*clim, h, T_) : Tensor<T>();
    for (std::size_t first = 0; first < seqs.size(); first += batch) {
        const std::size_t n = std::min(batch, seqs.size() - first);
        std::vector<T> pred(n * steps * N, std::numeric_limits<T>::infinity());
        std::size_t reached = 0;
        model.rollout_each(stack_history(seqs, first, n, h), steps, [&](std::size_t s, const Tensor<T>& f) {
            auto d = f.data();
            for (T v : d)
                if (!std::isfinite(v)) return false;
            for (std::size_t b = 0; b < n; ++b)
                std::copy(d.begin() + b * N, d.begin() + (b + 1) * N, pred.begin() + (b * steps + s - 1) * N);
            reached = s;
            return true;
        });
        if (reached < steps) {
            const std::size_t bad = reached + 1;
            out.blowup_step = out.blowup_step ? std::min(*out.blowup_step, bad) : bad;
        }
        for (std::size_t b = 0; b < n; ++b) {
            Tensor<T> p({steps, H, W}, std::vector<T>(pred.begin() + b * steps * N, pred.begin() + (b + 1) * steps * N));
            Tensor<T> truth = frames(seqs[first + b], h, T_);
            const LeadScores r = rmse(p, truth);
            for (std::size_t s = 0; s < steps; ++s) rmse_sum[s] += r.per_lead[s];
            if (clim) {
                const auto a = acc(p, truth, clim_tail, false);
                for (std::size_t s = 0; s < steps; ++s)
                    if (std::isfinite(a[s])) {
                        acc_sum[s] += a[s];
                        ++acc_n[s];
                    }
            }
        }
    }
    out.rmse.per_lead.resize(steps);
    for (std::size_t s = 0; s < steps; ++s) out.rmse.per_lead[s] = rmse_sum[s] / static_cast<double>(seqs.size());
    out.rmse.mean = detail::mean_of(out.rmse.per_lead);
    if (clim) {
        out.acc.resize(steps);
        for (std::size_t s = 0; s < steps; ++s)
            out.acc[s] = acc_n[s] ? acc_sum[s] / static_cast<double>(acc_n[s]) : std::numeric_limits<double>::quiet_NaN();
    }
    return out;
}

}  // namespace stormbench
