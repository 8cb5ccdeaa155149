#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "stormbench/tensor/tensor.hpp"

namespace stormbench {

/// Raised when a forecast or observed anomaly has zero variance at a lead time.
class UndefinedAcc : public std::domain_error {
public:
    UndefinedAcc(std::size_t lead)
        : std::domain_error("ACC undefined at lead " + std::to_string(lead) + ": zero anomaly variance"), lead_(lead) {}

    std::size_t lead() const noexcept { return lead_; }

private:
    std::size_t lead_;
};

struct LeadScores {
    std::vector<double> per_lead;
    double mean = 0.0;

    double final() const { return per_lead.empty() ? 0.0 : per_lead.back(); }
};

namespace detail {

template <class T>
void require_sequence(const Tensor<T>& t, const char* what) {
    if (t.rank() != 3) throw ShapeError(std::string(what) + " must be [S, H, W], got " + to_string(t.shape()));
}

template <class A, class B>
void require_same(const Tensor<A>& a, const Tensor<B>& b, const char* op) {
    if (a.shape() != b.shape())
        throw ShapeError(std::string(op) + ": shapes " + to_string(a.shape()) + " and " + to_string(b.shape()) +
                         " differ");
}

inline double mean_of(const std::vector<double>& v) {
    return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace detail

/// Per-lead RMSE of pred against target, both [S, H, W]. Optional row weights
/// (one per H row) are rescaled to mean 1.
template <class T>
LeadScores rmse(const Tensor<T>& pred, const Tensor<T>& target, const std::optional<std::vector<double>>& row_weights = {}) {
    detail::require_sequence(pred, "rmse prediction");
    detail::require_same(pred, target, "rmse");
    const std::size_t S = pred.extent(0), H = pred.extent(1), W = pred.extent(2);
    std::vector<double> w(H, 1.0);
    if (row_weights) {
        if (row_weights->size() != H)
            throw ShapeError("rmse: " + std::to_string(row_weights->size()) + " row weights for " + std::to_string(H) +
                             " rows");
        const double m = detail::mean_of(*row_weights);
        if (!(m > 0.0)) throw std::invalid_argument("rmse: row weights must have a positive mean");
        for (std::size_t i = 0; i < H; ++i) w[i] = (*row_weights)[i] / m;
    }
    auto p = pred.data();
    auto t = target.data();
    LeadScores out;
    out.per_lead.resize(S);
    for (std::size_t s = 0; s < S; ++s) {
        double acc = 0.0;
        for (std::size_t i = 0; i < H; ++i) {
            double row = 0.0;
            for (std::size_t j = 0; j < W; ++j) {
                const std::size_t k = (s * H + i) * W + j;
                const double d = static_cast<double>(p[k]) - static_cast<double>(t[k]);
                row += d * d;
            }
            acc += w[i] * row;
        }
        out.per_lead[s] = std::sqrt(acc / static_cast<double>(H * W));
    }
    out.mean = detail::mean_of(out.per_lead);
    return out;
}

/// Centered anomaly correlation per lead of pred and target against the
/// climatology, all [S, H, W]. With `strict`, a lead with zero anomaly
/// variance throws UndefinedAcc; otherwise it scores NaN.
template <class T>
std::vector<double> acc(const Tensor<T>& pred, const Tensor<T>& target, const Tensor<T>& clim, bool strict = true) {
    detail::require_sequence(pred, "acc prediction");
    detail::require_same(pred, target, "acc");
    detail::require_same(pred, clim, "acc");
    const std::size_t S = pred.extent(0), N = pred.extent(1) * pred.extent(2);
    auto p = pred.data();
    auto o = target.data();
    auto c = clim.data();
    std::vector<double> out(S);
    for (std::size_t s = 0; s < S; ++s) {
        double num = 0.0, ff = 0.0, oo = 0.0;
        for (std::size_t k = s * N; k < (s + 1) * N; ++k) {
            const double fa = static_cast<double>(p[k]) - static_cast<double>(c[k]);
            const double oa = static_cast<double>(o[k]) - static_cast<double>(c[k]);
            num += fa * oa;
            ff += fa * fa;
            oo += oa * oa;
        }
        if (ff == 0.0 || oo == 0.0) {
            if (strict) throw UndefinedAcc(s + 1);
            out[s] = std::numeric_limits<double>::quiet_NaN();
            continue;
        }
        out[s] = std::clamp(num / std::sqrt(ff * oo), -1.0, 1.0);
    }
    return out;
}

/// Per-frame mean over the training sequences, each [T, H, W].
template <class T>
Tensor<T> climatology(const std::vector<Tensor<T>>& train) {
    if (train.empty()) throw std::invalid_argument("climatology of an empty split");
    const Shape shape = train.front().shape();
    detail::require_sequence(train.front(), "climatology sample");
    std::vector<double> sum(numel(shape), 0.0);
    for (const auto& seq : train) {
        if (seq.shape() != shape)
            throw ShapeError("climatology: sample shape " + to_string(seq.shape()) + " differs from " + to_string(shape));
        auto d = seq.data();
        for (std::size_t k = 0; k < sum.size(); ++k) sum[k] += static_cast<double>(d[k]);
    }
    const double n = static_cast<double>(train.size());
    std::vector<T> mean(sum.size());
    for (std::size_t k = 0; k < sum.size(); ++k) mean[k] = static_cast<T>(sum[k] / n);
    return Tensor<T>(shape, std::move(mean));
}

/// Repeats the last frame of history [h, H, W] for `steps` frames.
template <class T>
Tensor<T> persistence_forecast(const Tensor<T>& history, std::size_t steps) {
    detail::require_sequence(history, "persistence history");
    if (history.extent(0) == 0) throw std::invalid_argument("persistence needs at least one observed frame");
    const std::size_t N = history.extent(1) * history.extent(2);
    auto last = history.data().subspan((history.extent(0) - 1) * N, N);
    std::vector<T> out;
    out.reserve(steps * N);
    for (std::size_t s = 0; s < steps; ++s) out.insert(out.end(), last.begin(), last.end());
    return Tensor<T>({steps, history.extent(1), history.extent(2)}, std::move(out));
}

/// Mean over the second axis of an [H, W] field, one value per row.
template <class T>
std::vector<double> zonal_average(const Tensor<T>& field) {
    if (field.rank() != 2) throw ShapeError("zonal_average expects [H, W], got " + to_string(field.shape()));
    const std::size_t H = field.extent(0), W = field.extent(1);
    auto d = field.data();
    std::vector<double> out(H, 0.0);
    for (std::size_t i = 0; i < H; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < W; ++j) s += static_cast<double>(d[i * W + j]);
        out[i] = s / static_cast<double>(W);
    }
    return out;
}

/// Frames [begin, end) of a [T, H, W] sequence.
template <class T>
Tensor<T> frames(const Tensor<T>& seq, std::size_t begin, std::size_t end) {
    detail::require_sequence(seq, "sequence");
    if (begin > end || end > seq.extent(0))
        throw ShapeError("frame range [" + std::to_string(begin) + ", " + std::to_string(end) + ") outside " +
                         to_string(seq.shape()));
    const std::size_t N = seq.extent(1) * seq.extent(2);
    auto d = seq.data().subspan(begin * N, (end - begin) * N);
    return Tensor<T>({end - begin, seq.extent(1), seq.extent(2)}, std::vector<T>(d.begin(), d.end()));
}

}  // namespace stormbench
