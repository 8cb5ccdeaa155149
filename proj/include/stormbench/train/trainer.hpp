#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "stormbench/evaluate/forecast.hpp"
#include "stormbench/models/model.hpp"
#include "stormbench/storage/dataset.hpp"
#include "stormbench/storage/split.hpp"
#include "stormbench/train/optim.hpp"
#include "stormbench/train/train_config.hpp"
#include "stormbench/util/format.hpp"
#include "stormbench/util/rng.hpp"

namespace stormbench {

struct EpochRecord {
    std::size_t epoch = 0;
    double val_rmse = std::numeric_limits<double>::quiet_NaN();        // rollout mean
    double val_final_rmse = std::numeric_limits<double>::quiet_NaN();  // last lead
    double seconds = 0.0;
};

struct TrainHistory {
    std::vector<double> loss, lr;  // one entry per update
    std::vector<EpochRecord> epochs;
    bool unstable = false;
    std::string instability;
    std::optional<std::size_t> failed_update;  // 1-based
    std::optional<std::size_t> best_epoch;
    double best_val_rmse = std::numeric_limits<double>::infinity();
    std::size_t rollout_steps = 0;
    std::size_t peak_tape_bytes = 0;

    std::size_t updates() const { return loss.size(); }
};

/// Samples [range.begin, range.end) of a dataset as [T, H, W] tensors.
template <class T>
std::vector<Tensor<T>> load_samples(const DatasetReader& reader, IndexRange range) {
    std::vector<Tensor<T>> out;
    out.reserve(range.size());
    for (std::size_t i = range.begin; i < range.end; ++i) {
        if constexpr (std::is_same_v<T, double>)
            out.push_back(reader.sample(i));
        else
            out.push_back(reader.sample(i).template cast<T>());
    }
    return out;
}

namespace detail {

/// Frames [offset, offset + count) of the chosen sequences as [B, count, H, W].
template <class T>
Tensor<T> gather_frames(const std::vector<Tensor<T>>& seqs, const std::vector<std::size_t>& idx,
                        const std::vector<std::size_t>& offsets, std::size_t shift, std::size_t count) {
    const auto& s0 = seqs[idx.front()];
    const std::size_t N = s0.extent(1) * s0.extent(2);
    std::vector<T> buf;
    buf.reserve(idx.size() * count * N);
    for (std::size_t b = 0; b < idx.size(); ++b) {
        auto d = seqs[idx[b]].data().subspan((offsets[b] + shift) * N, count * N);
        buf.insert(buf.end(), d.begin(), d.end());
    }
    return Tensor<T>({idx.size(), count, s0.extent(1), s0.extent(2)}, std::move(buf));
}

template <class T>
std::vector<std::vector<T>> snapshot(const std::vector<NamedParam<T>>& params) {
    std::vector<std::vector<T>> out;
    for (const auto& p : params) out.emplace_back(p.tensor.data().begin(), p.tensor.data().end());
    return out;
}

template <class T>
void restore(std::vector<NamedParam<T>>& params, const std::vector<std::vector<T>>& values) {
    for (std::size_t k = 0; k < params.size(); ++k) std::copy(values[k].begin(), values[k].end(), params[k].tensor.mutable_data().begin());
}

}  // namespace detail

/// Called after every epoch with the latest record.
using EpochCallback = std::function<void(const EpochRecord&, const TrainHistory&)>;

/// Trains `model` in place on [T, H, W] sequences with Adam and a cosine
/// schedule. Each update rolls the model out from h observed frames and
/// backpropagates the MSE over every predicted frame. When the rollout is
/// shorter than T - h, each sample's window start is drawn at random.
///
/// On return the model holds the parameters with the best validation RMSE
/// (or the final ones when there is no validation split). A non-finite loss
/// or gradient ends training and marks the run unstable.
template <class T>
TrainHistory train(Model<T>& model, const std::vector<Tensor<T>>& train_set, const std::vector<Tensor<T>>& val_set,
                   const TrainConfig& cfg, const EpochCallback& on_epoch = {}) {
    cfg.validate();
    if (model.count_params() == 0) throw ConfigError(to_string(model.config().family) + " has nothing to train");
    if (train_set.empty()) throw ConfigError("empty training split");
    const std::size_t h = model.history();
    const std::size_t frames_per_seq = train_set.front().extent(0);
    if (frames_per_seq <= h)
        throw ConfigError("sequences of " + std::to_string(frames_per_seq) + " frames are too short for history " +
                          std::to_string(h));
    const std::size_t max_steps = frames_per_seq - h;
    const std::size_t steps = cfg.rollout_steps ? cfg.rollout_steps : max_steps;
    if (steps > max_steps)
        throw ConfigError("rollout_steps " + std::to_string(steps) + " exceeds the " + std::to_string(max_steps) +
                          " frames available after the history");

    const std::size_t n = train_set.size();
    const std::size_t per_epoch = (n + cfg.batch_size - 1) / cfg.batch_size;
    const std::size_t total = cfg.total_updates ? cfg.total_updates : per_epoch * cfg.epochs;
    const AdamParams hp{cfg.beta1, cfg.beta2, cfg.eps};

    TrainHistory hist;
    hist.rollout_steps = steps;
    hist.loss.reserve(total);
    hist.lr.reserve(total);
    AdamState<T> adam;
    auto& params = model.parameters();
    std::optional<std::vector<std::vector<T>>> best;
    auto& tape = Tape<T>::current();
    tape.clear();
    tape.reset_peak();

    std::size_t u = 0;
    for (std::size_t epoch = 1; u < total && !hist.unstable; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        Rng rng(mix_seed(cfg.seed, epoch));
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), rng);
        std::uniform_int_distribution<std::size_t> offset_dist(0, max_steps - steps);

        for (std::size_t first = 0; first < n && u < total; first += cfg.batch_size) {
            std::vector<std::size_t> idx(order.begin() + first, order.begin() + std::min(n, first + cfg.batch_size));
            std::vector<std::size_t> offsets(idx.size());
            for (auto& o : offsets) o = offset_dist(rng);
            const Tensor<T> x = detail::gather_frames(train_set, idx, offsets, 0, h);
            const Tensor<T> y = detail::gather_frames(train_set, idx, offsets, h, steps);
            const double lr = cosine_lr(u, total, cfg.lr);
            try {
                auto pred = model.rollout_frames(x, steps);
                Tensor<T> loss = mse(pred.size() == 1 ? pred.front() : concat<T>(pred), y);
                if (!std::isfinite(loss.item())) throw BlowUpError("training loss is not finite", steps);
                backward(loss);
                if (cfg.clip_norm > 0.0) clip_grad_norm(params, cfg.clip_norm);
                adam_step(params, adam, lr, hp);
                zero_grads(params);
                hist.loss.push_back(static_cast<double>(loss.item()));
                hist.lr.push_back(lr);
                ++u;
            } catch (const std::runtime_error& e) {
                if (!dynamic_cast<const BlowUpError*>(&e) && !dynamic_cast<const NonFiniteGradient*>(&e)) throw;
                tape.clear();
                zero_grads(params);
                hist.unstable = true;
                hist.instability = e.what();
                hist.failed_update = u + 1;
                break;
            }
        }

        EpochRecord rec;
        rec.epoch = epoch;
        const bool validate_now = !val_set.empty() && !hist.unstable && (epoch % cfg.val_every == 0 || u == total);
        if (validate_now) {
            const ForecastScores s = score_forecasts<T>(model, val_set, nullptr, cfg.batch_size);
            rec.val_rmse = s.rmse.mean;
            rec.val_final_rmse = s.rmse.final();
            if (rec.val_rmse < hist.best_val_rmse) {
                hist.best_val_rmse = rec.val_rmse;
                hist.best_epoch = epoch;
                best = detail::snapshot(params);
            }
        }
        rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        hist.epochs.push_back(rec);
        if (on_epoch) on_epoch(rec, hist);
    }
    if (best) detail::restore(params, *best);
    hist.peak_tape_bytes = tape.peak_bytes();
    return hist;
}

/// (update, loss, lr) and (epoch, val_rmse, val_final_rmse, seconds) tables.
inline void write_history_csv(const TrainHistory& hist, const std::string& updates_path, const std::string& epochs_path) {
    std::ofstream u(updates_path);
    if (!u) throw std::runtime_error("cannot write " + updates_path);
    u << "update,loss,lr\n";
    for (std::size_t i = 0; i < hist.loss.size(); ++i)
        u << i + 1 << ',' << format_double(hist.loss[i]) << ',' << format_double(hist.lr[i]) << '\n';
    std::ofstream e(epochs_path);
    if (!e) throw std::runtime_error("cannot write " + epochs_path);
    e << "epoch,val_rmse,val_final_rmse,seconds\n";
    for (const auto& r : hist.epochs)
        e << r.epoch << ',' << format_double(r.val_rmse) << ',' << format_double(r.val_final_rmse) << ','
          << format_double(r.seconds) << '\n';
}

}  // namespace stormbench
