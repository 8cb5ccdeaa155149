#pragma once

#include <chrono>
#include <cstddef>
#include <vector>

#include "stormbench/models/build.hpp"
#include "stormbench/train/trainer.hpp"

namespace stormbench {

struct BenchRecord {
    std::size_t batch = 0;
    std::size_t updates = 0;
    double seconds_per_epoch = 0.0;
    std::size_t param_bytes = 0;
    std::size_t optimizer_bytes = 0;
    std::size_t activation_bytes = 0;  // peak tape footprint of one update

    std::size_t peak_mem_bytes() const { return param_bytes + optimizer_bytes + activation_bytes; }
};

/// Times one training epoch of a fresh model built from `cfg` at the given
/// batch size, after one warm-up update. Memory is an analytic estimate:
/// parameters, Adam moments and the tape's peak activation footprint.
/// Models without parameters time a forward-only pass over the epoch.
template <class T>
BenchRecord bench(const ModelConfig& cfg, const std::vector<Tensor<T>>& train_set, TrainConfig tc, std::size_t batch) {
    if (train_set.empty()) throw ConfigError("bench needs training sequences");
    tc.batch_size = batch;
    tc.split.n_train = train_set.size();
    BenchRecord r;
    r.batch = batch;
    auto model = build_model<T>(cfg);
    const std::size_t n_params = model->count_params();
    r.param_bytes = n_params * sizeof(T);

    if (n_params == 0) {
        const std::size_t h = model->history();
        const std::size_t steps = tc.rollout_steps ? tc.rollout_steps : train_set.front().extent(0) - h;
        NoGradGuard no_grad;
        const auto t0 = std::chrono::steady_clock::now();
        for (std::size_t first = 0; first < train_set.size(); first += batch, ++r.updates) {
            const std::size_t n = std::min(batch, train_set.size() - first);
            model->rollout_frames(stack_history(train_set, first, n, h), steps);
        }
        r.seconds_per_epoch = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        return r;
    }

    TrainConfig warm = tc;
    warm.total_updates = 1;
    train(*model, train_set, {}, warm);
    tc.total_updates = tc.updates_per_epoch();
    const auto t0 = std::chrono::steady_clock::now();
    const TrainHistory h = train(*model, train_set, {}, tc);
    r.seconds_per_epoch = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    r.updates = h.updates();
    r.optimizer_bytes = 2 * n_params * sizeof(T);
    r.activation_bytes = h.peak_tape_bytes;
    return r;
}

}  // namespace stormbench
