#pragma once

#include <cstddef>
#include <cstdint>

#include "stormbench/storage/split.hpp"
#include "stormbench/util/errors.hpp"

namespace stormbench {

struct TrainConfig {
    double lr = 1e-3;
    std::size_t batch_size = 4;
    std::size_t total_updates = 0;  // 0: derived from epochs
    std::size_t epochs = 500;
    double clip_norm = 0.0;         // 0: clipping disabled
    std::uint64_t seed = 0;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    std::size_t rollout_steps = 0;  // 0: every frame after the history
    std::size_t val_every = 1;      // epochs between validations
    SplitSpec split{};

    std::size_t updates_per_epoch() const { return (split.n_train + batch_size - 1) / batch_size; }

    std::size_t planned_updates() const {
        return total_updates ? total_updates : updates_per_epoch() * epochs;
    }

    std::size_t planned_epochs() const {
        const std::size_t per = updates_per_epoch();
        return per ? (planned_updates() + per - 1) / per : 0;
    }

    void validate() const {
        if (!(lr > 0.0)) throw ConfigError("lr must be > 0");
        if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
        if (total_updates == 0 && epochs == 0) throw ConfigError("either total_updates or epochs must be >= 1");
        if (clip_norm < 0.0) throw ConfigError("clip_norm must be > 0 when set");
        if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("adam betas must be in [0, 1)");
        if (!(eps > 0.0)) throw ConfigError("adam eps must be > 0");
        if (val_every < 1) throw ConfigError("val_every must be >= 1");
        if (split.n_train < 1) throw ConfigError("n_train must be >= 1");
    }
};

}  // namespace stormbench
