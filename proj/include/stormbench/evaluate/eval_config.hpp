#pragma once

#include <cstddef>

#include "stormbench/util/errors.hpp"

namespace stormbench {

struct EvalConfig {
    double blowup_factor = 1e3;       // multiple of the training max |value|
    std::size_t stability_steps = 200;
    std::size_t bench_batch = 4;

    void validate() const {
        if (!(blowup_factor > 0.0)) throw ConfigError("blowup_factor must be > 0");
        if (stability_steps < 1) throw ConfigError("stability_steps must be >= 1");
        if (bench_batch < 1) throw ConfigError("bench_batch must be >= 1");
    }
};

}  // namespace stormbench
