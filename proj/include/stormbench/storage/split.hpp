#pragma once

#include <cstddef>
#include <string>

#include "stormbench/util/errors.hpp"

namespace stormbench {

/// Half-open range [begin, end) of sample indices.
struct IndexRange {
    std::size_t begin = 0, end = 0;

    std::size_t size() const { return end - begin; }
    bool empty() const { return begin == end; }
    std::size_t operator[](std::size_t i) const { return begin + i; }
};

struct SplitSpec {
    std::size_t n_train = 1000, n_val = 50, n_test = 200;

    std::size_t total() const { return n_train + n_val + n_test; }
};

struct SplitViews {
    IndexRange train, val, test;
};

/// Contiguous train / val / test partition, in that order.
inline SplitViews split(std::size_t n_samples, const SplitSpec& spec) {
    if (spec.total() > n_samples)
        throw ConfigError("split " + std::to_string(spec.n_train) + "/" + std::to_string(spec.n_val) + "/" +
                          std::to_string(spec.n_test) + " needs " + std::to_string(spec.total()) +
                          " samples, dataset has " + std::to_string(n_samples));
    SplitViews v;
    v.train = {0, spec.n_train};
    v.val = {v.train.end, v.train.end + spec.n_val};
    v.test = {v.val.end, v.val.end + spec.n_test};
    return v;
}

}  // namespace stormbench
