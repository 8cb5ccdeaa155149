#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "stormbench/tensor/conv.hpp"
#include "stormbench/util/errors.hpp"

namespace stormbench {

enum class Family { fno2d, tfno2d, convlstm, unet, persistence };

inline std::string to_string(Family f) {
    switch (f) {
        case Family::fno2d: return "fno2d";
        case Family::tfno2d: return "tfno2d";
        case Family::convlstm: return "convlstm";
        case Family::unet: return "unet";
        case Family::persistence: return "persistence";
    }
    return "?";
}

inline Family parse_family(const std::string& s) {
    for (Family f : {Family::fno2d, Family::tfno2d, Family::convlstm, Family::unet, Family::persistence})
        if (to_string(f) == s) return f;
    throw ConfigError("unknown model family '" + s + "'");
}

inline bool is_fno(Family f) { return f == Family::fno2d || f == Family::tfno2d; }

/// Architecture hyperparameters.
///
/// `width` is the channel width of the FNO families. `hidden` lists the
/// channels of each ConvLSTM cell or each U-Net level; an empty list selects
/// the family default. `m1` counts retained frequencies on each side of the
/// first spectral axis (2*m1 rows in total) and `m2` the retained columns.
struct ModelConfig {
    Family family = Family::tfno2d;
    std::size_t width = 8;
    std::vector<std::size_t> hidden;
    std::size_t n_layers = 4;
    std::size_t m1 = 6;
    std::size_t m2 = 7;
    double tucker_rank_fraction = 1.0;
    std::size_t history = 10;
    std::size_t lifting = 256;
    PadMode pad = PadMode::circular_both;
    std::uint64_t seed = 0;

    std::vector<std::size_t> resolved_hidden() const {
        if (!hidden.empty()) return hidden;
        if (family == Family::convlstm) return {13, 13, 13, 13};
        if (family == Family::unet) return {3, 6, 12, 24, 48};
        return {};
    }

    void validate() const {
        if (history < 1) throw ConfigError("model history must be >= 1");
        switch (family) {
            case Family::fno2d:
            case Family::tfno2d:
                if (width < 1) throw ConfigError("fno width must be >= 1");
                if (n_layers < 1) throw ConfigError("fno n_layers must be >= 1");
                if (m1 < 1 || m2 < 1) throw ConfigError("fno modes must be >= 1");
                if (lifting < 1) throw ConfigError("fno lifting width must be >= 1");
                if (family == Family::tfno2d && !(tucker_rank_fraction > 0.0 && tucker_rank_fraction <= 1.0))
                    throw ConfigError("tucker_rank_fraction must be in (0, 1]");
                break;
            case Family::convlstm:
                for (auto c : resolved_hidden())
                    if (c < 1) throw ConfigError("convlstm hidden sizes must be >= 1");
                break;
            case Family::unet: {
                const auto h = resolved_hidden();
                if (h.size() < 2) throw ConfigError("unet needs at least two levels");
                for (auto c : h)
                    if (c < 1) throw ConfigError("unet hidden sizes must be >= 1");
                break;
            }
            case Family::persistence: break;
        }
    }

    /// Spatial constraints that depend on the grid.
    void validate_grid(std::size_t H, std::size_t W) const {
        if (is_fno(family)) {
            if (2 * m1 > H) throw ConfigError("modes m1 exceed the grid Nyquist limit");
            if (m2 > W / 2 + 1) throw ConfigError("modes m2 exceed the grid Nyquist limit");
        }
        if (family == Family::unet) {
            const std::size_t f = std::size_t{1} << (resolved_hidden().size() - 1);
            if (H % f != 0 || W % f != 0) throw ConfigError("grid must be divisible by 2^(levels-1) for unet");
        }
    }
};

}  // namespace stormbench
