#pragma once

#include <charconv>
#include <cmath>
#include <cstddef>
#include <memory>
#include <string>

#include "stormbench/models/convlstm.hpp"
#include "stormbench/models/fno.hpp"
#include "stormbench/models/model.hpp"
#include "stormbench/models/unet.hpp"
#include "stormbench/storage/checkpoint.hpp"
#include "stormbench/storage/config.hpp"

namespace stormbench {

/// Repeats the last observed frame.
template <class T>
class Persistence : public Model<T> {
public:
    explicit Persistence(const ModelConfig& cfg) : Model<T>(cfg) {}

    Tensor<T> forward_step(const Tensor<T>& history) const override {
        this->check_history(history);
        const std::size_t h = this->cfg_.history;
        return slice_channels(history, h - 1, h);
    }
};

template <class T>
std::unique_ptr<Model<T>> build_model(const ModelConfig& cfg) {
    cfg.validate();
    switch (cfg.family) {
        case Family::fno2d:
        case Family::tfno2d: return std::make_unique<FNO2d<T>>(cfg);
        case Family::convlstm: return std::make_unique<ConvLSTM<T>>(cfg);
        case Family::unet: return std::make_unique<UNet<T>>(cfg);
        case Family::persistence: return std::make_unique<Persistence<T>>(cfg);
    }
    throw ConfigError("unknown model family");
}

/// Closed-form parameter count of a config, without allocating the model.
inline std::size_t count_params(const ModelConfig& cfg) {
    cfg.validate();
    switch (cfg.family) {
        case Family::fno2d:
        case Family::tfno2d: return fno_param_count(cfg);
        case Family::convlstm: return convlstm_param_count(cfg);
        case Family::unet: return unet_param_count(cfg);
        case Family::persistence: return 0;
    }
    return 0;
}

template <class T>
std::size_t count_params(const Model<T>& model) {
    return model.count_params();
}

/// Raised when no width brings a family near the requested budget.
class UnreachableBudget : public ConfigError {
public:
    using ConfigError::ConfigError;
};

/// `base` with its width-like field set to w: the FNO width, the channels of
/// every ConvLSTM cell, or the base channels of a U-Net whose levels double.
inline ModelConfig with_width(ModelConfig base, std::size_t w) {
    switch (base.family) {
        case Family::fno2d:
        case Family::tfno2d: base.width = w; break;
        case Family::convlstm: base.hidden.assign(base.resolved_hidden().size(), w); break;
        case Family::unet: {
            const std::size_t levels = base.resolved_hidden().size();
            base.hidden.clear();
            for (std::size_t i = 0; i < levels; ++i) base.hidden.push_back(w << i);
            break;
        }
        case Family::persistence: throw ConfigError("persistence has no parameters to fit");
    }
    return base;
}

/// Config whose parameter count is nearest `budget`, searching widths upward
/// from 1 with all other fields fixed. Ties go to the smaller width.
inline ModelConfig fit_width_to_budget(const ModelConfig& base, std::size_t budget) {
    if (base.family == Family::persistence) throw ConfigError("persistence has no parameters to fit");
    std::size_t prev = count_params(with_width(base, 1));
    if (budget < prev)
        throw UnreachableBudget("budget " + std::to_string(budget) + " is below the smallest " + to_string(base.family) +
                                " (" + std::to_string(prev) + " parameters)");
    for (std::size_t w = 2;; ++w) {
        const std::size_t cur = count_params(with_width(base, w));
        if (cur >= budget) {
            const std::size_t below = budget - prev, above = cur - budget;
            return with_width(base, above < below ? w : w - 1);
        }
        prev = cur;
        if (w > (1u << 20)) throw UnreachableBudget("budget " + std::to_string(budget) + " is out of range");
    }
}

/// Parses a budget such as "5k", "500k", "32M" or "12000".
inline std::size_t parse_budget(const std::string& s) {
    if (s.empty()) throw ConfigError("empty budget");
    std::size_t mult = 1;
    std::string digits = s;
    if (s.back() == 'k' || s.back() == 'K') mult = 1000;
    if (s.back() == 'M' || s.back() == 'm') mult = 1000000;
    if (mult != 1) digits.pop_back();
    double v = 0;
    auto [p, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), v);
    if (ec != std::errc() || p != digits.data() + digits.size() || !(v > 0))
        throw ConfigError("invalid budget '" + s + "'");
    return static_cast<std::size_t>(std::llround(v * static_cast<double>(mult)));
}

/// Parameters in the model's precision plus the experiment config text.
template <class T>
Checkpoint to_checkpoint(const Model<T>& model, const ExperimentConfig& exp) {
    Checkpoint ck;
    ck.dtype = std::is_same_v<T, double> ? DType::f64 : DType::f32;
    ck.seed = model.config().seed;
    ExperimentConfig e = exp;
    e.model = model.config();
    ck.text["config"] = dump_config(e);
    for (const auto& p : model.parameters())
        ck.params.push_back({p.name, p.tensor.shape(), std::vector<double>(p.tensor.data().begin(), p.tensor.data().end())});
    return ck;
}

/// Copies checkpoint values into a model with the same architecture.
template <class T>
void load_parameters(Model<T>& model, const Checkpoint& ck) {
    for (auto& p : model.parameters()) {
        const ParamRecord& r = ck.param(p.name);
        if (r.shape != p.tensor.shape())
            throw FormatError("parameter '" + p.name + "' has shape " + to_string(r.shape) + ", model expects " +
                              to_string(p.tensor.shape()));
        auto d = p.tensor.mutable_data();
        for (std::size_t i = 0; i < d.size(); ++i) d[i] = static_cast<T>(r.values[i]);
    }
}

template <class T>
struct LoadedModel {
    ExperimentConfig config;
    std::unique_ptr<Model<T>> model;
};

template <class T>
LoadedModel<T> load_model(const std::string& path) {
    Checkpoint ck = read_checkpoint(path);
    auto it = ck.text.find("config");
    if (it == ck.text.end()) throw FormatError(path + ": checkpoint lacks its config record");
    LoadedModel<T> out{parse_config(it->second), nullptr};
    out.model = build_model<T>(out.config.model);
    load_parameters(*out.model, ck);
    return out;
}

template <class T>
void save_model(const std::string& path, const Model<T>& model, const ExperimentConfig& exp) {
    write_checkpoint(path, to_checkpoint(model, exp));
}

}  // namespace stormbench
