#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "stormbench/models/model_config.hpp"
#include "stormbench/tensor.hpp"
#include "stormbench/util/rng.hpp"

namespace stormbench {

template <class T>
struct NamedParam {
    std::string name;
    Tensor<T> tensor;
};

/// A forecasting model phi_theta mapping h past frames to the next frame.
template <class T>
class Model {
public:
    /// Called with the 1-based step index and the predicted frame [B,1,H,W];
    /// returning false stops the rollout.
    using FrameSink = std::function<bool(std::size_t, const Tensor<T>&)>;

    explicit Model(ModelConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }
    Model(const Model&) = delete;
    Model& operator=(const Model&) = delete;
    virtual ~Model() = default;

    const ModelConfig& config() const { return cfg_; }
    std::size_t history() const { return cfg_.history; }

    std::vector<NamedParam<T>>& parameters() { return params_; }
    const std::vector<NamedParam<T>>& parameters() const { return params_; }

    Tensor<T>& param(const std::string& name) {
        for (auto& p : params_)
            if (p.name == name) return p.tensor;
        throw std::out_of_range("model has no parameter '" + name + "'");
    }

    std::size_t count_params() const {
        std::size_t n = 0;
        for (const auto& p : params_) n += p.tensor.numel();
        return n;
    }

    /// history [B,h,H,W] -> next frame [B,1,H,W].
    virtual Tensor<T> forward_step(const Tensor<T>& history) const = 0;

    /// Autoregressive rollout from ic [B,h,H,W]. The default keeps a rolling
    /// window of the h most recent frames, observed then predicted.
    virtual void rollout_each(const Tensor<T>& ic, std::size_t steps, const FrameSink& sink) const {
        check_history(ic);
        const std::size_t h = cfg_.history;
        Tensor<T> window = ic;
        for (std::size_t s = 1; s <= steps; ++s) {
            Tensor<T> next = forward_step(window);
            if (!sink(s, next)) return;
            if (s == steps) break;
            window = h == 1 ? next : concat<T>({slice_channels(window, 1, h), next});
        }
    }

    /// Predicted frames, each [B,1,H,W]. Throws BlowUpError on a non-finite frame.
    std::vector<Tensor<T>> rollout_frames(const Tensor<T>& ic, std::size_t steps) const {
        if (steps < 1) throw std::invalid_argument("rollout needs steps >= 1");
        std::vector<Tensor<T>> frames;
        frames.reserve(steps);
        rollout_each(ic, steps, [&](std::size_t s, const Tensor<T>& f) {
            for (T v : f.data())
                if (!std::isfinite(v)) throw BlowUpError("rollout produced a non-finite value", s);
            frames.push_back(f);
            return true;
        });
        return frames;
    }

    /// ic [B,h,H,W] -> [B,steps,H,W], or ic [h,H,W] -> [steps,H,W].
    Tensor<T> rollout(const Tensor<T>& ic, std::size_t steps) const {
        if (ic.rank() == 3) {
            Tensor<T> batched({1, ic.extent(0), ic.extent(1), ic.extent(2)},
                              std::vector<T>(ic.data().begin(), ic.data().end()));
            Tensor<T> out = rollout(batched, steps);
            return Tensor<T>({steps, ic.extent(1), ic.extent(2)}, std::vector<T>(out.data().begin(), out.data().end()));
        }
        auto frames = rollout_frames(ic, steps);
        return frames.size() == 1 ? frames.front() : concat<T>(frames);
    }

protected:
    void check_history(const Tensor<T>& x) const {
        if (x.rank() != 4 || x.extent(1) != cfg_.history)
            throw ShapeError("expected history [B, " + std::to_string(cfg_.history) + ", H, W], got " +
                             to_string(x.shape()));
    }

    ModelConfig cfg_;
    std::vector<NamedParam<T>> params_;
};

/// Fan-in scaled uniform U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
template <class T>
void init_fan_in(Tensor<T>& t, std::size_t fan_in, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> d(-bound, bound);
    for (auto& v : t.mutable_data()) v = static_cast<T>(d(rng));
}

/// k x k convolution with bias.
template <class T>
struct ConvLayer {
    Tensor<T> weight, bias;
    PadMode pad = PadMode::circular_both;

    Tensor<T> operator()(const Tensor<T>& x) const { return conv2d(x, weight, bias, pad); }
};

/// Appends named parameters to a model in a fixed order, drawing their
/// initial values from one seeded stream.
template <class T>
class ParamBuilder {
public:
    ParamBuilder(std::vector<NamedParam<T>>& params, std::uint64_t seed) : params_(params), rng_(seed) {}

    Tensor<T> tensor(const std::string& name, const Shape& shape) {
        params_.push_back({name, Tensor<T>(shape, true)});
        return params_.back().tensor;
    }

    ConvLayer<T> conv(const std::string& name, std::size_t cin, std::size_t cout, std::size_t k, PadMode pad) {
        ConvLayer<T> c;
        c.pad = pad;
        c.weight = tensor(name + ".weight", {cout, cin, k, k});
        c.bias = tensor(name + ".bias", {cout});
        init_fan_in(c.weight, cin * k * k, rng_);
        init_fan_in(c.bias, cin * k * k, rng_);
        return c;
    }

    Rng& rng() { return rng_; }

private:
    std::vector<NamedParam<T>>& params_;
    Rng rng_;
};

}  // namespace stormbench
