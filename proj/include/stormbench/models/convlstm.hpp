#pragma once

#include <string>
#include <vector>

#include "stormbench/models/model.hpp"

namespace stormbench {

/// Convolutional LSTM forecaster.
///
/// Each frame passes a three-layer tanh conv encoder (1 -> E -> E -> E with
/// E = hidden[0]) and a stack of ConvLSTM cells; a 1x1 conv decodes the top
/// hidden state into the next frame. Rollouts warm the state up on the h
/// observed frames and then feed predictions back in.
template <class T>
class ConvLSTM : public Model<T> {
public:
    explicit ConvLSTM(const ModelConfig& cfg) : Model<T>(cfg) {
        if (cfg.family != Family::convlstm) throw ConfigError("ConvLSTM built with family " + to_string(cfg.family));
        hidden_ = this->cfg_.resolved_hidden();
        const PadMode pad = this->cfg_.pad;
        ParamBuilder<T> pb(this->params_, this->cfg_.seed);
        const std::size_t e = hidden_.front();
        enc_.push_back(pb.conv("enc.0", 1, e, 3, pad));
        enc_.push_back(pb.conv("enc.1", e, e, 3, pad));
        enc_.push_back(pb.conv("enc.2", e, e, 3, pad));
        std::size_t in = e;
        for (std::size_t l = 0; l < hidden_.size(); ++l) {
            cells_.push_back(pb.conv("cell." + std::to_string(l), in + hidden_[l], 4 * hidden_[l], 3, pad));
            in = hidden_[l];
        }
        dec_ = pb.conv("dec", hidden_.back(), 1, 1, pad);
    }

    Tensor<T> forward_step(const Tensor<T>& history) const override {
        Tensor<T> out;
        rollout_each(history, 1, [&](std::size_t, const Tensor<T>& f) {
            out = f;
            return false;
        });
        return out;
    }

    void rollout_each(const Tensor<T>& ic, std::size_t steps, const typename Model<T>::FrameSink& sink) const override {
        this->check_history(ic);
        const std::size_t B = ic.extent(0), H = ic.extent(2), W = ic.extent(3);
        std::vector<Tensor<T>> h(hidden_.size()), c(hidden_.size());
        for (std::size_t l = 0; l < hidden_.size(); ++l) {
            h[l] = Tensor<T>({B, hidden_[l], H, W});
            c[l] = Tensor<T>({B, hidden_[l], H, W});
        }
        Tensor<T> pred;
        for (std::size_t t = 0; t < this->cfg_.history; ++t) pred = advance(slice_channels(ic, t, t + 1), h, c);
        for (std::size_t s = 1; s <= steps; ++s) {
            if (!sink(s, pred)) return;
            if (s == steps) break;
            pred = advance(pred, h, c);
        }
    }

private:
    Tensor<T> advance(const Tensor<T>& frame, std::vector<Tensor<T>>& h, std::vector<Tensor<T>>& c) const {
        Tensor<T> x = frame;
        for (const auto& conv : enc_) x = tanh(conv(x));
        for (std::size_t l = 0; l < cells_.size(); ++l) {
            const std::size_t ch = hidden_[l];
            Tensor<T> gates = cells_[l](concat<T>({x, h[l]}));
            Tensor<T> i = sigmoid(slice_channels(gates, 0, ch));
            Tensor<T> f = sigmoid(slice_channels(gates, ch, 2 * ch));
            Tensor<T> o = sigmoid(slice_channels(gates, 2 * ch, 3 * ch));
            Tensor<T> g = tanh(slice_channels(gates, 3 * ch, 4 * ch));
            c[l] = add(mul(f, c[l]), mul(i, g));
            h[l] = mul(o, tanh(c[l]));
            x = h[l];
        }
        return dec_(x);
    }

    std::vector<std::size_t> hidden_;
    std::vector<ConvLayer<T>> enc_, cells_;
    ConvLayer<T> dec_;
};

inline std::size_t convlstm_param_count(const ModelConfig& cfg) {
    const auto hidden = cfg.resolved_hidden();
    const std::size_t e = hidden.front();
    std::size_t n = (9 * e + e) + 2 * (9 * e * e + e);
    std::size_t in = e;
    for (auto ch : hidden) {
        n += 9 * (in + ch) * 4 * ch + 4 * ch;
        in = ch;
    }
    return n + hidden.back() + 1;
}

}  // namespace stormbench
