#pragma once

#include <string>
#include <vector>

#include "stormbench/models/model.hpp"

namespace stormbench {

/// U-Net over the channel-stacked history.
///
/// Level i has hidden[i] channels and two 3x3 conv + ReLU layers. Encoder
/// levels are separated by 2x2 average pooling; each decoder level upsamples
/// with a stride-2 transposed conv to hidden[i], concatenates the encoder skip
/// and applies two more conv + ReLU layers. A 1x1 conv gives the output frame.
template <class T>
class UNet : public Model<T> {
public:
    explicit UNet(const ModelConfig& cfg) : Model<T>(cfg) {
        if (cfg.family != Family::unet) throw ConfigError("UNet built with family " + to_string(cfg.family));
        hidden_ = this->cfg_.resolved_hidden();
        const PadMode pad = this->cfg_.pad;
        ParamBuilder<T> pb(this->params_, this->cfg_.seed);
        std::size_t in = this->cfg_.history;
        for (std::size_t i = 0; i < hidden_.size(); ++i) {
            const std::string n = "down." + std::to_string(i);
            down_.push_back({pb.conv(n + ".0", in, hidden_[i], 3, pad), pb.conv(n + ".1", hidden_[i], hidden_[i], 3, pad)});
            in = hidden_[i];
        }
        for (std::size_t i = hidden_.size() - 1; i-- > 0;) {
            const std::string n = "up." + std::to_string(i);
            Up u;
            u.weight = pb.tensor(n + ".tconv.weight", {hidden_[i + 1], hidden_[i], 2, 2});
            u.bias = pb.tensor(n + ".tconv.bias", {hidden_[i]});
            init_fan_in(u.weight, hidden_[i + 1] * 4, pb.rng());
            init_fan_in(u.bias, hidden_[i + 1] * 4, pb.rng());
            u.convs = {pb.conv(n + ".0", 2 * hidden_[i], hidden_[i], 3, pad), pb.conv(n + ".1", hidden_[i], hidden_[i], 3, pad)};
            up_.push_back(std::move(u));
        }
        out_ = pb.conv("out", hidden_.front(), 1, 1, pad);
    }

    Tensor<T> forward_step(const Tensor<T>& history) const override {
        this->check_history(history);
        this->cfg_.validate_grid(history.extent(2), history.extent(3));
        std::vector<Tensor<T>> skips;
        Tensor<T> x = history;
        for (std::size_t i = 0; i < down_.size(); ++i) {
            if (i > 0) x = avgpool2(x);
            x = relu(down_[i][1](relu(down_[i][0](x))));
            skips.push_back(x);
        }
        for (std::size_t k = 0; k < up_.size(); ++k) {
            const std::size_t level = hidden_.size() - 2 - k;
            const Up& u = up_[k];
            x = conv_transpose2_stride2(x, u.weight, u.bias);
            x = concat<T>({x, skips[level]});
            x = relu(u.convs[1](relu(u.convs[0](x))));
        }
        return out_(x);
    }

private:
    struct Up {
        Tensor<T> weight, bias;
        std::vector<ConvLayer<T>> convs;
    };

    std::vector<std::size_t> hidden_;
    std::vector<std::vector<ConvLayer<T>>> down_;
    std::vector<Up> up_;
    ConvLayer<T> out_;
};

inline std::size_t unet_param_count(const ModelConfig& cfg) {
    const auto hidden = cfg.resolved_hidden();
    auto conv = [](std::size_t cin, std::size_t cout, std::size_t k) { return cin * cout * k * k + cout; };
    std::size_t n = 0, in = cfg.history;
    for (auto c : hidden) {
        n += conv(in, c, 3) + conv(c, c, 3);
        in = c;
    }
    for (std::size_t i = 0; i + 1 < hidden.size(); ++i)
        n += conv(hidden[i + 1], hidden[i], 2) + conv(2 * hidden[i], hidden[i], 3) + conv(hidden[i], hidden[i], 3);
    return n + conv(hidden.front(), 1, 1);
}

}  // namespace stormbench
