#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "stormbench/models/model.hpp"

namespace stormbench {

/// Fourier neural operator for 2D fields.
///
/// Lifting h -> lifting -> width (pointwise), n_layers blocks of
/// gelu(spectral(x) + conv1x1(x)), projection width -> lifting -> 1.
/// Spectral weights have shape [width, width, 2*m1, m2]; with the Tucker
/// variant each one is a complex core times four complex factor matrices.
template <class T>
class FNO2d : public Model<T> {
public:
    explicit FNO2d(const ModelConfig& cfg) : Model<T>(cfg) {
        if (!is_fno(cfg.family)) throw ConfigError("FNO2d built with family " + to_string(cfg.family));
        const auto& c = this->cfg_;
        ParamBuilder<T> pb(this->params_, c.seed);
        const PadMode pad = c.pad;
        lift1_ = pb.conv("lift.0", c.history, c.lifting, 1, pad);
        lift2_ = pb.conv("lift.1", c.lifting, c.width, 1, pad);
        const Shape wshape{c.width, c.width, 2 * c.m1, c.m2};
        const double scale = 1.0 / static_cast<double>(c.width * c.width);
        for (std::size_t l = 0; l < c.n_layers; ++l) {
            const std::string name = "block." + std::to_string(l);
            Block b;
            if (c.family == Family::fno2d) {
                b.weight = {pb.tensor(name + ".spectral.re", wshape), pb.tensor(name + ".spectral.im", wshape)};
                init_spectral(b.weight, scale, pb.rng());
            } else {
                Shape ranks = tucker_ranks(c);
                b.core = {pb.tensor(name + ".core.re", ranks), pb.tensor(name + ".core.im", ranks)};
                // Dense-equivalent start: core carries the values embedded in
                // its leading block, factors start as truncated identities.
                ComplexTensor<T> dense = ComplexTensor<T>::zeros(wshape);
                init_spectral(dense, scale, pb.rng());
                embed_core(dense, b.core);
                for (std::size_t a = 0; a < 4; ++a) {
                    const Shape fs{wshape[a], ranks[a]};
                    const std::string fname = name + ".factor" + std::to_string(a);
                    b.factors[a] = {pb.tensor(fname + ".re", fs), pb.tensor(fname + ".im", fs)};
                    auto d = b.factors[a].re.mutable_data();
                    for (std::size_t i = 0; i < std::min(fs[0], fs[1]); ++i) d[i * fs[1] + i] = T(1);
                }
            }
            b.skip = pb.conv(name + ".skip", c.width, c.width, 1, pad);
            blocks_.push_back(std::move(b));
        }
        proj1_ = pb.conv("proj.0", c.width, c.lifting, 1, pad);
        proj2_ = pb.conv("proj.1", c.lifting, 1, 1, pad);
    }

    /// Per-axis Tucker ranks, round(fraction * extent) clamped to [1, extent].
    static Shape tucker_ranks(const ModelConfig& c) {
        const Shape ext{c.width, c.width, 2 * c.m1, c.m2};
        Shape r(4);
        for (std::size_t a = 0; a < 4; ++a) {
            const auto v = static_cast<std::size_t>(std::llround(c.tucker_rank_fraction * static_cast<double>(ext[a])));
            r[a] = std::clamp<std::size_t>(v, 1, ext[a]);
        }
        return r;
    }

    /// Dense spectral weight of block `l` [width, width, 2*m1, m2].
    ComplexTensor<T> spectral_weight(std::size_t l) const {
        const Block& b = blocks_.at(l);
        if (this->cfg_.family == Family::fno2d) return b.weight;
        ComplexTensor<T> w = b.core;
        for (std::size_t a = 0; a < 4; ++a) w = mode_product(w, b.factors[a], a);
        return w;
    }

    Tensor<T> forward_step(const Tensor<T>& history) const override {
        this->check_history(history);
        this->cfg_.validate_grid(history.extent(2), history.extent(3));
        Tensor<T> x = lift2_(gelu(lift1_(history)));
        for (std::size_t l = 0; l < blocks_.size(); ++l) {
            const ComplexTensor<T> spec = ifft2(spectral_mul(fft2(x), spectral_weight(l)));
            x = gelu(add(spec.re, blocks_[l].skip(x)));
        }
        return proj2_(gelu(proj1_(x)));
    }

private:
    struct Block {
        ComplexTensor<T> weight;                  // fno2d
        ComplexTensor<T> core;                    // tfno2d
        std::array<ComplexTensor<T>, 4> factors;  // tfno2d
        ConvLayer<T> skip;
    };

    static void init_spectral(ComplexTensor<T>& w, double scale, Rng& rng) {
        std::uniform_real_distribution<double> d(0.0, 1.0);
        auto re = w.re.mutable_data();
        auto im = w.im.mutable_data();
        for (std::size_t i = 0; i < re.size(); ++i) {
            re[i] = static_cast<T>(scale * d(rng));
            im[i] = static_cast<T>(scale * d(rng));
        }
    }

    static void embed_core(const ComplexTensor<T>& dense, ComplexTensor<T>& core) {
        const Shape& ds = dense.shape();
        const Shape& cs = core.shape();
        for (std::size_t i = 0; i < cs[0]; ++i)
            for (std::size_t j = 0; j < cs[1]; ++j)
                for (std::size_t k = 0; k < cs[2]; ++k)
                    for (std::size_t m = 0; m < cs[3]; ++m) {
                        const std::size_t src = ((i * ds[1] + j) * ds[2] + k) * ds[3] + m;
                        const std::size_t dst = ((i * cs[1] + j) * cs[2] + k) * cs[3] + m;
                        core.re.mutable_data()[dst] = dense.re.data()[src];
                        core.im.mutable_data()[dst] = dense.im.data()[src];
                    }
    }

    ConvLayer<T> lift1_, lift2_, proj1_, proj2_;
    std::vector<Block> blocks_;
};

/// Parameter count of an FNO family config without building it.
inline std::size_t fno_param_count(const ModelConfig& c) {
    const std::size_t conv1 = c.history * c.lifting + c.lifting + c.lifting * c.width + c.width;
    const std::size_t proj = c.width * c.lifting + c.lifting + c.lifting + 1;
    const std::size_t skip = c.width * c.width + c.width;
    std::size_t spectral = 0;
    if (c.family == Family::fno2d) {
        spectral = 2 * c.width * c.width * 2 * c.m1 * c.m2;
    } else {
        const Shape ext{c.width, c.width, 2 * c.m1, c.m2};
        const Shape r = FNO2d<float>::tucker_ranks(c);
        spectral = 2 * r[0] * r[1] * r[2] * r[3];
        for (std::size_t a = 0; a < 4; ++a) spectral += 2 * ext[a] * r[a];
    }
    return conv1 + proj + c.n_layers * (spectral + skip);
}

}  // namespace stormbench
