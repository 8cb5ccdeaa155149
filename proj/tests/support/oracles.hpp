#pragma once

// Test-only oracles: hand-listed parameter shapes and a circular shift.

#include <vector>

#include "stormbench/tensor.hpp"

namespace stormbench::testing {

/// Circular shift of the trailing two axes by (dy, dx).
inline Tensor<double> roll(const Tensor<double>& x, std::size_t dy, std::size_t dx) {
    const auto& s = x.shape();
    const std::size_t H = s[s.size() - 2], W = s.back(), planes = x.numel() / (H * W);
    Tensor<double> out(s);
    for (std::size_t p = 0; p < planes; ++p)
        for (std::size_t i = 0; i < H; ++i)
            for (std::size_t j = 0; j < W; ++j)
                out.mutable_data()[p * H * W + ((i + dy) % H) * W + (j + dx) % W] = x.data()[p * H * W + i * W + j];
    return out;
}

/// Independent shape-sum oracle: parameter tensors listed by hand.
inline std::size_t oracle_convlstm(std::size_t in_ch, std::vector<std::size_t> hidden) {
    std::vector<Shape> shapes;
    const std::size_t e = hidden[0];
    shapes.push_back({e, in_ch, 3, 3});
    shapes.push_back({e});
    for (int k = 0; k < 2; ++k) {
        shapes.push_back({e, e, 3, 3});
        shapes.push_back({e});
    }
    std::size_t prev = e;
    for (auto c : hidden) {
        shapes.push_back({4 * c, prev + c, 3, 3});
        shapes.push_back({4 * c});
        prev = c;
    }
    shapes.push_back({1, prev, 1, 1});
    shapes.push_back({1});
    std::size_t n = 0;
    for (auto& s : shapes) n += numel(s);
    return n;
}

inline std::size_t oracle_unet(std::size_t h, std::vector<std::size_t> c) {
    std::vector<Shape> shapes;
    std::size_t in = h;
    for (auto ch : c) {
        shapes.insert(shapes.end(), {{ch, in, 3, 3}, {ch}, {ch, ch, 3, 3}, {ch}});
        in = ch;
    }
    for (std::size_t i = c.size() - 1; i-- > 0;)
        shapes.insert(shapes.end(), {{c[i + 1], c[i], 2, 2}, {c[i]}, {c[i], 2 * c[i], 3, 3}, {c[i]}, {c[i], c[i], 3, 3}, {c[i]}});
    shapes.insert(shapes.end(), {{1, c[0], 1, 1}, {1}});
    std::size_t n = 0;
    for (auto& s : shapes) n += numel(s);
    return n;
}

inline std::size_t oracle_fno(std::size_t h, std::size_t lift, std::size_t w, std::size_t layers, std::size_t m1, std::size_t m2,
                       bool tucker) {
    std::vector<Shape> shapes{{lift, h, 1, 1}, {lift}, {w, lift, 1, 1}, {w}};
    for (std::size_t l = 0; l < layers; ++l) {
        for (int part = 0; part < 2; ++part) {
            shapes.push_back({w, w, 2 * m1, m2});
            if (tucker) shapes.insert(shapes.end(), {{w, w}, {w, w}, {2 * m1, 2 * m1}, {m2, m2}});
        }
        shapes.insert(shapes.end(), {{w, w, 1, 1}, {w}});
    }
    shapes.insert(shapes.end(), {{lift, w, 1, 1}, {lift}, {1, lift, 1, 1}, {1}});
    std::size_t n = 0;
    for (auto& s : shapes) n += numel(s);
    return n;
}

}  // namespace stormbench::testing
