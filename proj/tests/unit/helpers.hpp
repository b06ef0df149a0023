#pragma once

#include <cstdint>
#include <string>

#include "sketchedit/checkpoint.hpp"
#include "sketchedit/random.hpp"
#include "sketchedit/tensor.hpp"

namespace testing {

using namespace sketchedit;

/// 8x8 images, 4x4x12 latents, two narrow levels.
inline ModelConfig tiny_model(bool extra_channels = true) {
    ModelConfig m;
    m.image_size = 8;
    m.codec_factor = 2;
    m.channels = {4, 8};
    m.res_blocks = 1;
    m.time_dim = 8;
    m.vocab_size = 5;
    m.extra_channels = extra_channels;
    return m;
}

inline Vocabulary tiny_vocab() { return Vocabulary({"red", "blue", "tee", "dress"}); }

template <typename T = float>
TensorT<T> random_tensor(const Shape& s, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
    Rng rng(seed);
    TensorT<T> x(s);
    for (auto& v : x.values()) v = static_cast<T>(rng.uniform(lo, hi));
    return x;
}

/// Values on a coarse dyadic grid so that shifts and sums are exact in float.
inline Image dyadic_image(int h, int w, std::uint64_t seed) {
    Rng rng(seed);
    Image x(3, h, w);
    for (auto& v : x.values()) v = static_cast<float>(rng.uniform_int(-48, 48)) / 64.0f;
    return x;
}

inline Mask random_mask(int h, int w, std::uint64_t seed, double p_keep = 0.5) {
    Rng rng(seed);
    Mask m(1, h, w);
    for (auto& v : m.values()) v = rng.uniform() < p_keep ? 1.0f : 0.0f;
    return m;
}

/// Ones everywhere except an editable rectangle.
inline Mask box_mask(int h, int w, int y0, int x0, int y1, int x1) {
    Mask m(1, h, w, 1.0f);
    for (int i = y0; i < y1; ++i)
        for (int j = x0; j < x1; ++j) m.at(0, i, j) = 0.0f;
    return m;
}

inline Checkpoint tiny_checkpoint(int T = 10, std::uint64_t seed = 3) {
    TrainConfig train;
    train.seed = seed;
    return initial_checkpoint(tiny_model(), ScheduleConfig{T, 1e-3, 0.2}, tiny_vocab(), train);
}

}  // namespace testing
