#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

#include "sketchedit/tensor.hpp"

namespace sketchedit {

/// Deterministically folds a list of integers into one 64-bit seed.
/// Used to derive independent streams, e.g. derive_seed({global, sample, epoch}).
std::uint64_t derive_seed(std::initializer_list<std::uint64_t> parts);

/// Seeded random stream. All randomness in the library flows through
/// explicitly constructed streams; nothing reads global state.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Uniform double in [0, 1) from the top 53 bits of one draw.
    double uniform();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    /// Uniform integer in [lo, hi].
    int uniform_int(int lo, int hi);
    double normal();

    template <typename T>
    void fill_normal(TensorT<T>& x) {
        for (auto& v : x.values()) v = static_cast<T>(normal());
    }

    template <typename T>
    TensorT<T> normal_like(const Shape& shape) {
        TensorT<T> x(shape);
        fill_normal(x);
        return x;
    }

    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace sketchedit
