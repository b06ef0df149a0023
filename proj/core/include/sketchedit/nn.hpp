#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sketchedit/params.hpp"
#include "sketchedit/tensor.hpp"

// Layers with explicit forward/backward passes. A layer only stores indices
// into a ParamSetT, so one architecture serves float and double parameter sets.
namespace sketchedit::nn {

template <typename T>
T silu(T x);
template <typename T>
T silu_grad(T x);

template <typename T>
TensorT<T> silu(const TensorT<T>& x);
/// dy * silu'(x)
template <typename T>
TensorT<T> silu_backward(const TensorT<T>& x, const TensorT<T>& dy);

template <typename T>
TensorT<T> upsample2(const TensorT<T>& x);
template <typename T>
TensorT<T> upsample2_backward(const TensorT<T>& dy);

/// Square-kernel convolution with zero padding kernel/2.
struct Conv2d {
    std::size_t weight = 0;  // [out, in, k, k]
    std::size_t bias = 0;    // [out]
    int in_channels = 0;
    int out_channels = 0;
    int kernel = 3;
    int stride = 1;

    static Conv2d create(ParamSetT<float>& params, const std::string& name, int in, int out, int kernel,
                         int stride = 1);

    Shape output_shape(const Shape& in) const;
    std::size_t parameter_count() const;

    template <typename T>
    TensorT<T> forward(const ParamSetT<T>& p, const TensorT<T>& x) const;

    /// Accumulates into `grads` and returns dL/dx (skipped when need_input_grad is false).
    template <typename T>
    TensorT<T> backward(const ParamSetT<T>& p, ParamSetT<T>& grads, const TensorT<T>& x, const TensorT<T>& dy,
                        bool need_input_grad = true) const;
};

struct Linear {
    std::size_t weight = 0;  // [out, in]
    std::size_t bias = 0;    // [out]
    int in_features = 0;
    int out_features = 0;

    static Linear create(ParamSetT<float>& params, const std::string& name, int in, int out);

    template <typename T>
    std::vector<T> forward(const ParamSetT<T>& p, std::span<const T> x) const;

    template <typename T>
    std::vector<T> backward(const ParamSetT<T>& p, ParamSetT<T>& grads, std::span<const T> x,
                            std::span<const T> dy) const;
};

/// x + conv2(silu(conv1(silu(x)) + proj(emb))), with a 1x1 shortcut when widths differ.
/// `emb` passed to forward is the already-activated conditioning embedding.
struct ResBlock {
    Conv2d conv1;
    Conv2d conv2;
    Linear emb_proj;
    std::optional<Conv2d> shortcut;

    template <typename T>
    struct Cache {
        TensorT<T> x;
        TensorT<T> h1;  // conv1 output plus embedding, before activation
    };

    static ResBlock create(ParamSetT<float>& params, const std::string& name, int in, int out, int emb_dim);

    template <typename T>
    TensorT<T> forward(const ParamSetT<T>& p, const TensorT<T>& x, std::span<const T> emb,
                       Cache<T>* cache) const;

    /// Returns dL/dx; adds dL/demb into d_emb.
    template <typename T>
    TensorT<T> backward(const ParamSetT<T>& p, ParamSetT<T>& grads, const Cache<T>& cache, std::span<const T> emb,
                        const TensorT<T>& dy, std::span<T> d_emb) const;
};

/// Sinusoidal embedding of an integer step: [sin(t w_k), cos(t w_k)], w_k = 10000^(-k/(d/2)).
std::vector<double> timestep_embedding(int t, int dim);

}  // namespace sketchedit::nn
