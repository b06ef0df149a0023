#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "sketchedit/nn.hpp"
#include "sketchedit/params.hpp"
#include "sketchedit/tensor.hpp"

namespace sketchedit {

/// Shape and width of the noise-prediction network.
struct ModelConfig {
    int image_size = 32;
    int codec_factor = 2;
    std::vector<int> channels{32, 64};  // base encoder width per resolution level
    int res_blocks = 2;                 // residual blocks per level, encoder and decoder
    int time_dim = 64;                  // sinusoidal and embedding width; text vectors share it
    int vocab_size = 1;
    /// true: condition encoder sees [x_m, m, x_s] (7 channels); false: sketch only (3).
    bool extra_channels = true;

    int latent_channels() const { return 3 * codec_factor * codec_factor; }
    int latent_size() const { return image_size / codec_factor; }
    int condition_channels() const { return extra_channels ? 7 : 3; }
    int text_dim() const { return time_dim; }
    /// Throws std::invalid_argument for inconsistent geometry.
    void validate() const;
    bool operator==(const ModelConfig&) const = default;
};

/// Intermediate activations kept for the backward pass.
template <typename T>
struct DenoiserTape;

/// Gradients with respect to the non-parameter inputs.
template <typename T>
struct DenoiserInputGrads {
    TensorT<T> d_latent;
    std::vector<T> d_text;
};

/// Epsilon-prediction U-Net with a ControlNet-style condition branch.
///
/// Base: input conv, `res_blocks` residual blocks per level with stride-2
/// downsampling, a middle block, and a decoder that concatenates encoder
/// skips. Control: a condition encoder maps the stacked condition at image
/// resolution down to latent resolution (stride-2 convs, log2 f of them);
/// its output is added to a trainable copy of the base encoder input, and
/// each level's output passes through a zero-initialised 1x1 conv into the
/// matching base skip. The time MLP output plus the text vector conditions
/// every residual block.
class Denoiser {
public:
    explicit Denoiser(ModelConfig cfg);

    const ModelConfig& config() const { return cfg_; }

    /// Empty parameter set with this architecture's layout.
    const ParamSet& layout() const { return layout_; }

    /// Fan-in scaled uniform init for weights, zero biases, all zero convs
    /// exactly 0, control encoder copied from the base encoder. Deterministic per seed.
    ParamSet init_params(std::uint64_t seed) const;

    /// Base branch only.
    template <typename T>
    TensorT<T> forward_base(const ParamSetT<T>& p, const TensorT<T>& z_t, int t, std::span<const T> text,
                            DenoiserTape<T>* tape = nullptr) const;

    /// Base + control branch; `cond` is the H x W x 7 stacked condition.
    template <typename T>
    TensorT<T> forward_controlled(const ParamSetT<T>& p, const TensorT<T>& z_t, int t, std::span<const T> text,
                                  const TensorT<T>& cond, DenoiserTape<T>* tape = nullptr) const;

    /// Backpropagates dL/d(eps_hat) through the pass recorded in `tape`,
    /// accumulating parameter gradients into `grads`.
    template <typename T>
    DenoiserInputGrads<T> backward(const ParamSetT<T>& p, const DenoiserTape<T>& tape, const TensorT<T>& d_out,
                                   ParamSetT<T>& grads) const;

    /// True for parameters belonging to the base (locked-copy) network.
    static bool is_base_param(const std::string& name);
    static bool is_zero_conv(const std::string& name);

    std::size_t text_table_index() const { return text_tokens_; }

private:
    template <typename T>
    TensorT<T> forward_impl(const ParamSetT<T>& p, const TensorT<T>& z_t, int t, std::span<const T> text,
                            const TensorT<T>* cond, DenoiserTape<T>* tape) const;

    ModelConfig cfg_;
    ParamSet layout_;

    nn::Linear time_fc1_, time_fc2_;
    nn::Conv2d in_conv_;
    std::vector<std::vector<nn::ResBlock>> enc_;  // [level][block]
    std::vector<nn::Conv2d> down_;                // level -> level + 1
    nn::ResBlock mid_;
    std::vector<std::vector<nn::ResBlock>> dec_;  // [level][block]
    std::vector<nn::Conv2d> up_;                  // up_[l] maps level l to level l - 1 (l >= 1)
    nn::Conv2d out_conv_;

    nn::Conv2d cond_in_;
    std::vector<nn::Conv2d> cond_down_;
    nn::Conv2d cond_out_;
    nn::Conv2d ctrl_in_conv_;
    std::vector<std::vector<nn::ResBlock>> ctrl_enc_;
    std::vector<nn::Conv2d> ctrl_down_;
    std::vector<nn::Conv2d> zero_convs_;

    std::size_t text_tokens_ = 0;
};

template <typename T>
struct DenoiserTape {
    bool controlled = false;
    std::vector<T> sinusoid, fc1_out, fc1_act, emb, emb_act;
    TensorT<T> z_t;
    std::vector<std::vector<typename nn::ResBlock::Cache<T>>> enc, dec, ctrl_enc;
    std::vector<TensorT<T>> down_in, up_in, ctrl_down_in, ctrl_level_out;
    typename nn::ResBlock::Cache<T> mid;
    std::vector<int> dec_concat_split;  // channels of the decoder stream before each concat
    TensorT<T> cond, cond_in_out;
    std::vector<TensorT<T>> cond_down_out;
    TensorT<T> out_pre;
};

}  // namespace sketchedit
