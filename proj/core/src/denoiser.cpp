#include "sketchedit/denoiser.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "sketchedit/conditioning.hpp"
#include "sketchedit/random.hpp"

namespace sketchedit {

namespace {

int log2_exact(int v) {
    int k = 0;
    while ((1 << k) < v) ++k;
    return (1 << k) == v ? k : -1;
}

bool ends_with(const std::string& s, std::string_view suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

std::string level_name(const char* prefix, int l) { return std::string(prefix) + std::to_string(l); }

}  // namespace

void ModelConfig::validate() const {
    if (channels.empty()) throw std::invalid_argument("ModelConfig: channels must be non-empty");
    for (int c : channels)
        if (c <= 0) throw std::invalid_argument("ModelConfig: channel widths must be positive");
    if (codec_factor < 1 || log2_exact(codec_factor) < 0) {
        throw std::invalid_argument("ModelConfig: codec_factor must be a power of two");
    }
    if (image_size <= 0 || image_size % codec_factor != 0) {
        throw std::invalid_argument("ModelConfig: image_size must be a positive multiple of codec_factor");
    }
    const int levels = static_cast<int>(channels.size());
    if (latent_size() % (1 << (levels - 1)) != 0) {
        throw std::invalid_argument("ModelConfig: latent size " + std::to_string(latent_size()) +
                                    " not divisible by 2^(levels-1)");
    }
    if (res_blocks < 1) throw std::invalid_argument("ModelConfig: res_blocks must be >= 1");
    if (time_dim < 2 || time_dim % 2 != 0) throw std::invalid_argument("ModelConfig: time_dim must be even");
    if (vocab_size < 1) throw std::invalid_argument("ModelConfig: vocab_size must be >= 1");
}

Denoiser::Denoiser(ModelConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    const int levels = static_cast<int>(cfg_.channels.size());
    const auto& ch = cfg_.channels;
    const int d = cfg_.time_dim;
    auto& p = layout_;

    time_fc1_ = nn::Linear::create(p, "base.time.fc1", d, d);
    time_fc2_ = nn::Linear::create(p, "base.time.fc2", d, d);
    in_conv_ = nn::Conv2d::create(p, "base.in", cfg_.latent_channels(), ch[0], 3);
    enc_.resize(levels);
    for (int l = 0; l < levels; ++l) {
        for (int r = 0; r < cfg_.res_blocks; ++r) {
            enc_[l].push_back(nn::ResBlock::create(p, level_name("base.enc", l) + ".rb" + std::to_string(r), ch[l], ch[l], d));
        }
        if (l + 1 < levels) down_.push_back(nn::Conv2d::create(p, level_name("base.down", l), ch[l], ch[l + 1], 3, 2));
    }
    mid_ = nn::ResBlock::create(p, "base.mid", ch[levels - 1], ch[levels - 1], d);
    dec_.resize(levels);
    up_.resize(levels);
    for (int l = levels - 1; l >= 0; --l) {
        for (int r = 0; r < cfg_.res_blocks; ++r) {
            dec_[l].push_back(nn::ResBlock::create(p, level_name("base.dec", l) + ".rb" + std::to_string(r),
                                                   r == 0 ? 2 * ch[l] : ch[l], ch[l], d));
        }
        if (l > 0) up_[l] = nn::Conv2d::create(p, level_name("base.up", l), ch[l], ch[l - 1], 3);
    }
    out_conv_ = nn::Conv2d::create(p, "base.out", ch[0], cfg_.latent_channels(), 3);

    text_tokens_ = p.add("text.tokens", {cfg_.vocab_size, d});

    cond_in_ = nn::Conv2d::create(p, "ctrl.cond.in", cfg_.condition_channels(), ch[0], 3);
    for (int k = 0; k < log2_exact(cfg_.codec_factor); ++k) {
        cond_down_.push_back(nn::Conv2d::create(p, level_name("ctrl.cond.down", k), ch[0], ch[0], 3, 2));
    }
    cond_out_ = nn::Conv2d::create(p, "ctrl.cond.out", ch[0], ch[0], 3);
    ctrl_in_conv_ = nn::Conv2d::create(p, "ctrl.in", cfg_.latent_channels(), ch[0], 3);
    ctrl_enc_.resize(levels);
    for (int l = 0; l < levels; ++l) {
        for (int r = 0; r < cfg_.res_blocks; ++r) {
            ctrl_enc_[l].push_back(
                nn::ResBlock::create(p, level_name("ctrl.enc", l) + ".rb" + std::to_string(r), ch[l], ch[l], d));
        }
        zero_convs_.push_back(nn::Conv2d::create(p, level_name("ctrl.zero", l), ch[l], ch[l], 1));
        if (l + 1 < levels) {
            ctrl_down_.push_back(nn::Conv2d::create(p, level_name("ctrl.down", l), ch[l], ch[l + 1], 3, 2));
        }
    }
}

bool Denoiser::is_base_param(const std::string& name) { return name.rfind("base.", 0) == 0; }

bool Denoiser::is_zero_conv(const std::string& name) { return name.rfind("ctrl.zero", 0) == 0; }

ParamSet Denoiser::init_params(std::uint64_t seed) const {
    ParamSet p = layout_.zeros_like();
    Rng rng(derive_seed({seed, 0xD0E5ULL}));
    for (auto& t : p) {
        if (is_zero_conv(t.name) || ends_with(t.name, ".bias")) continue;
        if (t.name == "text.tokens") {
            for (auto& v : t.values) v = static_cast<float>(0.5 * rng.normal());
            continue;
        }
        std::size_t fan_in = 1;
        for (std::size_t k = 1; k < t.shape.size(); ++k) fan_in *= static_cast<std::size_t>(t.shape[k]);
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        for (auto& v : t.values) v = static_cast<float>(rng.uniform(-bound, bound));
    }
    // The control encoder starts as a copy of the base encoder.
    for (auto& t : p) {
        if (t.name.rfind("ctrl.", 0) != 0) continue;
        const std::string twin = "base." + t.name.substr(5);
        if (p.contains(twin) && p[twin].shape == t.shape) t.values = p[twin].values;
    }
    return p;
}

template <typename T>
TensorT<T> Denoiser::forward_base(const ParamSetT<T>& p, const TensorT<T>& z_t, int t, std::span<const T> text,
                                  DenoiserTape<T>* tape) const {
    return forward_impl<T>(p, z_t, t, text, nullptr, tape);
}

template <typename T>
TensorT<T> Denoiser::forward_controlled(const ParamSetT<T>& p, const TensorT<T>& z_t, int t,
                                        std::span<const T> text, const TensorT<T>& cond,
                                        DenoiserTape<T>* tape) const {
    return forward_impl<T>(p, z_t, t, text, &cond, tape);
}

template <typename T>
TensorT<T> Denoiser::forward_impl(const ParamSetT<T>& p, const TensorT<T>& z_t, int t, std::span<const T> text,
                                  const TensorT<T>* cond, DenoiserTape<T>* tape) const {
    const int levels = static_cast<int>(cfg_.channels.size());
    const int ls = cfg_.latent_size();
    require_same_shape(z_t.shape(), Shape{cfg_.latent_channels(), ls, ls}, "denoiser latent");
    if (static_cast<int>(text.size()) != cfg_.text_dim()) {
        throw std::invalid_argument("denoiser: text embedding has " + std::to_string(text.size()) + " values, expected " +
                                    std::to_string(cfg_.text_dim()));
    }
    if (cond && (cond->channels() != kCondChannels || cond->height() != cfg_.image_size ||
                 cond->width() != cfg_.image_size)) {
        throw std::invalid_argument("denoiser: condition must be " + std::to_string(cfg_.image_size) + "x" +
                                    std::to_string(cfg_.image_size) + "x7, got " + cond->shape().str());
    }
    DenoiserTape<T> local;
    DenoiserTape<T>& tp = tape ? *tape : local;
    const bool keep = tape != nullptr;
    tp.controlled = cond != nullptr;

    // Time + text embedding.
    const auto sin64 = nn::timestep_embedding(t, cfg_.time_dim);
    std::vector<T> sinus(sin64.begin(), sin64.end());
    std::vector<T> f1 = time_fc1_.forward(p, std::span<const T>(sinus));
    std::vector<T> a1(f1.size());
    for (std::size_t k = 0; k < f1.size(); ++k) a1[k] = nn::silu(f1[k]);
    std::vector<T> emb = time_fc2_.forward(p, std::span<const T>(a1));
    for (std::size_t k = 0; k < emb.size(); ++k) emb[k] += text[k];
    std::vector<T> emb_act(emb.size());
    for (std::size_t k = 0; k < emb.size(); ++k) emb_act[k] = nn::silu(emb[k]);
    const std::span<const T> e(emb_act);

    auto cache_slot = [&](std::vector<std::vector<typename nn::ResBlock::Cache<T>>>& v, int l, int r)
        -> typename nn::ResBlock::Cache<T>* {
        if (!keep) return nullptr;
        if (static_cast<int>(v.size()) < levels) v.resize(levels);
        if (static_cast<int>(v[l].size()) < cfg_.res_blocks) v[l].resize(cfg_.res_blocks);
        return &v[l][r];
    };
    if (keep) {
        tp.enc.assign(levels, {});
        tp.dec.assign(levels, {});
        tp.ctrl_enc.assign(levels, {});
        tp.down_in.assign(levels, {});
        tp.up_in.assign(levels, {});
        tp.ctrl_down_in.assign(levels, {});
        tp.ctrl_level_out.assign(levels, {});
        tp.dec_concat_split.assign(levels, 0);
        tp.cond_down_out.clear();
    }

    // Base encoder.
    TensorT<T> h = in_conv_.forward(p, z_t);
    std::vector<TensorT<T>> skips(levels);
    for (int l = 0; l < levels; ++l) {
        for (int r = 0; r < cfg_.res_blocks; ++r) h = enc_[l][r].forward(p, h, e, cache_slot(tp.enc, l, r));
        skips[l] = h;
        if (l + 1 < levels) {
            if (keep) tp.down_in[l] = h;
            h = down_[l].forward(p, h);
        }
    }

    // Control branch.
    if (cond) {
        TensorT<T> ci = cfg_.extra_channels ? *cond : slice_channels(*cond, kCondSketch, 3);
        TensorT<T> c = cond_in_.forward(p, ci);
        if (keep) {
            tp.cond = std::move(ci);
            tp.cond_in_out = c;
        }
        c = nn::silu(c);
        for (const auto& layer : cond_down_) {
            c = layer.forward(p, c);
            if (keep) tp.cond_down_out.push_back(c);
            c = nn::silu(c);
        }
        const TensorT<T> cf = cond_out_.forward(p, c);
        TensorT<T> hc = ctrl_in_conv_.forward(p, z_t);
        for (std::size_t i = 0; i < hc.size(); ++i) hc[i] += cf[i];
        for (int l = 0; l < levels; ++l) {
            for (int r = 0; r < cfg_.res_blocks; ++r) hc = ctrl_enc_[l][r].forward(p, hc, e, cache_slot(tp.ctrl_enc, l, r));
            const TensorT<T> injected = zero_convs_[l].forward(p, hc);
            for (std::size_t i = 0; i < injected.size(); ++i) skips[l][i] += injected[i];
            if (keep) tp.ctrl_level_out[l] = hc;
            if (l + 1 < levels) {
                if (keep) tp.ctrl_down_in[l] = hc;
                hc = ctrl_down_[l].forward(p, hc);
            }
        }
    }

    h = mid_.forward(p, h, e, keep ? &tp.mid : nullptr);

    // Decoder.
    for (int l = levels - 1; l >= 0; --l) {
        if (keep) tp.dec_concat_split[l] = h.channels();
        const TensorT<T>* parts[] = {&h, &skips[l]};
        h = concat_channels<T>(parts);
        for (int r = 0; r < cfg_.res_blocks; ++r) h = dec_[l][r].forward(p, h, e, cache_slot(tp.dec, l, r));
        if (l > 0) {
            if (keep) tp.up_in[l] = h;
            h = up_[l].forward(p, nn::upsample2(h));
        }
    }
    TensorT<T> out = out_conv_.forward(p, nn::silu(h));
    if (keep) {
        tp.out_pre = std::move(h);
        tp.z_t = z_t;
        tp.sinusoid = std::move(sinus);
        tp.fc1_out = std::move(f1);
        tp.fc1_act = std::move(a1);
        tp.emb = std::move(emb);
        tp.emb_act = std::move(emb_act);
    }
    return out;
}

template <typename T>
DenoiserInputGrads<T> Denoiser::backward(const ParamSetT<T>& p, const DenoiserTape<T>& tp, const TensorT<T>& d_out,
                                         ParamSetT<T>& g) const {
    const int levels = static_cast<int>(cfg_.channels.size());
    const std::span<const T> e(tp.emb_act);
    std::vector<T> d_emb_act(tp.emb_act.size(), T(0));
    const std::span<T> de(d_emb_act);

    TensorT<T> dh = nn::silu_backward(tp.out_pre, out_conv_.backward(p, g, nn::silu(tp.out_pre), d_out));

    std::vector<TensorT<T>> d_skips(levels);
    for (int l = 0; l < levels; ++l) {
        if (l > 0) dh = nn::upsample2_backward(up_[l].backward(p, g, nn::upsample2(tp.up_in[l]), dh));
        for (int r = cfg_.res_blocks - 1; r >= 0; --r) dh = dec_[l][r].backward(p, g, tp.dec[l][r], e, dh, de);
        const int split = tp.dec_concat_split[l];
        d_skips[l] = slice_channels(dh, split, dh.channels() - split);
        dh = slice_channels(dh, 0, split);
    }
    dh = mid_.backward(p, g, tp.mid, e, dh, de);

    for (int l = levels - 1; l >= 0; --l) {
        for (std::size_t i = 0; i < dh.size(); ++i) dh[i] += d_skips[l][i];
        for (int r = cfg_.res_blocks - 1; r >= 0; --r) dh = enc_[l][r].backward(p, g, tp.enc[l][r], e, dh, de);
        if (l > 0) dh = down_[l - 1].backward(p, g, tp.down_in[l - 1], dh);
    }
    DenoiserInputGrads<T> result;
    result.d_latent = in_conv_.backward(p, g, tp.z_t, dh);

    if (tp.controlled) {
        TensorT<T> dc;
        for (int l = levels - 1; l >= 0; --l) {
            TensorT<T> d = zero_convs_[l].backward(p, g, tp.ctrl_level_out[l], d_skips[l]);
            if (l + 1 < levels) {
                for (std::size_t i = 0; i < d.size(); ++i) d[i] += dc[i];
            }
            for (int r = cfg_.res_blocks - 1; r >= 0; --r) d = ctrl_enc_[l][r].backward(p, g, tp.ctrl_enc[l][r], e, d, de);
            if (l > 0) {
                dc = ctrl_down_[l - 1].backward(p, g, tp.ctrl_down_in[l - 1], d);
            } else {
                dc = std::move(d);
            }
        }
        const TensorT<T> dz = ctrl_in_conv_.backward(p, g, tp.z_t, dc);
        for (std::size_t i = 0; i < dz.size(); ++i) result.d_latent[i] += dz[i];

        const TensorT<T>& last_pre = tp.cond_down_out.empty() ? tp.cond_in_out : tp.cond_down_out.back();
        TensorT<T> d = cond_out_.backward(p, g, nn::silu(last_pre), dc);
        for (int k = static_cast<int>(cond_down_.size()) - 1; k >= 0; --k) {
            const TensorT<T>& pre = tp.cond_down_out[k];
            const TensorT<T>& in_pre = k == 0 ? tp.cond_in_out : tp.cond_down_out[k - 1];
            d = cond_down_[k].backward(p, g, nn::silu(in_pre), nn::silu_backward(pre, d));
        }
        cond_in_.backward(p, g, tp.cond, nn::silu_backward(tp.cond_in_out, d), false);
    }

    std::vector<T> d_emb(d_emb_act.size());
    for (std::size_t k = 0; k < d_emb.size(); ++k) d_emb[k] = d_emb_act[k] * nn::silu_grad(tp.emb[k]);
    result.d_text = d_emb;
    std::vector<T> d_a1 = time_fc2_.backward(p, g, std::span<const T>(tp.fc1_act), std::span<const T>(d_emb));
    for (std::size_t k = 0; k < d_a1.size(); ++k) d_a1[k] *= nn::silu_grad(tp.fc1_out[k]);
    time_fc1_.backward(p, g, std::span<const T>(tp.sinusoid), std::span<const T>(d_a1));
    return result;
}

#define SKETCHEDIT_INSTANTIATE(T)                                                                                 \
    template TensorT<T> Denoiser::forward_base(const ParamSetT<T>&, const TensorT<T>&, int, std::span<const T>,   \
                                               DenoiserTape<T>*) const;                                           \
    template TensorT<T> Denoiser::forward_controlled(const ParamSetT<T>&, const TensorT<T>&, int,                 \
                                                     std::span<const T>, const TensorT<T>&, DenoiserTape<T>*)     \
        const;                                                                                                    \
    template DenoiserInputGrads<T> Denoiser::backward(const ParamSetT<T>&, const DenoiserTape<T>&,                \
                                                      const TensorT<T>&, ParamSetT<T>&) const;

SKETCHEDIT_INSTANTIATE(float)
SKETCHEDIT_INSTANTIATE(double)
#undef SKETCHEDIT_INSTANTIATE

}  // namespace sketchedit
