#include "sketchedit/sampler.hpp"

#include <cmath>
#include <stdexcept>

#include "sketchedit/codec.hpp"
#include "sketchedit/random.hpp"

namespace sketchedit {

template <typename T>
LatentT<T> noised_source(const TensorT<T>& z0_src, int t, const TensorT<T>& noise, const NoiseSchedule& sched) {
    if (t == 0) return {z0_src, 0};
    return {forward_noise(z0_src, noise, sched.alpha_bar(sched.check(t))), t};
}

template <typename T>
TensorT<T> blend(const TensorT<T>& z_old, const TensorT<T>& z_new, const Mask& m_lat) {
    require_same_shape(z_old.shape(), z_new.shape(), "blend");
    require_binary_mask(m_lat, "blend");
    if (m_lat.height() != z_old.height() || m_lat.width() != z_old.width()) {
        throw std::invalid_argument("blend: mask " + m_lat.shape().str() + " vs latent " + z_old.shape().str());
    }
    TensorT<T> out(z_old.shape());
    const std::size_t plane = z_old.shape().plane();
    const float* m = m_lat.channel(0);
    for (int c = 0; c < z_old.channels(); ++c) {
        const T* a = z_old.channel(c);
        const T* b = z_new.channel(c);
        T* o = out.channel(c);
        for (std::size_t i = 0; i < plane; ++i) o[i] = m[i] == 1.0f ? a[i] : b[i];
    }
    return out;
}

EditModel::EditModel(Checkpoint ckpt)
    : ckpt_(std::move(ckpt)), net_(ckpt_.model), sched_(make_schedule(ckpt_.schedule)), vocab_(ckpt_.vocab()) {}

std::vector<float> EditModel::embed_prompt(const std::string& prompt) const {
    return embed_tokens<float>(vocab_.tokenize(prompt), ckpt_.params[net_.text_table_index()].values,
                               ckpt_.model.text_dim());
}

Image blended_sample(const EditRequest& req, const EditModel& model, const SampleObserver& observer) {
    const ModelConfig& mc = model.checkpoint().model;
    const NoiseSchedule& sched = model.schedule();
    const Shape image{3, mc.image_size, mc.image_size};
    if (req.source.shape() != image) {
        throw std::invalid_argument("source is " + req.source.shape().str() + ", model expects " + image.str());
    }
    require_same_shape(req.user_sketch.shape(), image, "user sketch");
    require_same_shape(req.mask.shape(), Shape{1, mc.image_size, mc.image_size}, "mask");
    require_binary_mask(req.mask, "mask");
    const int steps = req.steps.value_or(sched.T);
    if (steps < 1 || steps > sched.T) {
        throw std::invalid_argument("steps must lie in [1, " + std::to_string(sched.T) + "], got " + std::to_string(steps));
    }

    const Codec codec{mc.codec_factor};
    const std::vector<float> text = model.embed_prompt(req.prompt);
    const ConditionBundle bundle =
        make_condition(req.source, req.mask, extract_sketch(req.source), req.user_sketch, model.vocabulary().tokenize(req.prompt));
    const Tensor cond = assemble_condition(bundle);
    const Mask m_lat = codec.downsample_mask(req.mask);
    const Tensor z_src = codec.encode(req.source);
    const ParamSet& p = model.checkpoint().params;

    Rng init_rng(derive_seed({req.seed, 0x1A17ULL}));
    Rng posterior_rng(derive_seed({req.seed, 0x9057ULL}));
    Rng source_rng(derive_seed({req.seed, 0x50C3ULL}));

    Latent z;
    if (steps == sched.T) {
        z = {init_rng.normal_like<float>(z_src.shape()), steps};
    } else {
        z = noised_source(z_src, steps, init_rng.normal_like<float>(z_src.shape()), sched);
    }

    for (int t = steps; t >= 1; --t) {
        if (z.noise_level != t) throw std::logic_error("blended_sample: latent is not at level " + std::to_string(t));
        const Tensor eps_hat = model.denoiser().forward_controlled(p, z.data, t, std::span<const float>(text), cond);
        const PosteriorParams post = posterior_params(z, eps_hat, t, sched);
        Latent z_new = p_sample(post, posterior_rng.normal_like<float>(z_src.shape()));
        if (!req.latent_mask_sampling) {
            z = std::move(z_new);
            if (observer) observer({t - 1, z, nullptr});
            continue;
        }
        const Latent z_old = noised_source(z_src, t - 1, source_rng.normal_like<float>(z_src.shape()), sched);
        if (z_old.noise_level != z_new.noise_level) {
            throw std::logic_error("blended_sample: noise levels of source and model latents differ");
        }
        z = {blend(z_old.data, z_new.data, m_lat), z_new.noise_level};
        if (observer) observer({t - 1, z, &z_old});
    }

    if (!req.latent_mask_sampling) return clamp_image(codec.decode(z.data));

    const Image decoded = codec.decode(blend(z_src, z.data, m_lat));
    Image out(image);
    const float* m = req.mask.channel(0);
    const std::size_t plane = image.plane();
    for (int c = 0; c < 3; ++c) {
        const float* s = req.source.channel(c);
        const float* d = decoded.channel(c);
        float* o = out.channel(c);
        for (std::size_t i = 0; i < plane; ++i) o[i] = m[i] == 1.0f ? s[i] : d[i];
    }
    return clamp_image(out);
}

template LatentT<float> noised_source(const TensorT<float>&, int, const TensorT<float>&, const NoiseSchedule&);
template LatentT<double> noised_source(const TensorT<double>&, int, const TensorT<double>&, const NoiseSchedule&);
template TensorT<float> blend(const TensorT<float>&, const TensorT<float>&, const Mask&);
template TensorT<double> blend(const TensorT<double>&, const TensorT<double>&, const Mask&);

}  // namespace sketchedit
