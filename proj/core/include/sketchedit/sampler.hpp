#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>

#include "sketchedit/checkpoint.hpp"
#include "sketchedit/conditioning.hpp"
#include "sketchedit/denoiser.hpp"
#include "sketchedit/diffusion.hpp"

namespace sketchedit {

struct EditRequest {
    Image source;
    Mask mask;  // 1 = keep, 0 = editable
    Sketch user_sketch;
    std::string prompt;
    /// Number of reverse steps; defaults to T. Fewer steps start from the
    /// source latent noised to that level instead of pure noise.
    std::optional<int> steps;
    std::uint64_t seed = 0;
    /// Blend the noised source latent into kept cells at every step and
    /// composite the kept pixels at the end.
    bool latent_mask_sampling = true;
};

/// q(z_t | z0) at level t driven by `noise`; t = 0 returns z0 exactly.
template <typename T>
LatentT<T> noised_source(const TensorT<T>& z0_src, int t, const TensorT<T>& noise, const NoiseSchedule& sched);

/// m * z_old + (1 - m) * z_new with the single-channel mask broadcast over channels.
template <typename T>
TensorT<T> blend(const TensorT<T>& z_old, const TensorT<T>& z_new, const Mask& m_lat);

/// Called after every reverse step with the level just reached, the blended
/// latent and the noised source it was blended with (empty when blending is off).
struct SampleStep {
    int level = 0;
    const Latent& z;
    const Latent* z_old = nullptr;
};
using SampleObserver = std::function<void(const SampleStep&)>;

/// A loaded model ready for inference. Immutable after construction, so one
/// instance may serve concurrent blended_sample calls.
class EditModel {
public:
    explicit EditModel(Checkpoint ckpt);

    const Checkpoint& checkpoint() const { return ckpt_; }
    const Denoiser& denoiser() const { return net_; }
    const NoiseSchedule& schedule() const { return sched_; }
    const Vocabulary& vocabulary() const { return vocab_; }

    /// Mean token embedding of a prompt under the trained table.
    std::vector<float> embed_prompt(const std::string& prompt) const;

private:
    Checkpoint ckpt_;
    Denoiser net_;
    NoiseSchedule sched_;
    Vocabulary vocab_;
};

/// Sketch-guided blended-latent edit. Throws std::invalid_argument when the
/// request's geometry does not match the model, the mask is not binary, the
/// prompt is empty, or steps lies outside [1, T].
Image blended_sample(const EditRequest& req, const EditModel& model, const SampleObserver& observer = {});

}  // namespace sketchedit
