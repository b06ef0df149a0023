#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "sketchedit/conditioning.hpp"
#include "sketchedit/denoiser.hpp"
#include "sketchedit/diffusion.hpp"
#include "sketchedit/synth_data.hpp"

namespace sketchedit {

struct Checkpoint;

struct TrainConfig {
    double lr = 2e-4;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    int batch_size = 16;
    int steps = 3000;
    double lambda_pix = 1.0;
    std::uint64_t seed = 0;
    /// Adds the pixel-space term on the decoded one-step clean estimate.
    bool inverse_latent_loss = true;
    /// Emulates a locked base network: only control, text and zero-conv parameters update.
    bool freeze_base = false;
    ScheduleConfig schedule;
    ModelConfig model;
    MaskConfig mask;
    /// Text-alignment proxy head trained after the denoiser (0 disables it).
    int proxy_steps = 300;
    double proxy_lr = 3e-3;

    bool operator==(const TrainConfig&) const = default;
};

struct LossReport {
    int step = 0;
    double l_cldm = 0.0;
    double l_pix = 0.0;
    double total = 0.0;
};

/// Mean squared error over all elements.
template <typename T>
double loss_cldm(const TensorT<T>& eps, const TensorT<T>& eps_hat);

/// Mean squared error over all pixels and channels.
template <typename T>
double loss_pix(const TensorT<T>& x, const TensorT<T>& x_hat);

/// Per-sample timestep and noise for one optimisation step.
template <typename T>
struct NoiseDraw {
    int t = 0;
    TensorT<T> eps;
};

/// t ~ U{1..T} and eps ~ N(0, I) for each batch entry, from the stream of (seed, step).
template <typename T>
std::vector<NoiseDraw<T>> draw_noise(std::size_t batch, const Shape& latent_shape, const NoiseSchedule& sched,
                                     std::uint64_t seed, int step);

/// Batch loss and, when `grads` is non-null, its gradient (accumulated).
template <typename T>
LossReport compute_loss(const Denoiser& net, const ParamSetT<T>& params, const TrainingBatch& batch,
                        const std::vector<NoiseDraw<T>>& draws, const NoiseSchedule& sched, const TrainConfig& cfg,
                        ParamSetT<T>* grads);

/// Adaptive-moment optimiser state.
class Adam {
public:
    explicit Adam(const ParamSet& layout);
    /// One update. Parameters rejected by `trainable` are left untouched.
    void update(ParamSet& params, const ParamSet& grads, const TrainConfig& cfg,
                const std::function<bool(const std::string&)>& trainable);
    int steps() const { return step_; }

private:
    ParamSet m_, v_;
    int step_ = 0;
};

/// Draws noise, computes L = L_cldm + lambda * L_pix, applies one Adam step.
/// Throws std::runtime_error on a non-finite loss, naming the step, t and sample.
LossReport train_step(const Denoiser& net, const TrainingBatch& batch, ParamSet& params, Adam& opt,
                      const NoiseSchedule& sched, const TrainConfig& cfg, int step);

using LossSink = std::function<void(const LossReport&)>;

/// Full training run over shuffled epochs; returns a self-describing checkpoint.
Checkpoint fit(const std::vector<TrainingSample>& dataset, const Vocabulary& vocab, const TrainConfig& cfg,
               const LossSink& sink = {});

/// {"step":..,"l_cldm":..,"l_pix":..,"total":..}
std::string loss_log_line(const LossReport& r);

}  // namespace sketchedit
