#pragma once

#include <optional>
#include <vector>

#include "sketchedit/tensor.hpp"

namespace sketchedit {

/// Linear-beta schedule parameters as stored in checkpoints.
struct ScheduleConfig {
    int steps = 200;
    double beta_start = 1e-4;
    double beta_end = 0.04;

    bool operator==(const ScheduleConfig&) const = default;
};

/// Variance schedule with 1-based step indexing: t in {1..T}, t = 0 is clean data.
struct NoiseSchedule {
    int T = 0;
    double beta_start = 0.0;
    double beta_end = 0.0;
    std::vector<double> betas;       // betas[t-1]
    std::vector<double> alphas;      // 1 - beta
    std::vector<double> alpha_bars;  // running product of alphas

    double beta(int t) const { return betas.at(check(t) - 1); }
    double alpha(int t) const { return alphas.at(check(t) - 1); }
    /// alpha_bar(0) == 1 by convention.
    double alpha_bar(int t) const { return t == 0 ? 1.0 : alpha_bars.at(check(t) - 1); }
    ScheduleConfig config() const { return {T, beta_start, beta_end}; }

    /// Returns t, or throws std::out_of_range unless 1 <= t <= T.
    int check(int t) const;
};

NoiseSchedule make_schedule(int T, double beta_start, double beta_end);
inline NoiseSchedule make_schedule(const ScheduleConfig& c) { return make_schedule(c.steps, c.beta_start, c.beta_end); }

/// A latent with an optional provenance annotation of its noise level.
template <typename T>
struct LatentT {
    TensorT<T> data;
    std::optional<int> noise_level;
};
using Latent = LatentT<float>;

/// Gaussian reverse-step parameters: mean tensor and scalar standard deviation.
template <typename T>
struct PosteriorParamsT {
    TensorT<T> mu;
    double sigma = 0.0;
    int t = 0;  // step the parameters were computed for; the sample lands at t - 1
};
using PosteriorParams = PosteriorParamsT<float>;

/// sqrt(alpha_bar) * z0 + sqrt(1 - alpha_bar) * eps, for an explicit alpha_bar in (0, 1].
template <typename T>
TensorT<T> forward_noise(const TensorT<T>& z0, const TensorT<T>& eps, double alpha_bar);

/// Closed-form forward process z_t ~ q(z_t | z_0) driven by caller noise.
template <typename T>
LatentT<T> q_sample(const LatentT<T>& z0, int t, const TensorT<T>& eps, const NoiseSchedule& sched);

/// Clean-latent estimate from a noise prediction; algebraic inverse of q_sample.
template <typename T>
LatentT<T> predict_z0(const LatentT<T>& z_t, const TensorT<T>& eps_hat, int t, const NoiseSchedule& sched);

/// Mean and deviation of p(z_{t-1} | z_t). sigma = sqrt(beta_t) for t > 1 and 0 at t = 1.
template <typename T>
PosteriorParamsT<T> posterior_params(const LatentT<T>& z_t, const TensorT<T>& eps_hat, int t,
                                     const NoiseSchedule& sched);

/// z_{t-1} = mu + sigma * noise.
template <typename T>
LatentT<T> p_sample(const PosteriorParamsT<T>& params, const TensorT<T>& noise);

}  // namespace sketchedit
