#include "sketchedit/diffusion.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace sketchedit {

int NoiseSchedule::check(int t) const {
    if (t < 1 || t > T) {
        throw std::out_of_range("noise schedule: step " + std::to_string(t) + " outside [1, " + std::to_string(T) + "]");
    }
    return t;
}

NoiseSchedule make_schedule(int T, double beta_start, double beta_end) {
    if (T < 1) throw std::invalid_argument("make_schedule: T must be >= 1");
    if (!(beta_start > 0.0) || !(beta_start <= beta_end) || !(beta_end < 1.0)) {
        throw std::invalid_argument("make_schedule: require 0 < beta_start <= beta_end < 1");
    }
    NoiseSchedule s;
    s.T = T;
    s.beta_start = beta_start;
    s.beta_end = beta_end;
    s.betas.resize(T);
    s.alphas.resize(T);
    s.alpha_bars.resize(T);
    double running = 1.0;
    for (int i = 0; i < T; ++i) {
        const double frac = T == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(T - 1);
        s.betas[i] = beta_start + frac * (beta_end - beta_start);
        s.alphas[i] = 1.0 - s.betas[i];
        running *= s.alphas[i];
        s.alpha_bars[i] = running;
    }
    return s;
}

template <typename T>
TensorT<T> forward_noise(const TensorT<T>& z0, const TensorT<T>& eps, double alpha_bar) {
    require_same_shape(z0.shape(), eps.shape(), "forward_noise");
    if (!(alpha_bar > 0.0) || alpha_bar > 1.0) throw std::invalid_argument("forward_noise: alpha_bar outside (0, 1]");
    const T a = static_cast<T>(std::sqrt(alpha_bar));
    const T b = static_cast<T>(std::sqrt(1.0 - alpha_bar));
    TensorT<T> out(z0.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a * z0[i] + b * eps[i];
    return out;
}

template <typename T>
LatentT<T> q_sample(const LatentT<T>& z0, int t, const TensorT<T>& eps, const NoiseSchedule& sched) {
    const double ab = sched.alpha_bar(sched.check(t));
    return {forward_noise(z0.data, eps, ab), t};
}

template <typename T>
LatentT<T> predict_z0(const LatentT<T>& z_t, const TensorT<T>& eps_hat, int t, const NoiseSchedule& sched) {
    require_same_shape(z_t.data.shape(), eps_hat.shape(), "predict_z0");
    const double ab = sched.alpha_bar(sched.check(t));
    const T inv_sqrt_ab = static_cast<T>(1.0 / std::sqrt(ab));
    const T sqrt_1mab = static_cast<T>(std::sqrt(1.0 - ab));
    LatentT<T> out{TensorT<T>(z_t.data.shape()), 0};
    for (std::size_t i = 0; i < out.data.size(); ++i) {
        out.data[i] = (z_t.data[i] - sqrt_1mab * eps_hat[i]) * inv_sqrt_ab;
    }
    return out;
}

template <typename T>
PosteriorParamsT<T> posterior_params(const LatentT<T>& z_t, const TensorT<T>& eps_hat, int t,
                                     const NoiseSchedule& sched) {
    require_same_shape(z_t.data.shape(), eps_hat.shape(), "posterior_params");
    const double beta = sched.beta(t);
    const double ab = sched.alpha_bar(t);
    const T inv_sqrt_alpha = static_cast<T>(1.0 / std::sqrt(sched.alpha(t)));
    const T eps_coef = static_cast<T>(beta / std::sqrt(1.0 - ab));
    PosteriorParamsT<T> p{TensorT<T>(z_t.data.shape()), t > 1 ? std::sqrt(beta) : 0.0, t};
    for (std::size_t i = 0; i < p.mu.size(); ++i) p.mu[i] = inv_sqrt_alpha * (z_t.data[i] - eps_coef * eps_hat[i]);
    return p;
}

template <typename T>
LatentT<T> p_sample(const PosteriorParamsT<T>& params, const TensorT<T>& noise) {
    require_same_shape(params.mu.shape(), noise.shape(), "p_sample");
    if (params.sigma < 0.0) throw std::invalid_argument("p_sample: negative sigma");
    LatentT<T> out{params.mu, params.t - 1};
    if (params.sigma == 0.0) return out;
    const T s = static_cast<T>(params.sigma);
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += s * noise[i];
    return out;
}

#define SKETCHEDIT_INSTANTIATE(T)                                                                          \
    template TensorT<T> forward_noise(const TensorT<T>&, const TensorT<T>&, double);                       \
    template LatentT<T> q_sample(const LatentT<T>&, int, const TensorT<T>&, const NoiseSchedule&);         \
    template LatentT<T> predict_z0(const LatentT<T>&, const TensorT<T>&, int, const NoiseSchedule&);       \
    template PosteriorParamsT<T> posterior_params(const LatentT<T>&, const TensorT<T>&, int,               \
                                                  const NoiseSchedule&);                                   \
    template LatentT<T> p_sample(const PosteriorParamsT<T>&, const TensorT<T>&);

SKETCHEDIT_INSTANTIATE(float)
SKETCHEDIT_INSTANTIATE(double)
#undef SKETCHEDIT_INSTANTIATE

}  // namespace sketchedit
