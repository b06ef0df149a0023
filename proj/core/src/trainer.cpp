#include "sketchedit/trainer.hpp"

#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "sketchedit/checkpoint.hpp"
#include "sketchedit/codec.hpp"
#include "sketchedit/metrics.hpp"
#include "sketchedit/random.hpp"

namespace sketchedit {

namespace {

template <typename T>
double mse(const TensorT<T>& a, const TensorT<T>& b, const char* what) {
    require_same_shape(a.shape(), b.shape(), what);
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = static_cast<double>(a.values()[i]) - static_cast<double>(b.values()[i]);
        s += d * d;
    }
    return s / static_cast<double>(a.size());
}

}  // namespace

template <typename T>
double loss_cldm(const TensorT<T>& eps, const TensorT<T>& eps_hat) {
    return mse(eps, eps_hat, "loss_cldm");
}

template <typename T>
double loss_pix(const TensorT<T>& x, const TensorT<T>& x_hat) {
    return mse(x, x_hat, "loss_pix");
}

template <typename T>
std::vector<NoiseDraw<T>> draw_noise(std::size_t batch, const Shape& latent_shape, const NoiseSchedule& sched,
                                     std::uint64_t seed, int step) {
    Rng rng(derive_seed({seed, static_cast<std::uint64_t>(step), 0x7E57ULL}));
    std::vector<NoiseDraw<T>> out(batch);
    for (auto& d : out) {
        d.t = rng.uniform_int(1, sched.T);
        d.eps = rng.normal_like<T>(latent_shape);
    }
    return out;
}

template <typename T>
LossReport compute_loss(const Denoiser& net, const ParamSetT<T>& params, const TrainingBatch& batch,
                        const std::vector<NoiseDraw<T>>& draws, const NoiseSchedule& sched, const TrainConfig& cfg,
                        ParamSetT<T>* grads) {
    if (batch.empty()) throw std::invalid_argument("compute_loss: empty batch");
    if (draws.size() != batch.size()) throw std::invalid_argument("compute_loss: one noise draw per sample required");
    const ModelConfig& mc = net.config();
    const Codec codec{mc.codec_factor};
    const int dim = mc.text_dim();
    const auto& table = params[net.text_table_index()].values;
    const double inv_b = 1.0 / static_cast<double>(batch.size());

    LossReport r;
    for (std::size_t b = 0; b < batch.size(); ++b) {
        const TrainingExample& ex = batch[b];
        const int t = sched.check(draws[b].t);
        const double ab = sched.alpha_bar(t);
        const TensorT<T> x = ex.target.template cast<T>();
        const TensorT<T> z0 = codec.encode(x);
        const TensorT<T>& eps = draws[b].eps;
        const TensorT<T> z_t = forward_noise(z0, eps, ab);
        const std::vector<T> text = embed_tokens<T>(ex.bundle.tokens, table, dim);
        const TensorT<T> cond = assemble_condition(ex.bundle).template cast<T>();

        DenoiserTape<T> tape;
        const TensorT<T> eps_hat = net.forward_controlled(params, z_t, t, std::span<const T>(text), cond,
                                                          grads ? &tape : nullptr);
        const double l_cldm = loss_cldm(eps, eps_hat);
        double l_pix = 0.0;
        TensorT<T> x_hat;
        if (cfg.inverse_latent_loss) {
            const LatentT<T> z0_hat = predict_z0(LatentT<T>{z_t, t}, eps_hat, t, sched);
            x_hat = codec.decode(z0_hat.data);
            l_pix = loss_pix(x, x_hat);
        }
        const double total = l_cldm + cfg.lambda_pix * l_pix;
        if (!std::isfinite(total)) {
            std::ostringstream msg;
            msg << "non-finite loss at t=" << t << " for sample '" << ex.id << "'";
            throw std::runtime_error(msg.str());
        }
        r.l_cldm += l_cldm * inv_b;
        r.l_pix += l_pix * inv_b;

        if (!grads) continue;
        TensorT<T> d_eps(eps_hat.shape());
        const double k_eps = 2.0 * inv_b / static_cast<double>(eps_hat.size());
        for (std::size_t i = 0; i < d_eps.size(); ++i) {
            d_eps.values()[i] = static_cast<T>(k_eps * (static_cast<double>(eps_hat.values()[i]) - eps.values()[i]));
        }
        if (cfg.inverse_latent_loss && cfg.lambda_pix != 0.0) {
            // decode is a permutation, so its adjoint is encode.
            TensorT<T> d_x(x.shape());
            const double k_pix = 2.0 * inv_b * cfg.lambda_pix / static_cast<double>(x.size());
            for (std::size_t i = 0; i < d_x.size(); ++i) {
                d_x.values()[i] = static_cast<T>(k_pix * (static_cast<double>(x_hat.values()[i]) - x.values()[i]));
            }
            const TensorT<T> d_z0 = codec.encode(d_x);
            const double dz0_deps = -std::sqrt(1.0 - ab) / std::sqrt(ab);
            for (std::size_t i = 0; i < d_eps.size(); ++i) {
                d_eps.values()[i] += static_cast<T>(dz0_deps * d_z0.values()[i]);
            }
        }
        const DenoiserInputGrads<T> dg = net.backward(params, tape, d_eps, *grads);
        embed_tokens_backward<T>(ex.bundle.tokens, dg.d_text, (*grads)[net.text_table_index()].values, dim);
    }
    r.total = r.l_cldm + cfg.lambda_pix * r.l_pix;
    return r;
}

Adam::Adam(const ParamSet& layout) : m_(layout.zeros_like()), v_(layout.zeros_like()) {}

void Adam::update(ParamSet& params, const ParamSet& grads, const TrainConfig& cfg,
                  const std::function<bool(const std::string&)>& trainable) {
    ++step_;
    const double c1 = 1.0 - std::pow(cfg.adam_beta1, step_);
    const double c2 = 1.0 - std::pow(cfg.adam_beta2, step_);
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (trainable && !trainable(params[i].name)) continue;
        auto& w = params[i].values;
        auto& m = m_[i].values;
        auto& v = v_[i].values;
        const auto& g = grads[i].values;
        for (std::size_t k = 0; k < w.size(); ++k) {
            const double gk = g[k];
            const double mk = cfg.adam_beta1 * m[k] + (1.0 - cfg.adam_beta1) * gk;
            const double vk = cfg.adam_beta2 * v[k] + (1.0 - cfg.adam_beta2) * gk * gk;
            m[k] = static_cast<float>(mk);
            v[k] = static_cast<float>(vk);
            w[k] = static_cast<float>(w[k] - cfg.lr * (mk / c1) / (std::sqrt(vk / c2) + cfg.adam_eps));
        }
    }
}

LossReport train_step(const Denoiser& net, const TrainingBatch& batch, ParamSet& params, Adam& opt,
                      const NoiseSchedule& sched, const TrainConfig& cfg, int step) {
    const Shape latent{net.config().latent_channels(), net.config().latent_size(), net.config().latent_size()};
    const auto draws = draw_noise<float>(batch.size(), latent, sched, cfg.seed, step);
    ParamSet grads = params.zeros_like();
    LossReport r;
    try {
        r = compute_loss(net, params, batch, draws, sched, cfg, &grads);
    } catch (const std::runtime_error& e) {
        throw std::runtime_error("train_step " + std::to_string(step) + ": " + e.what());
    }
    r.step = step;
    const bool freeze = cfg.freeze_base;
    opt.update(params, grads, cfg, [freeze](const std::string& name) { return !(freeze && Denoiser::is_base_param(name)); });
    return r;
}

namespace {

std::vector<int> shuffled_order(std::size_t n, std::uint64_t seed, int epoch) {
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed({seed, static_cast<std::uint64_t>(epoch), 0x5A0FULL}));
    for (int i = static_cast<int>(n) - 1; i > 0; --i) std::swap(order[i], order[rng.uniform_int(0, i)]);
    return order;
}

}  // namespace

Checkpoint fit(const std::vector<TrainingSample>& dataset, const Vocabulary& vocab, const TrainConfig& cfg,
               const LossSink& sink) {
    if (dataset.empty()) throw std::invalid_argument("fit: empty dataset");
    if (cfg.steps < 0 || cfg.batch_size < 1) throw std::invalid_argument("fit: steps >= 0 and batch_size >= 1 required");
    if (!(cfg.lambda_pix >= 0.0)) throw std::invalid_argument("fit: lambda_pix must be >= 0");

    TrainConfig run = cfg;
    run.model.vocab_size = vocab.size();
    run.model.validate();
    const Denoiser net(run.model);
    const NoiseSchedule sched = make_schedule(run.schedule);

    Checkpoint ckpt = initial_checkpoint(run.model, run.schedule, vocab, run);
    Adam opt(ckpt.params);
    int epoch = 0;
    std::size_t cursor = 0;
    std::vector<int> order = shuffled_order(dataset.size(), run.seed, epoch);
    for (int step = 1; step <= run.steps; ++step) {
        TrainingBatch batch;
        batch.reserve(static_cast<std::size_t>(run.batch_size));
        while (static_cast<int>(batch.size()) < run.batch_size) {
            if (cursor == order.size()) {
                order = shuffled_order(dataset.size(), run.seed, ++epoch);
                cursor = 0;
            }
            const int i = order[cursor++];
            const std::uint64_t mask_seed =
                derive_seed({run.seed, static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(epoch)});
            batch.push_back(make_training_example(dataset[i], mask_seed, run.mask, vocab));
        }
        const LossReport r = train_step(net, batch, ckpt.params, opt, sched, run, step);
        ckpt.history.push_back(r);
        if (sink) sink(r);
    }
    ckpt.final_step = run.steps;

    if (run.proxy_steps > 0) {
        const int dim = run.model.text_dim();
        const auto& table = ckpt.params[net.text_table_index()].values;
        std::vector<Image> images;
        std::vector<std::vector<double>> texts;
        for (const auto& s : dataset) {
            images.push_back(s.image);
            const auto e = embed_tokens<float>(vocab.tokenize(s.caption), table, dim);
            texts.emplace_back(e.begin(), e.end());
        }
        ckpt.align_params = AlignProxy::train(images, texts, run.proxy_steps, run.proxy_lr, derive_seed({run.seed, 0xA1ULL}));
    }
    return ckpt;
}

std::string loss_log_line(const LossReport& r) {
    nlohmann::ordered_json j;
    j["step"] = r.step;
    j["l_cldm"] = r.l_cldm;
    j["l_pix"] = r.l_pix;
    j["total"] = r.total;
    return j.dump();
}

#define SKETCHEDIT_INSTANTIATE(T)                                                                                \
    template double loss_cldm(const TensorT<T>&, const TensorT<T>&);                                             \
    template double loss_pix(const TensorT<T>&, const TensorT<T>&);                                              \
    template std::vector<NoiseDraw<T>> draw_noise(std::size_t, const Shape&, const NoiseSchedule&, std::uint64_t, \
                                                  int);                                                          \
    template LossReport compute_loss(const Denoiser&, const ParamSetT<T>&, const TrainingBatch&,                 \
                                     const std::vector<NoiseDraw<T>>&, const NoiseSchedule&, const TrainConfig&, \
                                     ParamSetT<T>*);
SKETCHEDIT_INSTANTIATE(float)
SKETCHEDIT_INSTANTIATE(double)
#undef SKETCHEDIT_INSTANTIATE

}  // namespace sketchedit
