#include <benchmark/benchmark.h>

#include "sketchedit/checkpoint.hpp"
#include "sketchedit/random.hpp"
#include "sketchedit/sampler.hpp"
#include "sketchedit/synth_data.hpp"
#include "sketchedit/trainer.hpp"

using namespace sketchedit;

namespace {

struct Fixture {
    ModelConfig model;
    Denoiser net{model};
    ParamSet params = net.init_params(1);
    Tensor z, cond;
    std::vector<float> text;

    Fixture() {
        Rng rng(2);
        z = rng.normal_like<float>(Shape{model.latent_channels(), model.latent_size(), model.latent_size()});
        cond = rng.normal_like<float>(Shape{kCondChannels, model.image_size, model.image_size});
        text.assign(static_cast<std::size_t>(model.text_dim()), 0.1f);
    }
};

const Fixture& fixture() {
    static const Fixture f;
    return f;
}

void BM_ForwardBase(benchmark::State& state) {
    const Fixture& f = fixture();
    for (auto _ : state) benchmark::DoNotOptimize(f.net.forward_base<float>(f.params, f.z, 100, f.text));
}
BENCHMARK(BM_ForwardBase)->Unit(benchmark::kMillisecond);

void BM_ForwardControlled(benchmark::State& state) {
    const Fixture& f = fixture();
    for (auto _ : state)
        benchmark::DoNotOptimize(f.net.forward_controlled<float>(f.params, f.z, 100, f.text, f.cond));
}
BENCHMARK(BM_ForwardControlled)->Unit(benchmark::kMillisecond);

void BM_ForwardBackward(benchmark::State& state) {
    const Fixture& f = fixture();
    ParamSet grads = f.params.zeros_like();
    const Tensor d_out(f.z.shape(), 1e-3f);
    for (auto _ : state) {
        DenoiserTape<float> tape;
        f.net.forward_controlled<float>(f.params, f.z, 100, f.text, f.cond, &tape);
        benchmark::DoNotOptimize(f.net.backward<float>(f.params, tape, d_out, grads));
    }
}
BENCHMARK(BM_ForwardBackward)->Unit(benchmark::kMillisecond);

void BM_TrainStep(benchmark::State& state) {
    const DatasetSpec spec = DatasetSpec::standard();
    const Vocabulary vocab = spec.vocabulary();
    TrainConfig cfg;
    cfg.model.vocab_size = vocab.size();
    const Denoiser net(cfg.model);
    const NoiseSchedule sched = make_schedule(cfg.schedule);
    TrainingBatch batch;
    for (int i = 0; i < static_cast<int>(state.range(0)); ++i)
        batch.push_back(make_training_example(generate_garment(i, spec), i, cfg.mask, vocab));
    ParamSet params = net.init_params(cfg.seed);
    Adam opt(params);
    int step = 0;
    for (auto _ : state) benchmark::DoNotOptimize(train_step(net, batch, params, opt, sched, cfg, ++step));
}
BENCHMARK(BM_TrainStep)->Arg(1)->Arg(16)->Unit(benchmark::kMillisecond);

void BM_BlendedSample(benchmark::State& state) {
    const DatasetSpec spec = DatasetSpec::standard();
    const Vocabulary vocab = spec.vocabulary();
    TrainConfig train;
    ModelConfig model;
    model.vocab_size = vocab.size();
    const EditModel edit_model(initial_checkpoint(model, ScheduleConfig{}, vocab, train));
    const EditCase c = make_edit_case(3, spec, MaskConfig{});
    EditRequest req{c.source, c.mask, c.user_sketch, c.prompt, static_cast<int>(state.range(0)), 1, true};
    for (auto _ : state) benchmark::DoNotOptimize(blended_sample(req, edit_model));
}
BENCHMARK(BM_BlendedSample)->Arg(10)->Arg(200)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
