#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <thread>

#include "doctest.h"
#include "helpers.hpp"
#include "sketchedit/codec.hpp"
#include "sketchedit/image_io.hpp"
#include "sketchedit/sampler.hpp"

using namespace sketchedit;
using testing::random_tensor;

namespace {

EditRequest tiny_request(std::uint64_t seed) {
    EditRequest r;
    r.source = testing::dyadic_image(8, 8, seed);
    r.mask = testing::box_mask(8, 8, 2, 1, 6, 5);
    r.user_sketch = extract_sketch(testing::dyadic_image(8, 8, seed + 100));
    r.prompt = "red tee";
    r.seed = seed;
    return r;
}

}  // namespace

TEST_CASE("noised_source") {
    const auto sched = make_schedule(ScheduleConfig{});
    const Tensor z0 = random_tensor(Shape{12, 4, 4}, 1);
    const Tensor noise = random_tensor(Shape{12, 4, 4}, 2);
    const Latent at0 = noised_source(z0, 0, noise, sched);
    CHECK(at0.data == z0);
    CHECK(at0.noise_level == 0);
    const Latent quiet = noised_source(z0, 50, Tensor(z0.shape()), sched);
    const float k = static_cast<float>(std::sqrt(sched.alpha_bar(50)));
    for (std::size_t i = 0; i < z0.size(); ++i) CHECK(quiet.data[i] == k * z0[i]);
    CHECK(quiet.noise_level == 50);
    CHECK_THROWS_AS(noised_source(z0, 201, noise, sched), std::out_of_range);
    CHECK_THROWS_AS(noised_source(z0, -1, noise, sched), std::out_of_range);

    // Moments of N(sqrt(ab) z0, (1 - ab) I).
    Rng rng(3);
    const TensorT<double> one(Shape{1, 1, 1}, 0.8);
    TensorT<double> n(Shape{1, 1, 1});
    constexpr int kDraws = 100000;
    double sum = 0.0, sq = 0.0;
    for (int i = 0; i < kDraws; ++i) {
        n[0] = rng.normal();
        const double v = noised_source(one, 120, n, sched).data[0];
        sum += v;
        sq += v * v;
    }
    const double ab = sched.alpha_bar(120);
    const double mean = sum / kDraws, var = sq / kDraws - mean * mean;
    CHECK(std::abs(mean - std::sqrt(ab) * 0.8) < 3 * std::sqrt((1 - ab) / kDraws));
    CHECK(std::abs(var - (1 - ab)) < 3 * (1 - ab) * std::sqrt(2.0 / (kDraws - 1)));
}

TEST_CASE("blend") {
    const Tensor a = random_tensor(Shape{12, 4, 4}, 4), b = random_tensor(Shape{12, 4, 4}, 5);
    CHECK(blend(a, b, Mask(1, 4, 4, 1.0f)) == a);
    CHECK(blend(a, b, Mask(1, 4, 4, 0.0f)) == b);
    const Mask m = testing::random_mask(4, 4, 6);
    const Tensor c = blend(a, b, m);
    for (int ch = 0; ch < 12; ++ch)
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j) CHECK(c.at(ch, i, j) == (m.at(0, i, j) == 1.0f ? a.at(ch, i, j) : b.at(ch, i, j)));
    CHECK_THROWS_AS(blend(a, Tensor(12, 4, 5), m), std::invalid_argument);
    CHECK_THROWS_AS(blend(a, b, Mask(1, 2, 2)), std::invalid_argument);
}

TEST_CASE("blended_sample: keep-everything mask returns the source") {
    const EditModel model(testing::tiny_checkpoint());
    EditRequest r = tiny_request(1);
    r.mask = Mask(1, 8, 8, 1.0f);
    CHECK(blended_sample(r, model) == r.source);
}

TEST_CASE("blended_sample: kept pixels are exact, edits differ, toggle off leaks") {
    const EditModel model(testing::tiny_checkpoint());
    double leaked = 0.0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        EditRequest r = tiny_request(seed);
        const Image out = blended_sample(r, model);
        for (int c = 0; c < 3; ++c)
            for (int i = 0; i < 8; ++i)
                for (int j = 0; j < 8; ++j)
                    if (r.mask.at(0, i, j) == 1.0f) REQUIRE(out.at(c, i, j) == r.source.at(c, i, j));
        r.latent_mask_sampling = false;
        const Image free = blended_sample(r, model);
        for (int c = 0; c < 3; ++c)
            for (int i = 0; i < 8; ++i)
                for (int j = 0; j < 8; ++j)
                    if (r.mask.at(0, i, j) == 1.0f) leaked += std::abs(free.at(c, i, j) - r.source.at(c, i, j));
    }
    CHECK(leaked > 0.0);
}

TEST_CASE("blended_sample: per-step blend invariant and monotone noise levels") {
    const EditModel model(testing::tiny_checkpoint());
    const Codec codec{2};
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        const EditRequest r = tiny_request(seed);
        const Mask m_lat = codec.downsample_mask(r.mask);
        int expected = model.schedule().T - 1;
        int calls = 0;
        blended_sample(r, model, [&](const SampleStep& s) {
            ++calls;
            REQUIRE(s.level == expected);
            REQUIRE(s.z.noise_level == expected);
            REQUIRE(s.z_old != nullptr);
            REQUIRE(s.z_old->noise_level == expected);
            for (int c = 0; c < 12; ++c)
                for (int i = 0; i < 4; ++i)
                    for (int j = 0; j < 4; ++j)
                        if (m_lat.at(0, i, j) == 1.0f) REQUIRE(s.z.data.at(c, i, j) == s.z_old->data.at(c, i, j));
            --expected;
        });
        CHECK(calls == model.schedule().T);
    }
}

TEST_CASE("blended_sample: fewer steps start part way") {
    const EditModel model(testing::tiny_checkpoint());
    EditRequest r = tiny_request(4);
    r.steps = 3;
    int calls = 0;
    const Image out = blended_sample(r, model, [&](const SampleStep&) { ++calls; });
    CHECK(calls == 3);
    CHECK(out.shape() == r.source.shape());
}

TEST_CASE("blended_sample: determinism, concurrency, golden image") {
    const EditModel model(testing::tiny_checkpoint());
    const EditRequest r = tiny_request(7);
    const Image a = blended_sample(r, model);
    CHECK(blended_sample(r, model) == a);
    EditRequest other = r;
    other.seed = 8;
    CHECK_FALSE(blended_sample(other, model) == a);

    Image t1, t2;
    std::thread th1([&] { t1 = blended_sample(r, model); });
    std::thread th2([&] { t2 = blended_sample(r, model); });
    th1.join();
    th2.join();
    CHECK(t1 == a);
    CHECK(t2 == a);

    const std::filesystem::path golden = std::filesystem::path(SKETCHEDIT_GOLDEN_DIR) / "tiny_edit.png";
    const auto png = encode_png(a);
    if (std::getenv("SKETCHEDIT_UPDATE_GOLDEN")) write_file(golden, png);
    REQUIRE(std::filesystem::exists(golden));
    CHECK(read_file(golden) == png);
}

TEST_CASE("blended_sample: request validation") {
    const EditModel model(testing::tiny_checkpoint());
    EditRequest r = tiny_request(1);
    r.steps = 11;
    CHECK_THROWS_AS(blended_sample(r, model), std::invalid_argument);
    r.steps = 0;
    CHECK_THROWS_AS(blended_sample(r, model), std::invalid_argument);
    r = tiny_request(1);
    r.mask = Mask(1, 8, 4, 1.0f);
    CHECK_THROWS_AS(blended_sample(r, model), std::invalid_argument);
    r = tiny_request(1);
    r.mask[0] = 0.5f;
    CHECK_THROWS_AS(blended_sample(r, model), std::invalid_argument);
    r = tiny_request(1);
    r.source = Image(3, 16, 16);
    CHECK_THROWS_AS(blended_sample(r, model), std::invalid_argument);
    r = tiny_request(1);
    r.prompt = " ";
    CHECK_THROWS_AS(blended_sample(r, model), std::invalid_argument);
}
