#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "sketchedit/diffusion.hpp"

using namespace sketchedit;
using testing::random_tensor;

TEST_CASE("make_schedule: hand-computed cases") {
    const auto one = make_schedule(1, 0.01, 0.01);
    REQUIRE(one.betas.size() == 1);
    CHECK(one.beta(1) == doctest::Approx(0.01).epsilon(1e-15));
    CHECK(one.alpha_bar(1) == doctest::Approx(0.99).epsilon(1e-15));

    const auto three = make_schedule(3, 0.1, 0.3);
    CHECK(three.beta(1) == doctest::Approx(0.1).epsilon(1e-15));
    CHECK(three.beta(2) == doctest::Approx(0.2).epsilon(1e-15));
    CHECK(three.beta(3) == doctest::Approx(0.3).epsilon(1e-15));
    CHECK(three.alpha_bar(3) == doctest::Approx(0.504).epsilon(1e-12));
    CHECK(three.alpha_bar(0) == 1.0);
}

TEST_CASE("make_schedule: T=1000 matches a log-sum oracle") {
    const auto s = make_schedule(1000, 1e-4, 0.02);
    double log_sum = 0.0;
    for (int t = 1; t <= 1000; ++t) log_sum += std::log1p(-(1e-4 + (t - 1) / 999.0 * (0.02 - 1e-4)));
    CHECK(std::abs(s.alpha_bar(1000) - std::exp(log_sum)) / std::exp(log_sum) < 1e-10);
}

TEST_CASE("default schedule invariants") {
    const auto s = make_schedule(ScheduleConfig{});
    CHECK(s.T == 200);
    CHECK(s.alpha_bar(1) > 0.99);
    CHECK(s.alpha_bar(s.T) < 0.05);
    double running = 1.0;
    for (int t = 1; t <= s.T; ++t) {
        CHECK(s.beta(t) > 0.0);
        CHECK(s.beta(t) < 1.0);
        running *= s.alpha(t);
        CHECK(std::abs(s.alpha_bar(t) - running) <= 1e-12 * running);
        if (t > 1) CHECK(s.alpha_bar(t) < s.alpha_bar(t - 1));
    }
}

TEST_CASE("make_schedule: monotone for random valid configs") {
    Rng rng(11);
    for (int k = 0; k < 50; ++k) {
        const int T = rng.uniform_int(1, 400);
        const double b0 = rng.uniform(1e-5, 0.1);
        const double b1 = rng.uniform(b0, 0.5);
        const auto s = make_schedule(T, b0, b1);
        for (int t = 2; t <= T; ++t) REQUIRE(s.alpha_bar(t) < s.alpha_bar(t - 1));
    }
}

TEST_CASE("make_schedule: rejects invalid bounds") {
    CHECK_THROWS_AS(make_schedule(0, 1e-4, 0.02), std::invalid_argument);
    CHECK_THROWS_AS(make_schedule(10, 0.0, 0.02), std::invalid_argument);
    CHECK_THROWS_AS(make_schedule(10, 0.03, 0.02), std::invalid_argument);
    CHECK_THROWS_AS(make_schedule(10, 0.01, 1.0), std::invalid_argument);
    const auto s = make_schedule(10, 1e-3, 0.1);
    CHECK_THROWS_AS(s.check(0), std::out_of_range);
    CHECK_THROWS_AS(s.check(11), std::out_of_range);
}

TEST_CASE("q_sample: closed form") {
    const auto s = make_schedule(ScheduleConfig{});
    const Shape shape{12, 4, 4};
    const Latent z0{random_tensor(shape, 1), 0};
    const Tensor zero(shape);
    const Latent zt = q_sample(z0, 50, zero, s);
    CHECK(zt.noise_level == 50);
    const float k = static_cast<float>(std::sqrt(s.alpha_bar(50)));
    for (std::size_t i = 0; i < zt.data.size(); ++i) CHECK(zt.data[i] == k * z0.data[i]);

    // alpha_bar = 1 leaves z0 untouched.
    const Tensor eps = random_tensor(shape, 2);
    CHECK(forward_noise(z0.data, eps, 1.0) == z0.data);

    CHECK_THROWS_AS(q_sample(z0, 0, eps, s), std::out_of_range);
    CHECK_THROWS_AS(q_sample(z0, 201, eps, s), std::out_of_range);
    CHECK_THROWS_AS(q_sample(z0, 3, Tensor(Shape{12, 4, 5}), s), std::invalid_argument);
}

TEST_CASE("q_sample: Monte-Carlo variance law") {
    const auto s = make_schedule(ScheduleConfig{});
    constexpr int kDraws = 100000;
    const Shape shape{1, 1, 1};
    const LatentT<double> z0{TensorT<double>(shape), 0};
    Rng rng(5);
    for (int t : {1, s.T / 2, s.T}) {
        double sum = 0.0, sq = 0.0;
        TensorT<double> eps(shape);
        for (int i = 0; i < kDraws; ++i) {
            eps[0] = rng.normal();
            const double v = q_sample(z0, t, eps, s).data[0];
            sum += v;
            sq += v * v;
        }
        const double var = sq / kDraws - (sum / kDraws) * (sum / kDraws);
        const double expected = 1.0 - s.alpha_bar(t);
        const double se = expected * std::sqrt(2.0 / (kDraws - 1));
        CHECK(std::abs(var - expected) < 3 * se);
    }
}

TEST_CASE("predict_z0 inverts q_sample") {
    const auto s = make_schedule(ScheduleConfig{});
    const Shape shape{12, 4, 4};
    const Latent z0{random_tensor(shape, 3), 0};
    const Tensor eps = random_tensor(shape, 4);
    for (int t = 1; t <= s.T; t += 13) {
        const Latent zt = q_sample(z0, t, eps, s);
        CHECK(max_abs_diff(predict_z0(zt, eps, t, s).data, z0.data) < 1e-6 * (1.0 + 1.0 / std::sqrt(s.alpha_bar(t))));
    }
    // Scalar-loop oracle, double precision.
    const LatentT<double> zt{random_tensor<double>(shape, 5), 77};
    const auto eh = random_tensor<double>(shape, 6);
    const auto got = predict_z0(zt, eh, 77, s);
    for (std::size_t i = 0; i < eh.size(); ++i) {
        const double want = (zt.data[i] - std::sqrt(1 - s.alpha_bar(77)) * eh[i]) / std::sqrt(s.alpha_bar(77));
        CHECK(std::abs(got.data[i] - want) < 1e-12);
    }
    const auto no_eps = predict_z0(zt, TensorT<double>(shape), 77, s);
    for (std::size_t i = 0; i < eh.size(); ++i) CHECK(no_eps.data[i] == doctest::Approx(zt.data[i] / std::sqrt(s.alpha_bar(77))));
}

TEST_CASE("posterior_params: formula oracle and boundary") {
    const auto s = make_schedule(ScheduleConfig{});
    const Shape shape{12, 4, 4};
    const LatentT<double> zt{random_tensor<double>(shape, 7), 120};
    const auto eh = random_tensor<double>(shape, 8);
    const auto p = posterior_params(zt, eh, 120, s);
    CHECK(p.sigma == doctest::Approx(std::sqrt(s.beta(120))).epsilon(1e-15));
    for (std::size_t i = 0; i < eh.size(); ++i) {
        const double mu = (zt.data[i] - s.beta(120) / std::sqrt(1 - s.alpha_bar(120)) * eh[i]) / std::sqrt(s.alpha(120));
        CHECK(std::abs(p.mu[i] - mu) < 1e-9);
    }
    const auto zero = posterior_params(zt, TensorT<double>(shape), 120, s);
    for (std::size_t i = 0; i < eh.size(); ++i) CHECK(std::abs(zero.mu[i] - zt.data[i] / std::sqrt(s.alpha(120))) < 1e-12);
    CHECK(posterior_params(zt, eh, 1, s).sigma == 0.0);
    CHECK_THROWS_AS(posterior_params(zt, eh, 0, s), std::out_of_range);
}

TEST_CASE("p_sample: degenerate cases and moments") {
    const Shape shape{1, 1, 1};
    PosteriorParamsT<double> p{TensorT<double>(shape, 0.7), 0.0, 1};
    CHECK(p_sample(p, TensorT<double>(shape, 3.0)).data[0] == 0.7);
    p.sigma = 0.5;
    p.t = 9;
    CHECK(p_sample(p, TensorT<double>(shape)).data[0] == 0.7);
    CHECK(p_sample(p, TensorT<double>(shape)).noise_level == 8);
    CHECK_THROWS_AS(p_sample(p, TensorT<double>(Shape{2, 1, 1})), std::invalid_argument);

    Rng rng(9);
    constexpr int kDraws = 100000;
    double sum = 0.0, sq = 0.0;
    TensorT<double> n(shape);
    for (int i = 0; i < kDraws; ++i) {
        n[0] = rng.normal();
        const double v = p_sample(p, n).data[0];
        sum += v;
        sq += v * v;
    }
    const double mean = sum / kDraws;
    const double var = sq / kDraws - mean * mean;
    CHECK(std::abs(mean - 0.7) < 3 * 0.5 / std::sqrt(kDraws));
    CHECK(std::abs(var - 0.25) < 3 * 0.25 * std::sqrt(2.0 / (kDraws - 1)));
}

TEST_CASE("outputs stay finite under the default schedule") {
    const auto s = make_schedule(ScheduleConfig{});
    const Shape shape{12, 4, 4};
    const Latent z0{random_tensor(shape, 10), 0};
    const Tensor eps = random_tensor(shape, 11, -4, 4);
    for (int t = 1; t <= s.T; ++t) {
        const Latent zt = q_sample(z0, t, eps, s);
        REQUIRE(all_finite(zt.data));
        REQUIRE(all_finite(predict_z0(zt, eps, t, s).data));
        REQUIRE(all_finite(posterior_params(zt, eps, t, s).mu));
    }
}
