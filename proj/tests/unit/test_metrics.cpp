#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "sketchedit/image_io.hpp"
#include "sketchedit/metrics.hpp"
#include "sketchedit/synth_data.hpp"

using namespace sketchedit;
using testing::random_tensor;

namespace {

FeatureSet gaussian(int n, int d, double mean, double sd, std::uint64_t seed) {
    Rng rng(seed);
    FeatureSet x(n, d);
    for (int i = 0; i < n; ++i)
        for (int k = 0; k < d; ++k) x(i, k) = mean + sd * rng.normal();
    return x;
}

}  // namespace

TEST_CASE("pre_error") {
    const Image src = testing::dyadic_image(8, 8, 1);
    const Mask m = testing::box_mask(8, 8, 0, 0, 4, 8);  // top half editable
    CHECK(pre_error(src, src, m) == 0.0);

    Image edited = src;
    for (int c = 0; c < 3; ++c)
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 8; ++j) edited.at(c, i, j) = -edited.at(c, i, j);
    CHECK(pre_error(edited, src, m) == 0.0);

    // One kept pixel 10 units off in one channel, K = 32 kept pixels.
    Image gen(3, 8, 8, from_u8(100));
    Image ref = gen;
    gen.at(1, 6, 3) = from_u8(110);
    CHECK(pre_error(gen, ref, m) == doctest::Approx(100.0 / 32.0).epsilon(1e-12));
    double oracle = 0.0;
    int kept = 0;
    for (int i = 0; i < 8; ++i)
        for (int j = 0; j < 8; ++j) {
            if (m.at(0, i, j) != 1.0f) continue;
            ++kept;
            for (int c = 0; c < 3; ++c) {
                const double d = std::round((gen.at(c, i, j) + 1) / 2 * 255) - std::round((ref.at(c, i, j) + 1) / 2 * 255);
                oracle += d * d;
            }
        }
    CHECK(pre_error(gen, ref, m) == doctest::Approx(oracle / kept));

    CHECK_THROWS_AS(pre_error(src, src, Mask(1, 8, 8, 0.0f)), std::invalid_argument);
    CHECK_THROWS_AS(pre_error(src, Image(3, 8, 4), m), std::invalid_argument);
}

TEST_CASE("fid: identity, symmetry and Gaussian closed forms") {
    const FeatureSet a = gaussian(200, 8, 0.0, 1.0, 1);
    const FeatureSet b = gaussian(200, 8, 0.3, 1.5, 2);
    CHECK(fid(a, a) < 1e-6);
    CHECK(std::abs(fid(a, b) - fid(b, a)) < 1e-6);
    CHECK(fid(a, b) >= 0.0);

    // N(0, I) vs N(mu, I) with |mu|^2 = 4.
    FeatureSet shifted = gaussian(10000, 8, 0.0, 1.0, 4);
    shifted.col(0).array() += 2.0;
    CHECK(fid(gaussian(10000, 8, 0.0, 1.0, 3), shifted) == doctest::Approx(4.0).epsilon(0.05));
    // N(0, 1 I) vs N(0, 4 I): d (s1 - s2)^2 = 8.
    CHECK(fid(gaussian(10000, 8, 0.0, 1.0, 5), gaussian(10000, 8, 0.0, 2.0, 6)) == doctest::Approx(8.0).epsilon(0.05));
}

TEST_CASE("fid: errors") {
    CHECK_THROWS_AS(fid(gaussian(8, 8, 0, 1, 1), gaussian(100, 8, 0, 1, 2)), std::invalid_argument);
    CHECK_THROWS_AS(fid(gaussian(100, 8, 0, 1, 1), gaussian(100, 4, 0, 1, 2)), std::invalid_argument);
    FeatureSet bad = gaussian(100, 8, 0, 1, 3);
    bad(5, 2) = std::nan("");
    CHECK_THROWS_AS(fid(bad, gaussian(100, 8, 0, 1, 2)), std::invalid_argument);
}

TEST_CASE("perceptual_distance") {
    const Image a = random_tensor(Shape{3, 32, 32}, 1);
    const Image b = random_tensor(Shape{3, 32, 32}, 2);
    CHECK(perceptual_distance(a, a) == 0.0);
    CHECK(perceptual_distance(a, b) == perceptual_distance(b, a));
    CHECK(perceptual_distance(a, b) > 0.0);
    CHECK(perceptual_distance(a, b) == perceptual_distance(a, b, PerceptualNet(PerceptualNet::kSeed)));
    CHECK_THROWS_AS(perceptual_distance(a, Image(3, 16, 16)), std::invalid_argument);

    int monotone = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const Image x = random_tensor(Shape{3, 32, 32}, 100 + seed, -0.5, 0.5);
        const Image noise = random_tensor(Shape{3, 32, 32}, 500 + seed);
        double prev = 0.0;
        bool ok = true;
        for (double eps : {0.05, 0.1, 0.2}) {
            Image y = x;
            for (std::size_t i = 0; i < y.size(); ++i) y[i] += static_cast<float>(eps) * noise[i];
            const double d = perceptual_distance(x, y);
            ok = ok && d > prev;
            prev = d;
        }
        monotone += ok;
    }
    CHECK(monotone == 100);
}

TEST_CASE("extract_features") {
    const Image a = random_tensor(Shape{3, 32, 32}, 3);
    const Image b = random_tensor(Shape{3, 32, 32}, 4);
    const std::vector<Image> ab = {a, b}, ba = {b, a};
    const FeatureSet f = extract_features(ab);
    CHECK(f.rows() == 2);
    CHECK(f.cols() == 32);
    CHECK(extract_features(std::vector<Image>{a}).rows() == 1);
    const FeatureSet g = extract_features(ba);
    CHECK(f.row(0) == g.row(1));
    CHECK(f.row(1) == g.row(0));

    const Tensor last = PerceptualNet::standard().activations(a).back();
    for (int c = 0; c < last.channels(); ++c) {
        double s = 0.0;
        for (int i = 0; i < last.height(); ++i)
            for (int j = 0; j < last.width(); ++j) s += last.at(c, i, j);
        CHECK(f(0, c) == doctest::Approx(s / (last.height() * last.width())).epsilon(1e-12));
    }

    const FeatureSet custom = extract_features(ab, [](const Image& x) { return std::vector<double>{x[0], x[1]}; });
    CHECK(custom.cols() == 2);
    CHECK(custom(1, 0) == b[0]);
}

TEST_CASE("cosine_similarity and untrained proxy") {
    const std::vector<double> u = {1, 2, 3}, v = {3, 0, -1};
    CHECK(cosine_similarity(u, u) == doctest::Approx(1.0));
    CHECK(cosine_similarity(u, v) == doctest::Approx(0.0));
    CHECK_THROWS_AS(text_align(ParamSet{}, Image(3, 32, 32), u), std::logic_error);
}

TEST_CASE("text_align proxy ranks matched captions above mismatched ones") {
    const DatasetSpec spec = DatasetSpec::standard();
    const Vocabulary vocab = spec.vocabulary();
    const int dim = 16;
    const auto table = random_tensor<double>(Shape{1, vocab.size(), dim}, 77);
    auto embed = [&](const std::string& caption) {
        return embed_tokens<double>(vocab.tokenize(caption), table.values(), dim);
    };
    std::vector<Image> images;
    std::vector<std::vector<double>> texts;
    for (int i = 0; i < 800; ++i) {
        const TrainingSample s = generate_garment(sample_seed(10, i), spec);
        images.push_back(s.image);
        texts.push_back(embed(s.caption));
    }
    const ParamSet head = AlignProxy::train(images, texts, 300, 3e-3, 1);

    double matched = 0.0, mismatched = 0.0;
    const int n = 200;
    std::vector<TrainingSample> held;
    for (int i = 0; i < n; ++i) held.push_back(generate_garment(sample_seed(20, i), spec));
    for (int i = 0; i < n; ++i) {
        const double s = text_align(head, held[i].image, embed(held[i].caption));
        CHECK(s >= -1.0);
        CHECK(s <= 1.0);
        matched += s;
        mismatched += text_align(head, held[i].image, embed(held[(i + 1) % n].caption));
    }
    CHECK(matched / n > mismatched / n);
}
