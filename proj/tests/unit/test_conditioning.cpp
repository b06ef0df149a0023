#include <algorithm>
#include <queue>

#include "doctest.h"
#include "helpers.hpp"
#include "sketchedit/conditioning.hpp"

using namespace sketchedit;
using testing::random_tensor;

namespace {

bool binary(const Mask& m) {
    return std::all_of(m.values().begin(), m.values().end(), [](float v) { return v == 0.0f || v == 1.0f; });
}

/// Independent flood fill: number of 4-connected regions with value `v`.
int regions(const Mask& m, float v) {
    const int h = m.height(), w = m.width();
    std::vector<char> seen(m.size(), 0);
    int count = 0;
    for (int s = 0; s < h * w; ++s) {
        if (seen[s] || m[s] != v) continue;
        ++count;
        std::queue<int> q;
        q.push(s);
        seen[s] = 1;
        while (!q.empty()) {
            const int p = q.front();
            q.pop();
            const int i = p / w, j = p % w;
            const int nb[4][2] = {{i - 1, j}, {i + 1, j}, {i, j - 1}, {i, j + 1}};
            for (auto [a, b] : nb) {
                if (a < 0 || b < 0 || a >= h || b >= w) continue;
                const int k = a * w + b;
                if (!seen[k] && m[k] == v) {
                    seen[k] = 1;
                    q.push(k);
                }
            }
        }
    }
    return count;
}

}  // namespace

TEST_CASE("bezier_mask: 1000 seeds respect area bounds and connectivity") {
    const MaskConfig cfg;
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
        const Mask m = bezier_mask(seed, cfg);
        REQUIRE(m.shape() == Shape{1, 32, 32});
        REQUIRE(binary(m));
        const double editable = std::count(m.values().begin(), m.values().end(), 0.0f) / 1024.0;
        REQUIRE(editable >= 0.05);
        REQUIRE(editable <= 0.4);
        REQUIRE(regions(m, 0.0f) == 1);
        REQUIRE(editable_components(m) == 1);
        REQUIRE(editable_fraction(m) == doctest::Approx(editable));
    }
}

TEST_CASE("bezier_mask: deterministic per seed and varied across seeds") {
    const MaskConfig cfg;
    CHECK(bezier_mask(42, cfg) == bezier_mask(42, cfg));
    CHECK_FALSE(bezier_mask(42, cfg) == bezier_mask(43, cfg));
}

TEST_CASE("bezier_mask: degenerate radius") {
    MaskConfig cfg;
    cfg.radius_min = cfg.radius_max = 0.0;
    cfg.min_area = 0.0;
    cfg.max_area = 1.0;
    const Mask m = bezier_mask(1, cfg);
    CHECK(editable_fraction(m) == 0.0);
    CHECK_THROWS_AS(bezier_mask(1, MaskConfig{.radius_min = 0.0, .radius_max = 0.0, .max_retries = 5}),
                    std::runtime_error);
}

TEST_CASE("rasterize_polygon samples pixel centres") {
    // Square covering centres of rows/cols 1..2.
    const std::vector<std::pair<double, double>> square = {{1.0, 1.0}, {3.0, 1.0}, {3.0, 3.0}, {1.0, 3.0}};
    const Mask m = rasterize_polygon(square, 4, 4);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) {
            const bool inside = i >= 1 && i <= 2 && j >= 1 && j <= 2;
            CHECK(m.at(0, i, j) == (inside ? 0.0f : 1.0f));
        }
}

TEST_CASE("masked_source") {
    const Image x = random_tensor(Shape{3, 8, 8}, 1);
    CHECK(masked_source(x, Mask(1, 8, 8, 1.0f)) == x);
    CHECK(masked_source(x, Mask(1, 8, 8, 0.0f)) == Image(3, 8, 8, 0.0f));
    Mask checker(1, 8, 8);
    for (int i = 0; i < 8; ++i)
        for (int j = 0; j < 8; ++j) checker.at(0, i, j) = (i + j) % 2 ? 1.0f : 0.0f;
    const Image xm = masked_source(x, checker);
    for (int c = 0; c < 3; ++c)
        for (int i = 0; i < 8; ++i)
            for (int j = 0; j < 8; ++j) CHECK(xm.at(c, i, j) == ((i + j) % 2 ? x.at(c, i, j) : 0.0f));
    CHECK(masked_source(xm, checker) == xm);
    CHECK_THROWS_AS(masked_source(x, Mask(1, 8, 7)), std::invalid_argument);
}

TEST_CASE("fuse_sketch") {
    const Sketch a = random_tensor(Shape{3, 8, 8}, 2);
    const Sketch b = random_tensor(Shape{3, 8, 8}, 3);
    const Mask m = testing::random_mask(8, 8, 4);
    CHECK(fuse_sketch(a, a, m) == a);
    CHECK(fuse_sketch(a, b, Mask(1, 8, 8, 0.0f)) == b);
    const Sketch f = fuse_sketch(a, b, m);
    for (int c = 0; c < 3; ++c)
        for (int i = 0; i < 8; ++i)
            for (int j = 0; j < 8; ++j) CHECK(f.at(c, i, j) == (m.at(0, i, j) == 1.0f ? a.at(c, i, j) : b.at(c, i, j)));
    CHECK(fuse_sketch(f, b, m) == f);
    CHECK_THROWS_AS(fuse_sketch(a, Sketch(3, 8, 9), m), std::invalid_argument);
}

TEST_CASE("extract_sketch") {
    SUBCASE("constant image is blank") {
        const Sketch s = extract_sketch(Image(3, 16, 16, 0.3f));
        CHECK(s == Sketch(3, 16, 16, 1.0f));
    }
    SUBCASE("vertical step gives one vertical line") {
        Image x(3, 16, 16, -1.0f);
        for (int c = 0; c < 3; ++c)
            for (int i = 0; i < 16; ++i)
                for (int j = 8; j < 16; ++j) x.at(c, i, j) = 1.0f;
        const Sketch s = extract_sketch(x);
        for (int i = 0; i < 16; ++i)
            for (int j = 0; j < 16; ++j) {
                CHECK(s.at(0, i, j) == (j == 7 ? -1.0f : 1.0f));
                CHECK(s.at(2, i, j) == s.at(0, i, j));
            }
    }
    SUBCASE("invariant under a global brightness shift") {
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            const Image x = testing::dyadic_image(16, 16, seed);
            Image shifted = x;
            for (auto& v : shifted.values()) v += 0.25f;
            CHECK(extract_sketch(x) == extract_sketch(shifted));
        }
    }
}

TEST_CASE("vocabulary and text embedding") {
    const Vocabulary v({"red", "tee", "with", "dots"});
    CHECK(v.size() == 5);
    CHECK(v.tokens()[0] == "<unk>");
    CHECK(v.tokenize("Red  TEE with dots") == std::vector<int>{1, 2, 3, 4});
    CHECK(v.tokenize("purple tee") == std::vector<int>{Vocabulary::kUnknown, 2});
    CHECK_THROWS_AS(v.tokenize("   "), std::invalid_argument);

    const int dim = 4;
    const auto table = random_tensor<double>(Shape{1, 5, dim}, 9);
    const std::span<const double> t = table.values();
    const auto one = embed_tokens<double>(std::vector<int>{2}, t, dim);
    for (int k = 0; k < dim; ++k) CHECK(one[k] == table[2 * dim + k]);
    const auto ab = embed_tokens<double>(std::vector<int>{1, 3}, t, dim);
    const auto ba = embed_tokens<double>(std::vector<int>{3, 1}, t, dim);
    CHECK(ab == ba);
    for (int k = 0; k < dim; ++k) CHECK(ab[k] == doctest::Approx((table[dim + k] + table[3 * dim + k]) / 2).epsilon(1e-15));
    CHECK_THROWS_AS(embed_tokens<double>(std::vector<int>{}, t, dim), std::invalid_argument);
}

TEST_CASE("assemble_condition layout") {
    const Image x = random_tensor(Shape{3, 8, 8}, 5);
    const Mask m = testing::random_mask(8, 8, 6);
    const Sketch src = random_tensor(Shape{3, 8, 8}, 7);
    const Sketch user = random_tensor(Shape{3, 8, 8}, 8);
    const ConditionBundle b = make_condition(x, m, src, user, {1, 2});
    CHECK(b.masked_source == masked_source(x, m));
    CHECK(b.sketch == fuse_sketch(src, user, m));
    for (int c = 0; c < 3; ++c)
        for (std::size_t i = 0; i < m.size(); ++i)
            if (m[i] == 0.0f) CHECK(b.masked_source.channel(c)[i] == 0.0f);

    const Tensor cond = assemble_condition(b);
    REQUIRE(cond.shape() == Shape{kCondChannels, 8, 8});
    CHECK(slice_channels(cond, kCondMaskedSource, 3) == b.masked_source);
    CHECK(slice_channels(cond, kCondMask, 1) == m);
    CHECK(slice_channels(cond, kCondSketch, 3) == b.sketch);

    ConditionBundle bad = b;
    bad.mask = Mask(1, 8, 4);
    CHECK_THROWS_AS(assemble_condition(bad), std::invalid_argument);
}
