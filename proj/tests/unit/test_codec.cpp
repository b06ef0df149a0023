#include "doctest.h"
#include "helpers.hpp"
#include "sketchedit/codec.hpp"

using namespace sketchedit;
using testing::random_tensor;

TEST_CASE("encode: constant field stays constant") {
    const Codec codec{2};
    const Image x(3, 4, 4, 0.25f);
    const Tensor z = codec.encode(x);
    CHECK(z.shape() == Shape{12, 2, 2});
    for (float v : z.values()) CHECK(v == 0.25f);
}

TEST_CASE("encode: exhaustive index oracle at 8x8") {
    for (int f : {1, 2, 4}) {
        const Codec codec{f};
        Image x(3, 8, 8);
        for (int c = 0; c < 3; ++c)
            for (int i = 0; i < 8; ++i)
                for (int j = 0; j < 8; ++j) x.at(c, i, j) = static_cast<float>(c * 64 + i * 8 + j);
        const Tensor z = codec.encode(x);
        REQUIRE(z.shape() == Shape{3 * f * f, 8 / f, 8 / f});
        for (int c = 0; c < 3; ++c)
            for (int i = 0; i < 8; ++i)
                for (int j = 0; j < 8; ++j) {
                    REQUIRE(z.at(c * f * f + (i % f) * f + (j % f), i / f, j / f) == x.at(c, i, j));
                }
        CHECK(codec.decode(z) == x);
    }
}

TEST_CASE("decode inverts encode bit-exactly and both are linear") {
    const Codec codec{2};
    const Image x = random_tensor(Shape{3, 32, 32}, 1);
    const Image y = random_tensor(Shape{3, 32, 32}, 2);
    CHECK(codec.decode(codec.encode(x)) == x);
    const auto zd = random_tensor<double>(Shape{12, 16, 16}, 3);
    CHECK(codec.encode(codec.decode(zd)) == zd);

    Image combo(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) combo[i] = 0.5f * x[i] - 0.25f * y[i];
    const Tensor ex = codec.encode(x), ey = codec.encode(y), ec = codec.encode(combo);
    for (std::size_t i = 0; i < ec.size(); ++i) CHECK(ec[i] == 0.5f * ex[i] - 0.25f * ey[i]);
}

TEST_CASE("encode/decode reject bad geometry") {
    const Codec codec{2};
    CHECK_THROWS_AS(codec.encode(Image(3, 5, 4)), std::invalid_argument);
    CHECK_THROWS_AS(codec.decode(Tensor(11, 2, 2)), std::invalid_argument);
    CHECK_THROWS_AS(codec.downsample_mask(Mask(1, 3, 4)), std::invalid_argument);
}

TEST_CASE("downsample_mask: strict keep") {
    const Codec codec{2};
    CHECK(codec.downsample_mask(Mask(1, 4, 4, 1.0f)) == Mask(1, 2, 2, 1.0f));
    CHECK(codec.downsample_mask(Mask(1, 4, 4, 0.0f)) == Mask(1, 2, 2, 0.0f));

    // All 16 binary 2x2 blocks: only the all-ones block keeps.
    for (int bits = 0; bits < 16; ++bits) {
        Mask m(1, 2, 2);
        for (int k = 0; k < 4; ++k) m[k] = (bits >> k) & 1 ? 1.0f : 0.0f;
        CHECK(codec.downsample_mask(m)[0] == (bits == 15 ? 1.0f : 0.0f));
    }

    // Never protects an editable pixel.
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const Mask m = testing::random_mask(32, 32, seed, 0.8);
        const Mask up = codec.upsample_mask(codec.downsample_mask(m));
        for (std::size_t i = 0; i < m.size(); ++i) REQUIRE(up[i] <= m[i]);
    }
}

TEST_CASE("clamp_image") {
    Image x(3, 1, 2);
    x[0] = 2.0f;
    x[1] = -3.0f;
    x[2] = 0.5f;
    const Image c = clamp_image(x);
    CHECK(c[0] == 1.0f);
    CHECK(c[1] == -1.0f);
    CHECK(c[2] == 0.5f);
}
