#include "sketchedit/codec.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace sketchedit {

namespace {

void require_factor(int f) {
    if (f < 1) throw std::invalid_argument("codec: factor must be >= 1");
}

void require_divisible(const Shape& s, int f, const char* what) {
    if (s.height % f != 0 || s.width % f != 0) {
        throw std::invalid_argument(std::string(what) + ": dims " + s.str() + " not divisible by factor " +
                                    std::to_string(f));
    }
}

}  // namespace

template <typename T>
TensorT<T> Codec::encode(const TensorT<T>& image) const {
    require_factor(factor);
    require_divisible(image.shape(), factor, "encode");
    const int f = factor;
    TensorT<T> z(image.channels() * f * f, image.height() / f, image.width() / f);
    for (int c = 0; c < image.channels(); ++c)
        for (int i = 0; i < image.height(); ++i)
            for (int j = 0; j < image.width(); ++j)
                z.at(c * f * f + (i % f) * f + (j % f), i / f, j / f) = image.at(c, i, j);
    return z;
}

template <typename T>
TensorT<T> Codec::decode(const TensorT<T>& latent) const {
    require_factor(factor);
    const int f = factor;
    if (latent.channels() % (f * f) != 0 || latent.channels() == 0) {
        throw std::invalid_argument("decode: channel count " + std::to_string(latent.channels()) +
                                    " incompatible with factor " + std::to_string(f));
    }
    TensorT<T> x(latent.channels() / (f * f), latent.height() * f, latent.width() * f);
    for (int c = 0; c < x.channels(); ++c)
        for (int i = 0; i < x.height(); ++i)
            for (int j = 0; j < x.width(); ++j)
                x.at(c, i, j) = latent.at(c * f * f + (i % f) * f + (j % f), i / f, j / f);
    return x;
}

Mask Codec::downsample_mask(const Mask& m) const {
    require_factor(factor);
    require_binary_mask(m, "downsample_mask");
    require_divisible(m.shape(), factor, "downsample_mask");
    const int f = factor;
    Mask out(1, m.height() / f, m.width() / f, 1.0f);
    for (int i = 0; i < m.height(); ++i)
        for (int j = 0; j < m.width(); ++j)
            if (m.at(0, i, j) == 0.0f) out.at(0, i / f, j / f) = 0.0f;
    return out;
}

Mask Codec::upsample_mask(const Mask& m_lat) const {
    require_factor(factor);
    Mask out(1, m_lat.height() * factor, m_lat.width() * factor);
    for (int i = 0; i < out.height(); ++i)
        for (int j = 0; j < out.width(); ++j) out.at(0, i, j) = m_lat.at(0, i / factor, j / factor);
    return out;
}

Image clamp_image(const Image& x) {
    Image out = x;
    for (auto& v : out.values()) v = std::clamp(v, -1.0f, 1.0f);
    return out;
}

template TensorT<float> Codec::encode(const TensorT<float>&) const;
template TensorT<double> Codec::encode(const TensorT<double>&) const;
template TensorT<float> Codec::decode(const TensorT<float>&) const;
template TensorT<double> Codec::decode(const TensorT<double>&) const;

}  // namespace sketchedit
