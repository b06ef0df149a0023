#pragma once

#include "sketchedit/tensor.hpp"

namespace sketchedit {

/// Exactly invertible space-to-depth codec standing in for an autoencoder.
///
/// An H x W x 3 image maps to an (H/f) x (W/f) x 3f^2 latent: pixel (i, j, c)
/// lands at latent cell (i / f, j / f), channel c*f^2 + (i % f)*f + (j % f).
/// The map is a permutation, hence linear and lossless.
struct Codec {
    int factor = 2;

    int latent_channels(int image_channels = 3) const { return image_channels * factor * factor; }

    template <typename T>
    TensorT<T> encode(const TensorT<T>& image) const;

    template <typename T>
    TensorT<T> decode(const TensorT<T>& latent) const;

    /// Strict-keep downsampling: a latent cell is 1 only if every covered pixel is 1.
    Mask downsample_mask(const Mask& m) const;

    /// Nearest-neighbour expansion of a latent-resolution mask back to pixels.
    Mask upsample_mask(const Mask& m_lat) const;
};

/// Clamps to [-1, 1]; applied only where images leave the library.
Image clamp_image(const Image& x);

}  // namespace sketchedit
