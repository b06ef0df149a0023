#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "sketchedit/aligned.hpp"

namespace sketchedit {

/// Channel-first shape of a dense 3-D tensor.
struct Shape {
    int channels = 0;
    int height = 0;
    int width = 0;

    std::size_t size() const {
        return static_cast<std::size_t>(channels) * static_cast<std::size_t>(height) *
               static_cast<std::size_t>(width);
    }
    std::size_t plane() const { return static_cast<std::size_t>(height) * static_cast<std::size_t>(width); }
    bool operator==(const Shape&) const = default;
    std::string str() const;
};

/// Dense C x H x W tensor, row-major within each channel plane.
///
/// Images, masks, latents and feature maps all use this layout. A pixel
/// (row i, column j, channel c) of an H x W x 3 image lives at at(c, i, j).
template <typename T>
class TensorT {
public:
    using value_type = T;

    TensorT() = default;
    explicit TensorT(Shape shape, T fill = T(0)) : shape_(shape), data_(shape.size(), fill) {}
    TensorT(int channels, int height, int width, T fill = T(0))
        : TensorT(Shape{channels, height, width}, fill) {}

    const Shape& shape() const { return shape_; }
    int channels() const { return shape_.channels; }
    int height() const { return shape_.height; }
    int width() const { return shape_.width; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    T& at(int c, int y, int x) { return data_[index(c, y, x)]; }
    const T& at(int c, int y, int x) const { return data_[index(c, y, x)]; }
    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }
    T* channel(int c) { return data_.data() + static_cast<std::size_t>(c) * shape_.plane(); }
    const T* channel(int c) const { return data_.data() + static_cast<std::size_t>(c) * shape_.plane(); }
    std::span<T> values() { return data_; }
    std::span<const T> values() const { return data_; }

    void fill(T value) { std::fill(data_.begin(), data_.end(), value); }

    template <typename U>
    TensorT<U> cast() const {
        TensorT<U> out(shape_);
        for (std::size_t i = 0; i < data_.size(); ++i) out[i] = static_cast<U>(data_[i]);
        return out;
    }

    bool operator==(const TensorT&) const = default;

private:
    std::size_t index(int c, int y, int x) const {
        return (static_cast<std::size_t>(c) * shape_.height + static_cast<std::size_t>(y)) * shape_.width +
               static_cast<std::size_t>(x);
    }

    Shape shape_;
    AlignedVector<T> data_;
};

using Tensor = TensorT<float>;

/// Pixel-space RGB image, values in [-1, 1].
using Image = Tensor;
/// Single-channel binary map; 1 = keep, 0 = editable.
using Mask = Tensor;

/// Throws std::invalid_argument naming `what` when shapes differ.
void require_same_shape(const Shape& a, const Shape& b, const char* what);

/// Throws std::invalid_argument unless `m` is single channel with values in {0, 1}.
void require_binary_mask(const Mask& m, const char* what);

/// Throws std::invalid_argument unless `x` has three channels.
void require_rgb(const Image& x, const char* what);

/// Largest absolute elementwise difference; shapes must match.
template <typename T>
double max_abs_diff(const TensorT<T>& a, const TensorT<T>& b);

/// Selects channels [first, first + count).
template <typename T>
TensorT<T> slice_channels(const TensorT<T>& x, int first, int count);

/// Stacks tensors with equal spatial dims along the channel axis.
template <typename T>
TensorT<T> concat_channels(std::span<const TensorT<T>* const> parts);

bool all_finite(const Tensor& x);

}  // namespace sketchedit
