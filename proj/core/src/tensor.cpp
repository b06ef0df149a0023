#include "sketchedit/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sketchedit {

std::string Shape::str() const {
    return std::to_string(channels) + "x" + std::to_string(height) + "x" + std::to_string(width);
}

void require_same_shape(const Shape& a, const Shape& b, const char* what) {
    if (a != b) {
        throw std::invalid_argument(std::string(what) + ": shape mismatch (" + a.str() + " vs " + b.str() + ")");
    }
}

void require_binary_mask(const Mask& m, const char* what) {
    if (m.channels() != 1) {
        throw std::invalid_argument(std::string(what) + ": mask must have one channel, got " + m.shape().str());
    }
    for (float v : m.values()) {
        if (v != 0.0f && v != 1.0f) throw std::invalid_argument(std::string(what) + ": mask is not binary");
    }
}

void require_rgb(const Image& x, const char* what) {
    if (x.channels() != 3) {
        throw std::invalid_argument(std::string(what) + ": expected 3 channels, got " + x.shape().str());
    }
}

template <typename T>
double max_abs_diff(const TensorT<T>& a, const TensorT<T>& b) {
    require_same_shape(a.shape(), b.shape(), "max_abs_diff");
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        worst = std::max(worst, std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i])));
    }
    return worst;
}

template <typename T>
TensorT<T> slice_channels(const TensorT<T>& x, int first, int count) {
    if (first < 0 || count < 0 || first + count > x.channels()) {
        throw std::out_of_range("slice_channels: range outside " + x.shape().str());
    }
    TensorT<T> out(count, x.height(), x.width());
    std::copy_n(x.channel(first), out.size(), out.data());
    return out;
}

template <typename T>
TensorT<T> concat_channels(std::span<const TensorT<T>* const> parts) {
    if (parts.empty()) throw std::invalid_argument("concat_channels: no inputs");
    const int h = parts.front()->height();
    const int w = parts.front()->width();
    int total = 0;
    for (const auto* p : parts) {
        if (p->height() != h || p->width() != w) {
            throw std::invalid_argument("concat_channels: spatial mismatch " + p->shape().str());
        }
        total += p->channels();
    }
    TensorT<T> out(total, h, w);
    T* dst = out.data();
    for (const auto* p : parts) dst = std::copy(p->data(), p->data() + p->size(), dst);
    return out;
}

bool all_finite(const Tensor& x) {
    return std::all_of(x.values().begin(), x.values().end(), [](float v) { return std::isfinite(v); });
}

template double max_abs_diff(const TensorT<float>&, const TensorT<float>&);
template double max_abs_diff(const TensorT<double>&, const TensorT<double>&);
template TensorT<float> slice_channels(const TensorT<float>&, int, int);
template TensorT<double> slice_channels(const TensorT<double>&, int, int);
template TensorT<float> concat_channels(std::span<const TensorT<float>* const>);
template TensorT<double> concat_channels(std::span<const TensorT<double>* const>);

}  // namespace sketchedit
