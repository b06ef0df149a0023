#include "sketchedit/nn.hpp"

#include <Eigen/Core>
#include <cmath>
#include <stdexcept>

namespace sketchedit::nn {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMapMat = Eigen::Map<const RowMat<T>>;

// cols[(ci*k + ky)*k + kx][oy*wo + ox] = x[ci][oy*s + ky - pad][ox*s + kx - pad]
template <typename T>
void im2col(const TensorT<T>& x, int k, int stride, int ho, int wo, AlignedVector<T>& cols) {
    const int pad = k / 2;
    const int h = x.height(), w = x.width();
    const std::size_t n = static_cast<std::size_t>(ho) * wo;
    cols.assign(static_cast<std::size_t>(x.channels()) * k * k * n, T(0));
    T* dst = cols.data();
    for (int c = 0; c < x.channels(); ++c) {
        const T* src = x.channel(c);
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx, dst += n) {
                for (int oy = 0; oy < ho; ++oy) {
                    const int iy = oy * stride + ky - pad;
                    if (iy < 0 || iy >= h) continue;
                    T* row = dst + static_cast<std::size_t>(oy) * wo;
                    for (int ox = 0; ox < wo; ++ox) {
                        const int ix = ox * stride + kx - pad;
                        if (ix >= 0 && ix < w) row[ox] = src[iy * w + ix];
                    }
                }
            }
        }
    }
}

template <typename T>
void col2im(const AlignedVector<T>& cols, int k, int stride, int ho, int wo, TensorT<T>& dx) {
    const int pad = k / 2;
    const int h = dx.height(), w = dx.width();
    const std::size_t n = static_cast<std::size_t>(ho) * wo;
    const T* src = cols.data();
    for (int c = 0; c < dx.channels(); ++c) {
        T* out = dx.channel(c);
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx, src += n) {
                for (int oy = 0; oy < ho; ++oy) {
                    const int iy = oy * stride + ky - pad;
                    if (iy < 0 || iy >= h) continue;
                    const T* row = src + static_cast<std::size_t>(oy) * wo;
                    for (int ox = 0; ox < wo; ++ox) {
                        const int ix = ox * stride + kx - pad;
                        if (ix >= 0 && ix < w) out[iy * w + ix] += row[ox];
                    }
                }
            }
        }
    }
}

}  // namespace

template <typename T>
T silu(T x) {
    return x / (T(1) + std::exp(-x));
}

template <typename T>
T silu_grad(T x) {
    const T s = T(1) / (T(1) + std::exp(-x));
    return s * (T(1) + x * (T(1) - s));
}

template <typename T>
TensorT<T> silu(const TensorT<T>& x) {
    TensorT<T> y(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = silu(x[i]);
    return y;
}

template <typename T>
TensorT<T> silu_backward(const TensorT<T>& x, const TensorT<T>& dy) {
    TensorT<T> dx(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) dx[i] = dy[i] * silu_grad(x[i]);
    return dx;
}

template <typename T>
TensorT<T> upsample2(const TensorT<T>& x) {
    TensorT<T> y(x.channels(), x.height() * 2, x.width() * 2);
    for (int c = 0; c < y.channels(); ++c)
        for (int i = 0; i < y.height(); ++i)
            for (int j = 0; j < y.width(); ++j) y.at(c, i, j) = x.at(c, i / 2, j / 2);
    return y;
}

template <typename T>
TensorT<T> upsample2_backward(const TensorT<T>& dy) {
    TensorT<T> dx(dy.channels(), dy.height() / 2, dy.width() / 2);
    for (int c = 0; c < dy.channels(); ++c)
        for (int i = 0; i < dy.height(); ++i)
            for (int j = 0; j < dy.width(); ++j) dx.at(c, i / 2, j / 2) += dy.at(c, i, j);
    return dx;
}

Conv2d Conv2d::create(ParamSetT<float>& params, const std::string& name, int in, int out, int kernel, int stride) {
    if (in <= 0 || out <= 0 || kernel <= 0 || kernel % 2 == 0 || stride <= 0) {
        throw std::invalid_argument("Conv2d '" + name + "': invalid geometry");
    }
    Conv2d c;
    c.weight = params.add(name + ".weight", {out, in, kernel, kernel});
    c.bias = params.add(name + ".bias", {out});
    c.in_channels = in;
    c.out_channels = out;
    c.kernel = kernel;
    c.stride = stride;
    return c;
}

Shape Conv2d::output_shape(const Shape& in) const {
    const int pad = kernel / 2;
    return {out_channels, (in.height + 2 * pad - kernel) / stride + 1, (in.width + 2 * pad - kernel) / stride + 1};
}

std::size_t Conv2d::parameter_count() const {
    return static_cast<std::size_t>(out_channels) * in_channels * kernel * kernel + out_channels;
}

template <typename T>
TensorT<T> Conv2d::forward(const ParamSetT<T>& p, const TensorT<T>& x) const {
    if (x.channels() != in_channels) {
        throw std::invalid_argument("Conv2d: expected " + std::to_string(in_channels) + " input channels, got " +
                                    x.shape().str());
    }
    const Shape os = output_shape(x.shape());
    TensorT<T> y(os);
    const Eigen::Index n = static_cast<Eigen::Index>(os.plane());
    const Eigen::Index kdim = static_cast<Eigen::Index>(in_channels) * kernel * kernel;
    ConstMapMat<T> w(p.data(weight), out_channels, kdim);
    Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> b(p.data(bias), out_channels);
    MapMat<T> ym(y.data(), out_channels, n);
    if (kernel == 1 && stride == 1) {
        ym.noalias() = w * ConstMapMat<T>(x.data(), kdim, n);
    } else {
        thread_local AlignedVector<T> cols;
        im2col(x, kernel, stride, os.height, os.width, cols);
        ym.noalias() = w * ConstMapMat<T>(cols.data(), kdim, n);
    }
    ym.colwise() += b;
    return y;
}

template <typename T>
TensorT<T> Conv2d::backward(const ParamSetT<T>& p, ParamSetT<T>& grads, const TensorT<T>& x, const TensorT<T>& dy,
                            bool need_input_grad) const {
    const Shape os = output_shape(x.shape());
    require_same_shape(os, dy.shape(), "Conv2d::backward");
    const Eigen::Index n = static_cast<Eigen::Index>(os.plane());
    const Eigen::Index kdim = static_cast<Eigen::Index>(in_channels) * kernel * kernel;
    ConstMapMat<T> w(p.data(weight), out_channels, kdim);
    ConstMapMat<T> dym(dy.data(), out_channels, n);
    MapMat<T> dw(grads.data(weight), out_channels, kdim);
    Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>> db(grads.data(bias), out_channels);
    db += dym.rowwise().sum();

    const bool direct = kernel == 1 && stride == 1;
    thread_local AlignedVector<T> cols;
    if (direct) {
        dw.noalias() += dym * ConstMapMat<T>(x.data(), kdim, n).transpose();
    } else {
        im2col(x, kernel, stride, os.height, os.width, cols);
        dw.noalias() += dym * ConstMapMat<T>(cols.data(), kdim, n).transpose();
    }
    if (!need_input_grad) return {};

    TensorT<T> dx(x.shape());
    if (direct) {
        MapMat<T>(dx.data(), kdim, n).noalias() = w.transpose() * dym;
    } else {
        cols.resize(static_cast<std::size_t>(kdim * n));
        MapMat<T>(cols.data(), kdim, n).noalias() = w.transpose() * dym;
        col2im(cols, kernel, stride, os.height, os.width, dx);
    }
    return dx;
}

Linear Linear::create(ParamSetT<float>& params, const std::string& name, int in, int out) {
    Linear l;
    l.weight = params.add(name + ".weight", {out, in});
    l.bias = params.add(name + ".bias", {out});
    l.in_features = in;
    l.out_features = out;
    return l;
}

template <typename T>
std::vector<T> Linear::forward(const ParamSetT<T>& p, std::span<const T> x) const {
    using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;
    if (static_cast<int>(x.size()) != in_features) throw std::invalid_argument("Linear: input size mismatch");
    const Vec xv = Eigen::Map<const Vec>(x.data(), in_features);
    Vec yv = ConstMapMat<T>(p.data(weight), out_features, in_features) * xv;
    yv += Eigen::Map<const Vec>(p.data(bias), out_features);
    return std::vector<T>(yv.data(), yv.data() + out_features);
}

template <typename T>
std::vector<T> Linear::backward(const ParamSetT<T>& p, ParamSetT<T>& grads, std::span<const T> x,
                                std::span<const T> dy) const {
    using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;
    const Vec xv = Eigen::Map<const Vec>(x.data(), in_features);
    const Vec dyv = Eigen::Map<const Vec>(dy.data(), out_features);
    MapMat<T>(grads.data(weight), out_features, in_features).noalias() += dyv * xv.transpose();
    Eigen::Map<Vec>(grads.data(bias), out_features) += dyv;
    const Vec dx = ConstMapMat<T>(p.data(weight), out_features, in_features).transpose() * dyv;
    return std::vector<T>(dx.data(), dx.data() + in_features);
}

ResBlock ResBlock::create(ParamSetT<float>& params, const std::string& name, int in, int out, int emb_dim) {
    ResBlock b;
    b.conv1 = Conv2d::create(params, name + ".conv1", in, out, 3);
    b.emb_proj = Linear::create(params, name + ".emb", emb_dim, out);
    b.conv2 = Conv2d::create(params, name + ".conv2", out, out, 3);
    if (in != out) b.shortcut = Conv2d::create(params, name + ".skip", in, out, 1);
    return b;
}

template <typename T>
TensorT<T> ResBlock::forward(const ParamSetT<T>& p, const TensorT<T>& x, std::span<const T> emb,
                             Cache<T>* cache) const {
    TensorT<T> h1 = conv1.forward(p, silu(x));
    const std::vector<T> e = emb_proj.forward(p, emb);
    const std::size_t plane = h1.shape().plane();
    for (int c = 0; c < h1.channels(); ++c) {
        T* ch = h1.channel(c);
        for (std::size_t i = 0; i < plane; ++i) ch[i] += e[c];
    }
    TensorT<T> y = conv2.forward(p, silu(h1));
    const TensorT<T> skip = shortcut ? shortcut->forward(p, x) : x;
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += skip[i];
    if (cache) {
        cache->x = x;
        cache->h1 = std::move(h1);
    }
    return y;
}

template <typename T>
TensorT<T> ResBlock::backward(const ParamSetT<T>& p, ParamSetT<T>& grads, const Cache<T>& cache,
                              std::span<const T> emb, const TensorT<T>& dy, std::span<T> d_emb) const {
    TensorT<T> dh1 = silu_backward(cache.h1, conv2.backward(p, grads, silu(cache.h1), dy));
    const std::size_t plane = dh1.shape().plane();
    std::vector<T> de(static_cast<std::size_t>(dh1.channels()), T(0));
    for (int c = 0; c < dh1.channels(); ++c) {
        const T* ch = dh1.channel(c);
        T s = T(0);
        for (std::size_t i = 0; i < plane; ++i) s += ch[i];
        de[c] = s;
    }
    const std::vector<T> demb = emb_proj.backward(p, grads, emb, std::span<const T>(de));
    for (std::size_t k = 0; k < demb.size(); ++k) d_emb[k] += demb[k];

    TensorT<T> dx = silu_backward(cache.x, conv1.backward(p, grads, silu(cache.x), dh1));
    if (shortcut) {
        const TensorT<T> ds = shortcut->backward(p, grads, cache.x, dy);
        for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += ds[i];
    } else {
        for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += dy[i];
    }
    return dx;
}

std::vector<double> timestep_embedding(int t, int dim) {
    if (dim % 2 != 0) throw std::invalid_argument("timestep_embedding: dim must be even");
    const int half = dim / 2;
    std::vector<double> out(static_cast<std::size_t>(dim));
    for (int k = 0; k < half; ++k) {
        const double freq = std::exp(-std::log(10000.0) * k / half);
        out[k] = std::sin(t * freq);
        out[half + k] = std::cos(t * freq);
    }
    return out;
}

#define SKETCHEDIT_INSTANTIATE(T)                                                                               \
    template T silu(T);                                                                                         \
    template T silu_grad(T);                                                                                    \
    template TensorT<T> silu(const TensorT<T>&);                                                                \
    template TensorT<T> silu_backward(const TensorT<T>&, const TensorT<T>&);                                    \
    template TensorT<T> upsample2(const TensorT<T>&);                                                           \
    template TensorT<T> upsample2_backward(const TensorT<T>&);                                                  \
    template TensorT<T> Conv2d::forward(const ParamSetT<T>&, const TensorT<T>&) const;                          \
    template TensorT<T> Conv2d::backward(const ParamSetT<T>&, ParamSetT<T>&, const TensorT<T>&,                 \
                                         const TensorT<T>&, bool) const;                                        \
    template std::vector<T> Linear::forward(const ParamSetT<T>&, std::span<const T>) const;                     \
    template std::vector<T> Linear::backward(const ParamSetT<T>&, ParamSetT<T>&, std::span<const T>,            \
                                             std::span<const T>) const;                                         \
    template TensorT<T> ResBlock::forward(const ParamSetT<T>&, const TensorT<T>&, std::span<const T>,           \
                                          Cache<T>*) const;                                                     \
    template TensorT<T> ResBlock::backward(const ParamSetT<T>&, ParamSetT<T>&, const Cache<T>&,                 \
                                           std::span<const T>, const TensorT<T>&, std::span<T>) const;

SKETCHEDIT_INSTANTIATE(float)
SKETCHEDIT_INSTANTIATE(double)
#undef SKETCHEDIT_INSTANTIATE

}  // namespace sketchedit::nn
