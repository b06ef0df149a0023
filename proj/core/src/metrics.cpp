#include "sketchedit/metrics.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "sketchedit/image_io.hpp"
#include "sketchedit/random.hpp"

namespace sketchedit {

double pre_error(const Image& gen, const Image& src, const Mask& m) {
    require_rgb(gen, "pre_error");
    require_same_shape(gen.shape(), src.shape(), "pre_error");
    require_binary_mask(m, "pre_error");
    if (m.height() != gen.height() || m.width() != gen.width()) {
        throw std::invalid_argument("pre_error: mask " + m.shape().str() + " vs image " + gen.shape().str());
    }
    double sum = 0.0;
    std::size_t kept = 0;
    for (int i = 0; i < m.height(); ++i) {
        for (int j = 0; j < m.width(); ++j) {
            if (m.at(0, i, j) != 1.0f) continue;
            ++kept;
            for (int c = 0; c < 3; ++c) {
                const double d = static_cast<double>(to_u8(gen.at(c, i, j))) - static_cast<double>(to_u8(src.at(c, i, j)));
                sum += d * d;
            }
        }
    }
    if (kept == 0) throw std::invalid_argument("pre_error: mask keeps no pixels");
    return sum / static_cast<double>(kept);
}

PerceptualNet::PerceptualNet(std::uint64_t seed) {
    const int widths[] = {3, 8, 16, 32};
    for (int l = 0; l < 3; ++l) {
        convs_.push_back(nn::Conv2d::create(params_, "perceptual." + std::to_string(l), widths[l], widths[l + 1], 3, 2));
    }
    Rng rng(seed);
    for (auto& t : params_) {
        const int fan_in = t.shape.size() == 4 ? t.shape[1] * t.shape[2] * t.shape[3] : 3 * 9;
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        for (auto& v : t.values) v = static_cast<float>(rng.uniform(-bound, bound));
    }
}

const PerceptualNet& PerceptualNet::standard() {
    static const PerceptualNet net;
    return net;
}

std::vector<Tensor> PerceptualNet::activations(const Image& x) const {
    require_rgb(x, "PerceptualNet");
    std::vector<Tensor> out;
    const Tensor* h = &x;
    for (const auto& conv : convs_) {
        Tensor y = conv.forward(params_, *h);
        for (auto& v : y.values()) v = std::max(v, 0.0f);
        out.push_back(std::move(y));
        h = &out.back();
    }
    return out;
}

std::vector<double> PerceptualNet::pooled(const Image& x) const {
    const Tensor last = std::move(activations(x).back());
    std::vector<double> f(static_cast<std::size_t>(last.channels()), 0.0);
    const std::size_t plane = last.shape().plane();
    for (int c = 0; c < last.channels(); ++c) {
        const float* ch = last.channel(c);
        double s = 0.0;
        for (std::size_t i = 0; i < plane; ++i) s += ch[i];
        f[c] = s / static_cast<double>(plane);
    }
    return f;
}

double perceptual_distance(const Image& a, const Image& b, const PerceptualNet& net) {
    require_same_shape(a.shape(), b.shape(), "perceptual_distance");
    const auto fa = net.activations(a);
    const auto fb = net.activations(b);
    double total = 0.0;
    for (std::size_t l = 0; l < fa.size(); ++l) {
        const Tensor& x = fa[l];
        const Tensor& y = fb[l];
        const std::size_t plane = x.shape().plane();
        double layer = 0.0;
        for (std::size_t p = 0; p < plane; ++p) {
            double nx = 0.0, ny = 0.0;
            for (int c = 0; c < x.channels(); ++c) {
                nx += static_cast<double>(x.channel(c)[p]) * x.channel(c)[p];
                ny += static_cast<double>(y.channel(c)[p]) * y.channel(c)[p];
            }
            nx = std::sqrt(nx) + 1e-10;
            ny = std::sqrt(ny) + 1e-10;
            for (int c = 0; c < x.channels(); ++c) {
                const double d = x.channel(c)[p] / nx - y.channel(c)[p] / ny;
                layer += d * d;
            }
        }
        total += layer / static_cast<double>(x.size());
    }
    return total / static_cast<double>(fa.size());
}

FeatureSet extract_features(std::span<const Image> images, const FeatureExtractor& extractor) {
    const FeatureExtractor& fn =
        extractor ? extractor : FeatureExtractor([](const Image& x) { return PerceptualNet::standard().pooled(x); });
    FeatureSet out;
    for (std::size_t i = 0; i < images.size(); ++i) {
        const auto f = fn(images[i]);
        if (i == 0) out.resize(static_cast<Eigen::Index>(images.size()), static_cast<Eigen::Index>(f.size()));
        if (static_cast<Eigen::Index>(f.size()) != out.cols()) {
            throw std::invalid_argument("extract_features: extractor returned inconsistent dimensions");
        }
        for (std::size_t k = 0; k < f.size(); ++k) out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = f[k];
    }
    return out;
}

namespace {

void gaussian_fit(const FeatureSet& x, Eigen::VectorXd& mu, Eigen::MatrixXd& cov) {
    mu = x.colwise().mean().transpose();
    const Eigen::MatrixXd centered = x.rowwise() - mu.transpose();
    cov = (centered.transpose() * centered) / static_cast<double>(x.rows() - 1);
    cov += 1e-6 * Eigen::MatrixXd::Identity(x.cols(), x.cols());
}

}  // namespace

double fid(const FeatureSet& a, const FeatureSet& b) {
    if (a.cols() != b.cols()) throw std::invalid_argument("fid: feature dimensions differ");
    const Eigen::Index d = a.cols();
    if (a.rows() < d + 1 || b.rows() < d + 1) {
        throw std::invalid_argument("fid: need at least d + 1 = " + std::to_string(d + 1) + " samples per set");
    }
    if (!a.allFinite() || !b.allFinite()) throw std::invalid_argument("fid: non-finite features");

    Eigen::VectorXd mu_a, mu_b;
    Eigen::MatrixXd cov_a, cov_b;
    gaussian_fit(a, mu_a, cov_a);
    gaussian_fit(b, mu_b, cov_b);

    // Tr((A B)^1/2) = Tr((A^1/2 B A^1/2)^1/2), the latter symmetric PSD.
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig_a(cov_a);
    const Eigen::VectorXd sqrt_vals = eig_a.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    const Eigen::MatrixXd sqrt_a = eig_a.eigenvectors() * sqrt_vals.asDiagonal() * eig_a.eigenvectors().transpose();
    Eigen::MatrixXd inner = sqrt_a * cov_b * sqrt_a;
    inner = 0.5 * (inner + inner.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig_inner(inner, Eigen::EigenvaluesOnly);
    const double tr_sqrt = eig_inner.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();

    const double value = (mu_a - mu_b).squaredNorm() + cov_a.trace() + cov_b.trace() - 2.0 * tr_sqrt;
    return std::max(value, 0.0);
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size() || a.empty()) throw std::invalid_argument("cosine_similarity: size mismatch");
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

namespace {

struct AlignLayers {
    nn::Linear fc1, fc2;
};

AlignLayers align_layers(ParamSet& p, int feature_dim, int text_dim) {
    return {nn::Linear::create(p, "align.fc1", feature_dim, AlignProxy::kHidden),
            nn::Linear::create(p, "align.fc2", AlignProxy::kHidden, text_dim)};
}

AlignLayers align_layers_of(const ParamSet& head) {
    const auto& w1 = head["align.fc1.weight"];
    const auto& w2 = head["align.fc2.weight"];
    return {{head.index("align.fc1.weight"), head.index("align.fc1.bias"), w1.shape[1], w1.shape[0]},
            {head.index("align.fc2.weight"), head.index("align.fc2.bias"), w2.shape[1], w2.shape[0]}};
}

}  // namespace

ParamSet AlignProxy::init(int feature_dim, int text_dim, std::uint64_t seed) {
    ParamSet p;
    align_layers(p, feature_dim, text_dim);
    Rng rng(derive_seed({seed, 0xA119ULL}));
    for (auto& t : p) {
        if (t.shape.size() != 2) continue;
        const double bound = 1.0 / std::sqrt(static_cast<double>(t.shape[1]));
        for (auto& v : t.values) v = static_cast<float>(rng.uniform(-bound, bound));
    }
    return p;
}

std::vector<double> AlignProxy::embed_image(const ParamSet& head, std::span<const double> features) {
    const AlignLayers layers = align_layers_of(head);
    const auto p = head.cast<double>();
    std::vector<double> h = layers.fc1.forward(p, features);
    for (auto& v : h) v = nn::silu(v);
    return layers.fc2.forward(p, std::span<const double>(h));
}

ParamSet AlignProxy::train(std::span<const Image> images, std::span<const std::vector<double>> text_embeddings,
                           int steps, double lr, std::uint64_t seed) {
    if (images.empty() || images.size() != text_embeddings.size()) {
        throw std::invalid_argument("AlignProxy::train: need one text embedding per image");
    }
    const int text_dim = static_cast<int>(text_embeddings.front().size());
    const FeatureSet feats = extract_features(images);
    const int feature_dim = static_cast<int>(feats.cols());

    // Distinct captions act as the candidate set for every image.
    std::vector<std::vector<double>> classes;
    std::vector<int> label(images.size());
    for (std::size_t i = 0; i < images.size(); ++i) {
        auto it = std::find(classes.begin(), classes.end(), text_embeddings[i]);
        if (it == classes.end()) {
            classes.push_back(text_embeddings[i]);
            it = classes.end() - 1;
        }
        label[i] = static_cast<int>(it - classes.begin());
    }
    std::vector<std::vector<double>> unit(classes.size());
    for (std::size_t k = 0; k < classes.size(); ++k) {
        double n = 0.0;
        for (double v : classes[k]) n += v * v;
        n = std::sqrt(n) + 1e-12;
        for (double v : classes[k]) unit[k].push_back(v / n);
    }

    ParamSet head_f = init(feature_dim, text_dim, seed);
    const AlignLayers layers = align_layers_of(head_f);
    ParamSetT<double> p = head_f.cast<double>();
    ParamSetT<double> m = p.zeros_like(), v = p.zeros_like(), g = p.zeros_like();
    constexpr double kTemperature = 0.1;
    constexpr int kBatch = 32;
    Rng rng(derive_seed({seed, 0xA11BULL}));
    for (int step = 1; step <= steps; ++step) {
        g.set_zero();
        for (int b = 0; b < kBatch; ++b) {
            const int i = rng.uniform_int(0, static_cast<int>(images.size()) - 1);
            std::vector<double> f(static_cast<std::size_t>(feature_dim));
            for (int k = 0; k < feature_dim; ++k) f[k] = feats(i, k);
            const std::vector<double> pre = layers.fc1.forward(p, std::span<const double>(f));
            std::vector<double> act(pre.size());
            for (std::size_t k = 0; k < pre.size(); ++k) act[k] = nn::silu(pre[k]);
            const std::vector<double> u = layers.fc2.forward(p, std::span<const double>(act));
            double un = 0.0;
            for (double x : u) un += x * x;
            un = std::sqrt(un) + 1e-12;

            std::vector<double> cos(classes.size());
            double max_logit = -1e300;
            for (std::size_t k = 0; k < classes.size(); ++k) {
                double dot = 0.0;
                for (int q = 0; q < text_dim; ++q) dot += u[q] / un * unit[k][q];
                cos[k] = dot;
                max_logit = std::max(max_logit, dot / kTemperature);
            }
            std::vector<double> prob(classes.size());
            double z = 0.0;
            for (std::size_t k = 0; k < classes.size(); ++k) z += prob[k] = std::exp(cos[k] / kTemperature - max_logit);
            std::vector<double> du(static_cast<std::size_t>(text_dim), 0.0);
            for (std::size_t k = 0; k < classes.size(); ++k) {
                const double dlogit = (prob[k] / z - (static_cast<int>(k) == label[i] ? 1.0 : 0.0)) / kBatch;
                const double dcos = dlogit / kTemperature;
                for (int q = 0; q < text_dim; ++q) du[q] += dcos * (unit[k][q] - cos[k] * u[q] / un) / un;
            }
            std::vector<double> dact = layers.fc2.backward(p, g, std::span<const double>(act), std::span<const double>(du));
            for (std::size_t k = 0; k < dact.size(); ++k) dact[k] *= nn::silu_grad(pre[k]);
            layers.fc1.backward(p, g, std::span<const double>(f), std::span<const double>(dact));
        }
        const double c1 = 1.0 - std::pow(0.9, step), c2 = 1.0 - std::pow(0.999, step);
        for (std::size_t t = 0; t < p.size(); ++t) {
            for (std::size_t k = 0; k < p[t].values.size(); ++k) {
                const double gk = g[t].values[k];
                m[t].values[k] = 0.9 * m[t].values[k] + 0.1 * gk;
                v[t].values[k] = 0.999 * v[t].values[k] + 0.001 * gk * gk;
                p[t].values[k] -= lr * (m[t].values[k] / c1) / (std::sqrt(v[t].values[k] / c2) + 1e-8);
            }
        }
    }
    return p.cast<float>();
}

double text_align(const ParamSet& head, const Image& image, std::span<const double> text_embedding) {
    if (head.size() == 0) throw std::logic_error("text_align: proxy head is untrained");
    const auto u = AlignProxy::embed_image(head, PerceptualNet::standard().pooled(image));
    return cosine_similarity(u, text_embedding);
}

}  // namespace sketchedit
