#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "sketchedit/nn.hpp"
#include "sketchedit/params.hpp"
#include "sketchedit/tensor.hpp"

namespace sketchedit {

/// Mean over kept pixels (m = 1) of the summed per-channel squared
/// difference, measured on the 8-bit scale. Throws std::invalid_argument
/// when nothing is kept.
double pre_error(const Image& gen, const Image& src, const Mask& m);

/// Frozen random convolution stack (3 -> 8 -> 16 -> 32, 3x3, stride 2, ReLU)
/// used as a feature extractor by the perceptual distance and FID.
class PerceptualNet {
public:
    static constexpr std::uint64_t kSeed = 0x5EED1E55ULL;

    explicit PerceptualNet(std::uint64_t seed = kSeed);
    static const PerceptualNet& standard();

    /// Post-ReLU activations of every layer.
    std::vector<Tensor> activations(const Image& x) const;
    /// Last layer, globally average pooled.
    std::vector<double> pooled(const Image& x) const;
    int feature_dim() const { return convs_.back().out_channels; }

private:
    ParamSet params_;
    std::vector<nn::Conv2d> convs_;
};

/// Mean over layers of the mean squared difference between channel-unit-normalised activations.
double perceptual_distance(const Image& a, const Image& b, const PerceptualNet& net = PerceptualNet::standard());

/// One row per image.
using FeatureSet = Eigen::MatrixXd;
using FeatureExtractor = std::function<std::vector<double>(const Image&)>;

/// Default extractor: PerceptualNet::standard().pooled.
FeatureSet extract_features(std::span<const Image> images, const FeatureExtractor& extractor = {});

/// Frechet distance between Gaussian fits of two feature sets, covariances
/// regularised by 1e-6 I. Each set needs at least d + 1 rows.
double fid(const FeatureSet& a, const FeatureSet& b);

double cosine_similarity(std::span<const double> a, std::span<const double> b);

/// Text-alignment proxy: a small MLP head on pooled perceptual features,
/// trained contrastively against text embeddings. Not a CLIP score.
struct AlignProxy {
    static constexpr int kHidden = 64;

    static ParamSet init(int feature_dim, int text_dim, std::uint64_t seed);
    static std::vector<double> embed_image(const ParamSet& head, std::span<const double> features);

    /// Trains a fresh head: cross-entropy over temperature-scaled cosine
    /// similarity between each image and every distinct caption embedding.
    static ParamSet train(std::span<const Image> images, std::span<const std::vector<double>> text_embeddings,
                          int steps, double lr, std::uint64_t seed);
};

/// Cosine similarity in [-1, 1]; throws std::logic_error for an untrained (empty) head.
double text_align(const ParamSet& head, const Image& image, std::span<const double> text_embedding);

struct MetricReport {
    double fid = 0.0;
    double lpips_like = 0.0;
    double pre_error = 0.0;
    double text_align = 0.0;
    int n_images = 0;
    bool proxy = true;  // text_align is a proxy, not a CLIP score
    std::vector<std::pair<std::string, double>> per_image_pre_error;
};

}  // namespace sketchedit
