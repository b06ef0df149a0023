#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "sketchedit/tensor.hpp"

namespace sketchedit {

/// Sketches are RGB images with dark (-1) strokes on a light (+1) background.
using Sketch = Tensor;

/// Geometry and acceptance bounds for free-form training masks.
struct MaskConfig {
    int height = 32;
    int width = 32;
    int control_points = 18;
    /// Curve centre drawn uniformly in [center_min, center_max] x dims.
    double center_min = 0.3;
    double center_max = 0.7;
    /// Control-point radii drawn uniformly in [radius_min, radius_max] x min(H, W).
    double radius_min = 0.1;
    double radius_max = 0.4;
    /// Accepted editable-area fraction range.
    double min_area = 0.05;
    double max_area = 0.4;
    int max_retries = 200;

    bool operator==(const MaskConfig&) const = default;
};

/// Free-form mask: a closed quadratic Bezier curve through control points at
/// sorted random angles around a random centre. Interior = 0 (editable),
/// exterior = 1. Resamples until the editable area is a single 4-connected
/// region whose fraction lies within the configured bounds; throws
/// std::runtime_error when max_retries is exhausted.
Mask bezier_mask(std::uint64_t seed, const MaskConfig& cfg);

/// Closed outline of the curve used by bezier_mask for one attempt, flattened to a polygon.
std::vector<std::pair<double, double>> bezier_outline(std::span<const std::pair<double, double>> control_points,
                                                      int samples_per_segment = 16);

/// Even-odd scanline fill sampled at pixel centres; returns 0 inside, 1 outside.
Mask rasterize_polygon(std::span<const std::pair<double, double>> polygon, int height, int width);

/// Fraction of pixels that are editable (0).
double editable_fraction(const Mask& m);

/// Number of 4-connected components of the editable region.
int editable_components(const Mask& m);

/// x_m = m * x + (1 - m) * 0.
Image masked_source(const Image& x, const Mask& m);

/// x_s = m * sketch_src + (1 - m) * sketch_user.
Sketch fuse_sketch(const Sketch& sketch_src, const Sketch& sketch_user, const Mask& m);

struct SketchConfig {
    double edge_threshold = 0.2;
};

/// Deterministic edge sketch: one-sided 3x3 difference kernels per channel,
/// magnitude normalised by the full value range, thresholded, inverted.
Sketch extract_sketch(const Image& x, const SketchConfig& cfg = {});

/// Closed token vocabulary. Id 0 is reserved for unknown tokens.
class Vocabulary {
public:
    static constexpr int kUnknown = 0;
    static constexpr std::string_view kUnknownToken = "<unk>";

    Vocabulary();
    explicit Vocabulary(const std::vector<std::string>& tokens);

    int size() const { return static_cast<int>(tokens_.size()); }
    const std::vector<std::string>& tokens() const { return tokens_; }
    int id(std::string_view token) const;

    /// Lowercases and splits on whitespace; throws std::invalid_argument on an empty caption.
    std::vector<int> tokenize(std::string_view caption) const;

private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, int> index_;
};

/// Mean of token rows from a row-major [vocab x dim] table.
template <typename T>
std::vector<T> embed_tokens(std::span<const int> ids, std::span<const T> table, int dim);

/// Gradient of embed_tokens: adds d_embedding / n to each used row of `table_grad`.
template <typename T>
void embed_tokens_backward(std::span<const int> ids, std::span<const T> d_embedding, std::span<T> table_grad,
                           int dim);

/// Everything the control branch sees, plus the prompt tokens.
struct ConditionBundle {
    Image masked_source;
    Mask mask;
    Sketch sketch;
    std::vector<int> tokens;
};

/// Channel layout of the stacked condition.
inline constexpr int kCondMaskedSource = 0;  // 3 channels
inline constexpr int kCondMask = 3;          // 1 channel
inline constexpr int kCondSketch = 4;        // 3 channels
inline constexpr int kCondChannels = 7;

/// H x W x 7 stack [x_m(3), m(1), x_s(3)].
Tensor assemble_condition(const ConditionBundle& bundle);

/// Builds the bundle for a request: x_m from the source, fused sketch, tokenized prompt.
ConditionBundle make_condition(const Image& source, const Mask& m, const Sketch& sketch_src,
                               const Sketch& sketch_user, std::vector<int> tokens);

}  // namespace sketchedit
