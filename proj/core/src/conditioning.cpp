#include "sketchedit/conditioning.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "sketchedit/random.hpp"

namespace sketchedit {

using Point = std::pair<double, double>;  // (x = column, y = row), pixel units

std::vector<Point> bezier_outline(std::span<const Point> cps, int samples_per_segment) {
    const std::size_t n = cps.size();
    std::vector<Point> out;
    if (n < 3) return {cps.begin(), cps.end()};
    out.reserve(n * static_cast<std::size_t>(samples_per_segment));
    auto mid = [](const Point& a, const Point& b) { return Point{(a.first + b.first) / 2, (a.second + b.second) / 2}; };
    // Segment i runs between the midpoints flanking control point i, using it as the handle.
    for (std::size_t i = 0; i < n; ++i) {
        const Point& prev = cps[(i + n - 1) % n];
        const Point& ctrl = cps[i];
        const Point& next = cps[(i + 1) % n];
        const Point p0 = mid(prev, ctrl);
        const Point p2 = mid(ctrl, next);
        for (int k = 0; k < samples_per_segment; ++k) {
            const double s = static_cast<double>(k) / samples_per_segment;
            const double a = (1 - s) * (1 - s), b = 2 * (1 - s) * s, c = s * s;
            out.emplace_back(a * p0.first + b * ctrl.first + c * p2.first,
                             a * p0.second + b * ctrl.second + c * p2.second);
        }
    }
    return out;
}

Mask rasterize_polygon(std::span<const Point> poly, int height, int width) {
    Mask m(1, height, width, 1.0f);
    const std::size_t n = poly.size();
    if (n < 3) return m;
    std::vector<double> xs;
    for (int y = 0; y < height; ++y) {
        const double yc = y + 0.5;
        xs.clear();
        for (std::size_t i = 0; i < n; ++i) {
            const auto& [x0, y0] = poly[i];
            const auto& [x1, y1] = poly[(i + 1) % n];
            if ((y0 <= yc && yc < y1) || (y1 <= yc && yc < y0)) {
                xs.push_back(x0 + (yc - y0) / (y1 - y0) * (x1 - x0));
            }
        }
        std::sort(xs.begin(), xs.end());
        for (std::size_t k = 0; k + 1 < xs.size(); k += 2) {
            const int first = std::max(0, static_cast<int>(std::ceil(xs[k] - 0.5)));
            const int last = std::min(width - 1, static_cast<int>(std::ceil(xs[k + 1] - 0.5)) - 1);
            for (int x = first; x <= last; ++x) m.at(0, y, x) = 0.0f;
        }
    }
    return m;
}

double editable_fraction(const Mask& m) {
    const auto zeros = std::count(m.values().begin(), m.values().end(), 0.0f);
    return m.empty() ? 0.0 : static_cast<double>(zeros) / static_cast<double>(m.size());
}

int editable_components(const Mask& m) {
    const int h = m.height(), w = m.width();
    std::vector<char> seen(m.size(), 0);
    std::vector<int> stack;
    int components = 0;
    for (int start = 0; start < h * w; ++start) {
        if (seen[start] || m[start] != 0.0f) continue;
        ++components;
        stack.push_back(start);
        seen[start] = 1;
        while (!stack.empty()) {
            const int p = stack.back();
            stack.pop_back();
            const int y = p / w, x = p % w;
            const int nbrs[4][2] = {{y - 1, x}, {y + 1, x}, {y, x - 1}, {y, x + 1}};
            for (const auto& [ny, nx] : nbrs) {
                if (ny < 0 || ny >= h || nx < 0 || nx >= w) continue;
                const int q = ny * w + nx;
                if (!seen[q] && m[q] == 0.0f) {
                    seen[q] = 1;
                    stack.push_back(q);
                }
            }
        }
    }
    return components;
}

Mask bezier_mask(std::uint64_t seed, const MaskConfig& cfg) {
    if (cfg.height <= 0 || cfg.width <= 0) throw std::invalid_argument("bezier_mask: non-positive dims");
    if (cfg.control_points < 3) throw std::invalid_argument("bezier_mask: need at least 3 control points");
    if (cfg.radius_min < 0 || cfg.radius_min > cfg.radius_max) throw std::invalid_argument("bezier_mask: bad radius range");
    if (cfg.min_area > cfg.max_area) throw std::invalid_argument("bezier_mask: min_area > max_area");

    Rng rng(derive_seed({seed, 0xB3ULL}));
    const double scale = std::min(cfg.height, cfg.width);
    std::vector<double> angles(static_cast<std::size_t>(cfg.control_points));
    std::vector<Point> cps(angles.size());
    for (int attempt = 0; attempt < cfg.max_retries; ++attempt) {
        const double cx = rng.uniform(cfg.center_min, cfg.center_max) * cfg.width;
        const double cy = rng.uniform(cfg.center_min, cfg.center_max) * cfg.height;
        for (auto& a : angles) a = rng.uniform(0.0, 2.0 * std::numbers::pi);
        std::sort(angles.begin(), angles.end());
        for (std::size_t i = 0; i < angles.size(); ++i) {
            const double r = rng.uniform(cfg.radius_min, cfg.radius_max) * scale;
            cps[i] = {cx + r * std::cos(angles[i]), cy + r * std::sin(angles[i])};
        }
        Mask m = rasterize_polygon(bezier_outline(cps), cfg.height, cfg.width);
        const double area = editable_fraction(m);
        if (area < cfg.min_area || area > cfg.max_area) continue;
        if (area > 0.0 && editable_components(m) != 1) continue;
        return m;
    }
    throw std::runtime_error("bezier_mask: no mask within area bounds [" + std::to_string(cfg.min_area) + ", " +
                             std::to_string(cfg.max_area) + "] after " + std::to_string(cfg.max_retries) +
                             " attempts");
}

Image masked_source(const Image& x, const Mask& m) {
    require_rgb(x, "masked_source");
    require_binary_mask(m, "masked_source");
    if (x.height() != m.height() || x.width() != m.width()) {
        throw std::invalid_argument("masked_source: image " + x.shape().str() + " vs mask " + m.shape().str());
    }
    Image out(x.shape());
    for (int c = 0; c < 3; ++c)
        for (int i = 0; i < x.height(); ++i)
            for (int j = 0; j < x.width(); ++j) out.at(c, i, j) = m.at(0, i, j) == 1.0f ? x.at(c, i, j) : 0.0f;
    return out;
}

Sketch fuse_sketch(const Sketch& sketch_src, const Sketch& sketch_user, const Mask& m) {
    require_rgb(sketch_src, "fuse_sketch");
    require_same_shape(sketch_src.shape(), sketch_user.shape(), "fuse_sketch");
    require_binary_mask(m, "fuse_sketch");
    if (sketch_src.height() != m.height() || sketch_src.width() != m.width()) {
        throw std::invalid_argument("fuse_sketch: sketch " + sketch_src.shape().str() + " vs mask " + m.shape().str());
    }
    Sketch out(sketch_src.shape());
    for (int c = 0; c < 3; ++c)
        for (int i = 0; i < m.height(); ++i)
            for (int j = 0; j < m.width(); ++j)
                out.at(c, i, j) = m.at(0, i, j) == 1.0f ? sketch_src.at(c, i, j) : sketch_user.at(c, i, j);
    return out;
}

Sketch extract_sketch(const Image& x, const SketchConfig& cfg) {
    require_rgb(x, "extract_sketch");
    const int h = x.height(), w = x.width();
    auto px = [&](int c, int i, int j) {
        return static_cast<double>(x.at(c, std::clamp(i, 0, h - 1), std::clamp(j, 0, w - 1)));
    };
    Sketch out(3, h, w, 1.0f);
    constexpr double kRange = 2.0;  // a full-range step yields magnitude 1
    for (int i = 0; i < h; ++i) {
        for (int j = 0; j < w; ++j) {
            double best = 0.0;
            for (int c = 0; c < 3; ++c) {
                // Kernels [0 -1 1; 0 -2 2; 0 -1 1] / 4 and its transpose.
                const double gx = ((px(c, i - 1, j + 1) - px(c, i - 1, j)) + 2 * (px(c, i, j + 1) - px(c, i, j)) +
                                   (px(c, i + 1, j + 1) - px(c, i + 1, j))) / 4.0;
                const double gy = ((px(c, i + 1, j - 1) - px(c, i, j - 1)) + 2 * (px(c, i + 1, j) - px(c, i, j)) +
                                   (px(c, i + 1, j + 1) - px(c, i, j + 1))) / 4.0;
                best = std::max(best, std::sqrt(gx * gx + gy * gy) / kRange);
            }
            if (best > cfg.edge_threshold) {
                for (int c = 0; c < 3; ++c) out.at(c, i, j) = -1.0f;
            }
        }
    }
    return out;
}

Vocabulary::Vocabulary() : Vocabulary(std::vector<std::string>{}) {}

Vocabulary::Vocabulary(const std::vector<std::string>& tokens) {
    tokens_.emplace_back(kUnknownToken);
    for (const auto& t : tokens) {
        if (t == kUnknownToken) continue;
        if (index_.contains(t)) throw std::invalid_argument("Vocabulary: duplicate token '" + t + "'");
        index_.emplace(t, static_cast<int>(tokens_.size()));
        tokens_.push_back(t);
    }
}

int Vocabulary::id(std::string_view token) const {
    auto it = index_.find(std::string(token));
    return it == index_.end() ? kUnknown : it->second;
}

std::vector<int> Vocabulary::tokenize(std::string_view caption) const {
    std::string lowered(caption);
    std::transform(lowered.begin(), lowered.end(), lowered.begin(),
                   [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
    std::istringstream in(lowered);
    std::vector<int> ids;
    for (std::string tok; in >> tok;) ids.push_back(id(tok));
    if (ids.empty()) throw std::invalid_argument("tokenize: empty caption");
    return ids;
}

template <typename T>
std::vector<T> embed_tokens(std::span<const int> ids, std::span<const T> table, int dim) {
    if (ids.empty()) throw std::invalid_argument("embed_tokens: no tokens");
    const std::size_t rows = table.size() / static_cast<std::size_t>(dim);
    std::vector<T> out(static_cast<std::size_t>(dim), T(0));
    for (int id : ids) {
        if (id < 0 || static_cast<std::size_t>(id) >= rows) throw std::out_of_range("embed_tokens: token id out of range");
        const T* row = table.data() + static_cast<std::size_t>(id) * dim;
        for (int k = 0; k < dim; ++k) out[k] += row[k];
    }
    const T inv = T(1) / static_cast<T>(ids.size());
    for (auto& v : out) v *= inv;
    return out;
}

template <typename T>
void embed_tokens_backward(std::span<const int> ids, std::span<const T> d_embedding, std::span<T> table_grad,
                           int dim) {
    const T inv = T(1) / static_cast<T>(ids.size());
    for (int id : ids) {
        T* row = table_grad.data() + static_cast<std::size_t>(id) * dim;
        for (int k = 0; k < dim; ++k) row[k] += d_embedding[k] * inv;
    }
}

template std::vector<float> embed_tokens(std::span<const int>, std::span<const float>, int);
template std::vector<double> embed_tokens(std::span<const int>, std::span<const double>, int);
template void embed_tokens_backward(std::span<const int>, std::span<const float>, std::span<float>, int);
template void embed_tokens_backward(std::span<const int>, std::span<const double>, std::span<double>, int);

Tensor assemble_condition(const ConditionBundle& b) {
    require_rgb(b.masked_source, "assemble_condition");
    require_rgb(b.sketch, "assemble_condition");
    require_binary_mask(b.mask, "assemble_condition");
    require_same_shape(b.masked_source.shape(), b.sketch.shape(), "assemble_condition");
    if (b.mask.height() != b.sketch.height() || b.mask.width() != b.sketch.width()) {
        throw std::invalid_argument("assemble_condition: mask " + b.mask.shape().str() + " vs image " +
                                    b.sketch.shape().str());
    }
    const Tensor* parts[] = {&b.masked_source, &b.mask, &b.sketch};
    return concat_channels<float>(parts);
}

ConditionBundle make_condition(const Image& source, const Mask& m, const Sketch& sketch_src,
                               const Sketch& sketch_user, std::vector<int> tokens) {
    return {masked_source(source, m), m, fuse_sketch(sketch_src, sketch_user, m), std::move(tokens)};
}

}  // namespace sketchedit
