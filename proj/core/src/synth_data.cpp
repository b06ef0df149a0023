#include "sketchedit/synth_data.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <fstream>
#include "json.hpp"
#include <set>
#include <stdexcept>

#include "sketchedit/image_io.hpp"
#include "sketchedit/random.hpp"

namespace sketchedit {

namespace {

struct Rect {
    int x0, y0, x1, y1;  // half-open, in 32x32 template coordinates
};

struct Silhouette {
    std::string_view name;
    std::vector<Rect> fill;
    std::vector<Rect> cut;
};

const std::vector<Silhouette>& silhouette_templates() {
    static const std::vector<Silhouette> templates = {
        {"tee", {{10, 8, 22, 28}, {4, 8, 28, 14}}, {{14, 8, 18, 10}}},
        {"dress", {{11, 6, 21, 14}, {9, 14, 23, 21}, {7, 21, 25, 29}}, {}},
        {"pants", {{9, 6, 23, 11}, {9, 11, 15, 29}, {17, 11, 23, 29}}, {}},
    };
    return templates;
}

const Silhouette& find_template(const std::string& name) {
    for (const auto& s : silhouette_templates())
        if (s.name == name) return s;
    throw std::invalid_argument("unknown silhouette '" + name + "'");
}

bool inside(const std::vector<Rect>& rects, double x, double y) {
    return std::any_of(rects.begin(), rects.end(),
                       [&](const Rect& r) { return x >= r.x0 && x < r.x1 && y >= r.y0 && y < r.y1; });
}

void require_spec(const DatasetSpec& spec) {
    if (spec.colors.empty() || spec.silhouettes.empty() || spec.patterns.empty()) {
        throw std::invalid_argument("DatasetSpec: colors, silhouettes and patterns must be non-empty");
    }
    if (spec.image_size <= 0) throw std::invalid_argument("DatasetSpec: image_size must be positive");
}

constexpr float kBackground = 0.92f;

}  // namespace

DatasetSpec DatasetSpec::standard() {
    DatasetSpec s;
    s.colors = {
        {"red", 0.85f, 0.15f, 0.15f},   {"orange", 0.95f, 0.55f, 0.10f}, {"yellow", 0.95f, 0.85f, 0.15f},
        {"green", 0.20f, 0.65f, 0.25f}, {"teal", 0.10f, 0.60f, 0.60f},   {"blue", 0.15f, 0.30f, 0.85f},
        {"purple", 0.55f, 0.20f, 0.70f}, {"black", 0.10f, 0.10f, 0.10f},
    };
    s.silhouettes = {"tee", "dress", "pants"};
    s.patterns = {"plain", "stripes", "dots"};
    return s;
}

Vocabulary DatasetSpec::vocabulary() const {
    std::vector<std::string> tokens;
    for (const auto& c : colors) tokens.push_back(c.name);
    for (const auto& s : silhouettes) tokens.push_back(s);
    tokens.emplace_back("with");
    for (const auto& p : patterns) tokens.push_back(p);
    return Vocabulary(tokens);
}

GarmentAttributes sample_attributes(std::uint64_t seed, const DatasetSpec& spec) {
    require_spec(spec);
    Rng rng(derive_seed({seed, 0x6A12ULL}));
    GarmentAttributes a;
    a.color = rng.uniform_int(0, static_cast<int>(spec.colors.size()) - 1);
    a.silhouette = rng.uniform_int(0, static_cast<int>(spec.silhouettes.size()) - 1);
    a.pattern = rng.uniform_int(0, static_cast<int>(spec.patterns.size()) - 1);
    a.dx = rng.uniform_int(-2, 2);
    a.dy = rng.uniform_int(-2, 2);
    return a;
}

Image render_garment(const GarmentAttributes& a, const DatasetSpec& spec) {
    require_spec(spec);
    const int n = spec.image_size;
    const double scale = 32.0 / n;
    const auto& color = spec.colors.at(a.color);
    const auto& shape = find_template(spec.silhouettes.at(a.silhouette));
    const std::string& pattern = spec.patterns.at(a.pattern);

    const std::array<float, 3> base{color.r, color.g, color.b};
    const float lum = 0.299f * color.r + 0.587f * color.g + 0.114f * color.b;
    std::array<float, 3> accent{};
    for (int c = 0; c < 3; ++c) accent[c] = lum > 0.45f ? base[c] * 0.45f : base[c] * 0.4f + 0.6f;

    Image img(3, n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            // Template coordinates of the pixel centre, shifted by the garment offset.
            const double tx = (j + 0.5) * scale - a.dx;
            const double ty = (i + 0.5) * scale - a.dy;
            std::array<float, 3> rgb{kBackground, kBackground, kBackground};
            if (inside(shape.fill, tx, ty) && !inside(shape.cut, tx, ty)) {
                const int gx = static_cast<int>(tx), gy = static_cast<int>(ty);
                bool marked = false;
                if (pattern == "stripes") marked = (gy / 2) % 2 == 1;
                else if (pattern == "dots") marked = gy % 4 >= 1 && gy % 4 <= 2 && gx % 4 >= 1 && gx % 4 <= 2;
                rgb = marked ? accent : base;
            }
            for (int c = 0; c < 3; ++c) img.at(c, i, j) = rgb[c] * 2.0f - 1.0f;
        }
    }
    return quantize(img);
}

std::string caption_for(const GarmentAttributes& a, const DatasetSpec& spec) {
    return spec.colors.at(a.color).name + " " + spec.silhouettes.at(a.silhouette) + " with " +
           spec.patterns.at(a.pattern);
}

std::uint64_t sample_seed(std::uint64_t seed, int index) {
    return derive_seed({seed, static_cast<std::uint64_t>(index), 0x5A3FULL});
}

std::string sample_id(int index) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%06d", index);
    return buf;
}

TrainingSample generate_garment(std::uint64_t seed, const DatasetSpec& spec) {
    const GarmentAttributes a = sample_attributes(seed, spec);
    TrainingSample s;
    s.image = render_garment(a, spec);
    s.sketch = extract_sketch(s.image);
    s.caption = caption_for(a, spec);
    s.id = std::to_string(seed);
    return s;
}

TrainingExample make_training_example(const TrainingSample& s, std::uint64_t seed, const MaskConfig& mask_cfg,
                                      const Vocabulary& vocab) {
    MaskConfig cfg = mask_cfg;
    cfg.height = s.image.height();
    cfg.width = s.image.width();
    Mask m = bezier_mask(seed, cfg);
    TrainingExample ex;
    ex.bundle = make_condition(s.image, m, s.sketch, s.sketch, vocab.tokenize(s.caption));
    ex.target = s.image;
    ex.mask = std::move(m);
    ex.id = s.id;
    return ex;
}

EditCase make_edit_case(std::uint64_t seed, const DatasetSpec& spec, const MaskConfig& mask_cfg) {
    const GarmentAttributes a = sample_attributes(seed, spec);
    GarmentAttributes edited = a;
    if (spec.patterns.size() > 1) {
        Rng rng(derive_seed({seed, 0xED17ULL}));
        const int shift = rng.uniform_int(1, static_cast<int>(spec.patterns.size()) - 1);
        edited.pattern = (a.pattern + shift) % static_cast<int>(spec.patterns.size());
    }
    MaskConfig cfg = mask_cfg;
    cfg.height = cfg.width = spec.image_size;
    EditCase e;
    e.id = std::to_string(seed);
    e.source = render_garment(a, spec);
    e.mask = bezier_mask(derive_seed({seed, 0x3A5CULL}), cfg);
    const Image target = render_garment(edited, spec);
    e.user_sketch = extract_sketch(target);
    e.prompt = caption_for(edited, spec);
    e.reference = Image(e.source.shape());
    for (int c = 0; c < 3; ++c)
        for (int i = 0; i < spec.image_size; ++i)
            for (int j = 0; j < spec.image_size; ++j)
                e.reference.at(c, i, j) = e.mask.at(0, i, j) == 1.0f ? e.source.at(c, i, j) : target.at(c, i, j);
    return e;
}

std::vector<TrainingSample> build_dataset(int n, const std::filesystem::path& out_dir, const DatasetSpec& spec,
                                          std::uint64_t seed) {
    if (n < 0) throw std::invalid_argument("build_dataset: n must be >= 0");
    std::filesystem::create_directories(out_dir / "images");
    std::filesystem::create_directories(out_dir / "sketches");
    std::ofstream manifest(out_dir / "captions.jsonl", std::ios::trunc);
    if (!manifest) throw std::runtime_error("cannot write " + (out_dir / "captions.jsonl").string());
    std::vector<TrainingSample> samples;
    samples.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        TrainingSample s = generate_garment(sample_seed(seed, i), spec);
        s.id = sample_id(i);
        write_image(out_dir / "images" / (s.id + ".png"), s.image);
        write_image(out_dir / "sketches" / (s.id + ".png"), s.sketch);
        manifest << nlohmann::json{{"id", s.id}, {"caption", s.caption}}.dump() << '\n';
        samples.push_back(std::move(s));
    }
    return samples;
}

std::vector<TrainingSample> load_dataset(const std::filesystem::path& dir) {
    const auto manifest_path = dir / "captions.jsonl";
    std::ifstream manifest(manifest_path);
    if (!manifest) throw std::runtime_error("missing manifest " + manifest_path.string());
    std::vector<TrainingSample> samples;
    std::set<std::string> ids;
    std::string line;
    for (int lineno = 1; std::getline(manifest, line); ++lineno) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw std::runtime_error(manifest_path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
        if (!j.is_object() || !j.contains("id") || !j.contains("caption") || !j["id"].is_string() ||
            !j["caption"].is_string()) {
            throw std::runtime_error(manifest_path.string() + ":" + std::to_string(lineno) +
                                     ": expected {\"id\": string, \"caption\": string}");
        }
        TrainingSample s;
        s.id = j["id"].get<std::string>();
        s.caption = j["caption"].get<std::string>();
        if (!ids.insert(s.id).second) throw std::runtime_error(manifest_path.string() + ": duplicate id " + s.id);
        const auto img_path = dir / "images" / (s.id + ".png");
        const auto sk_path = dir / "sketches" / (s.id + ".png");
        if (!std::filesystem::exists(img_path)) throw std::runtime_error("missing image " + img_path.string());
        if (!std::filesystem::exists(sk_path)) throw std::runtime_error("missing sketch " + sk_path.string());
        s.image = read_image(img_path);
        s.sketch = read_image(sk_path);
        if (s.image.shape() != s.sketch.shape()) {
            throw std::runtime_error(sk_path.string() + ": dims " + s.sketch.shape().str() + " do not match image " +
                                     s.image.shape().str());
        }
        samples.push_back(std::move(s));
    }
    for (const auto& sub : {"images", "sketches"}) {
        if (!std::filesystem::is_directory(dir / sub)) continue;
        for (const auto& entry : std::filesystem::directory_iterator(dir / sub)) {
            if (entry.path().extension() == ".png" && !ids.contains(entry.path().stem().string())) {
                throw std::runtime_error("file without manifest entry: " + entry.path().string());
            }
        }
    }
    return samples;
}

}  // namespace sketchedit
