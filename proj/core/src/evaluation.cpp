#include "sketchedit/evaluation.hpp"

#include <fstream>
#include <map>
#include <set>
#include <stdexcept>

#include "json.hpp"
#include "sketchedit/image_io.hpp"
#include "sketchedit/random.hpp"

namespace sketchedit {

namespace fs = std::filesystem;

namespace {

std::map<std::string, std::string> read_captions(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("missing manifest " + path.string());
    std::map<std::string, std::string> out;
    std::string line;
    for (int lineno = 1; std::getline(in, line); ++lineno) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto j = nlohmann::json::parse(line, nullptr, false);
        if (!j.is_object() || !j.contains("id") || !j.contains("caption") || !j["id"].is_string() ||
            !j["caption"].is_string()) {
            throw std::runtime_error(path.string() + ":" + std::to_string(lineno) +
                                     ": expected {\"id\": string, \"caption\": string}");
        }
        if (!out.emplace(j["id"].get<std::string>(), j["caption"].get<std::string>()).second) {
            throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": duplicate id");
        }
    }
    return out;
}

std::set<std::string> png_stems(const fs::path& dir) {
    std::set<std::string> out;
    if (!fs::is_directory(dir)) return out;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.path().extension() == ".png") out.insert(e.path().stem().string());
    }
    return out;
}

template <typename Read>
auto optional_file(const fs::path& dir, const std::string& id, const std::set<std::string>& present, Read read)
    -> std::optional<decltype(read(fs::path{}))> {
    if (!present.contains(id)) return std::nullopt;
    return read(dir / (id + ".png"));
}

}  // namespace

std::vector<ManifestEntry> load_manifest(const fs::path& dir) {
    const auto captions = read_captions(dir / "captions.jsonl");
    const auto sources = png_stems(dir / "sources");
    const std::map<std::string, std::set<std::string>> others = {{"masks", png_stems(dir / "masks")},
                                                                 {"edits", png_stems(dir / "edits")},
                                                                 {"sketches", png_stems(dir / "sketches")},
                                                                 {"references", png_stems(dir / "references")}};
    for (const auto& [sub, stems] : others) {
        for (const auto& id : stems) {
            if (!sources.contains(id)) throw std::runtime_error("no source for " + (dir / sub / (id + ".png")).string());
        }
    }
    std::vector<ManifestEntry> out;
    for (const auto& id : sources) {
        ManifestEntry e;
        e.id = id;
        auto cap = captions.find(id);
        if (cap == captions.end()) throw std::runtime_error("no caption for " + (dir / "sources" / (id + ".png")).string());
        e.caption = cap->second;
        e.source = read_image(dir / "sources" / (id + ".png"));
        if (!others.at("masks").contains(id)) throw std::runtime_error("missing mask " + (dir / "masks" / (id + ".png")).string());
        e.mask = read_mask(dir / "masks" / (id + ".png"));
        e.edit = optional_file(dir / "edits", id, others.at("edits"), read_image);
        e.sketch = optional_file(dir / "sketches", id, others.at("sketches"), read_image);
        e.reference = optional_file(dir / "references", id, others.at("references"), read_image);
        const Shape& s = e.source.shape();
        auto check = [&](const Tensor& t, const std::string& sub, int channels) {
            if (t.channels() != channels || t.height() != s.height || t.width() != s.width) {
                throw std::runtime_error((dir / sub / (id + ".png")).string() + ": dims " + t.shape().str() +
                                         " do not match source " + s.str());
            }
        };
        check(e.mask, "masks", 1);
        if (e.edit) check(*e.edit, "edits", 3);
        if (e.sketch) check(*e.sketch, "sketches", 3);
        if (e.reference) check(*e.reference, "references", 3);
        out.push_back(std::move(e));
    }
    for (const auto& [id, caption] : captions) {
        if (!sources.contains(id)) throw std::runtime_error("captions.jsonl: id " + id + " has no source image");
    }
    return out;
}

std::uint64_t edit_case_seed(std::uint64_t seed, int index) {
    return derive_seed({seed, static_cast<std::uint64_t>(index), 0xE517ULL});
}

std::vector<EditCase> write_edit_set(const fs::path& dir, int count, const DatasetSpec& spec, const MaskConfig& mask_cfg,
                                     std::uint64_t seed) {
    if (count < 0) throw std::invalid_argument("write_edit_set: count must be >= 0");
    for (const auto* sub : {"sources", "masks", "sketches", "references"}) fs::create_directories(dir / sub);
    std::ofstream manifest(dir / "captions.jsonl", std::ios::trunc);
    if (!manifest) throw std::runtime_error("cannot write " + (dir / "captions.jsonl").string());
    std::vector<EditCase> cases;
    for (int i = 0; i < count; ++i) {
        EditCase c = make_edit_case(edit_case_seed(seed, i), spec, mask_cfg);
        c.id = sample_id(i);
        write_image(dir / "sources" / (c.id + ".png"), c.source);
        write_mask(dir / "masks" / (c.id + ".png"), c.mask);
        write_image(dir / "sketches" / (c.id + ".png"), c.user_sketch);
        write_image(dir / "references" / (c.id + ".png"), c.reference);
        manifest << nlohmann::json{{"id", c.id}, {"caption", c.prompt}}.dump() << '\n';
        cases.push_back(std::move(c));
    }
    return cases;
}

void fill_edits(const fs::path& dir, std::vector<ManifestEntry>& entries, const EditModel& model,
                std::uint64_t base_seed, bool latent_mask_sampling) {
    fs::create_directories(dir / "edits");
    for (std::size_t i = 0; i < entries.size(); ++i) {
        ManifestEntry& e = entries[i];
        if (e.edit) continue;
        if (!e.sketch) throw std::runtime_error("no sketch to edit with: " + (dir / "sketches" / (e.id + ".png")).string());
        EditRequest req{e.source, e.mask, *e.sketch, e.caption, std::nullopt, base_seed + i, latent_mask_sampling};
        e.edit = quantize(blended_sample(req, model));
        write_image(dir / "edits" / (e.id + ".png"), *e.edit);
    }
}

MetricReport evaluate_entries(const std::vector<ManifestEntry>& entries, const EditModel& model) {
    if (entries.empty()) throw std::invalid_argument("evaluate: no entries");
    if (!model.checkpoint().align_trained()) throw std::logic_error("evaluate: checkpoint has no trained text-alignment head");
    std::vector<Image> sources, edits;
    MetricReport r;
    for (const auto& e : entries) {
        if (!e.edit) throw std::invalid_argument("evaluate: entry " + e.id + " has no edit");
        sources.push_back(e.source);
        edits.push_back(*e.edit);
        const double pe = pre_error(*e.edit, e.source, e.mask);
        r.per_image_pre_error.emplace_back(e.id, pe);
        r.pre_error += pe;
        r.lpips_like += perceptual_distance(*e.edit, e.source);
        const auto text = model.embed_prompt(e.caption);
        r.text_align += sketchedit::text_align(model.checkpoint().align_params, *e.edit,
                                               std::vector<double>(text.begin(), text.end()));
    }
    const double n = static_cast<double>(entries.size());
    r.n_images = static_cast<int>(entries.size());
    r.pre_error /= n;
    r.lpips_like /= n;
    r.text_align /= n;
    r.fid = fid(extract_features(edits), extract_features(sources));
    return r;
}

std::string report_to_json(const MetricReport& r) {
    nlohmann::ordered_json j;
    j["fid"] = r.fid;
    j["lpips_like"] = r.lpips_like;
    j["pre_error"] = r.pre_error;
    j["text_align"] = r.text_align;
    j["text_align_proxy"] = r.proxy;
    j["n_images"] = r.n_images;
    nlohmann::ordered_json per = nlohmann::ordered_json::object();
    for (const auto& [id, v] : r.per_image_pre_error) per[id] = v;
    j["per_image_pre_error"] = std::move(per);
    return j.dump(2);
}

}  // namespace sketchedit
