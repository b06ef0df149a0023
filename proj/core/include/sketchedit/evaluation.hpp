#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "sketchedit/metrics.hpp"
#include "sketchedit/sampler.hpp"
#include "sketchedit/synth_data.hpp"

namespace sketchedit {

/// One (source, edit, mask) triplet of an evaluation manifest directory:
/// sources/<id>.png, masks/<id>.png, edits/<id>.png, optional sketches/<id>.png
/// and references/<id>.png, and captions.jsonl lines {"id", "caption"}.
struct ManifestEntry {
    std::string id;
    std::string caption;
    Image source;
    Mask mask;
    std::optional<Image> edit;
    std::optional<Sketch> sketch;
    std::optional<Image> reference;
};

/// Throws std::runtime_error naming the offending file on missing, orphaned or mismatched entries.
std::vector<ManifestEntry> load_manifest(const std::filesystem::path& dir);

/// Writes `count` held-out edit cases (sources, masks, user sketches, references, captions).
std::vector<EditCase> write_edit_set(const std::filesystem::path& dir, int count, const DatasetSpec& spec,
                                     const MaskConfig& mask_cfg, std::uint64_t seed);

/// Seed of the i-th held-out edit case; disjoint from training sample seeds.
std::uint64_t edit_case_seed(std::uint64_t seed, int index);

/// Runs blended_sample for every entry lacking an edit (seed = base_seed + index) and stores it under edits/.
void fill_edits(const std::filesystem::path& dir, std::vector<ManifestEntry>& entries, const EditModel& model,
                std::uint64_t base_seed, bool latent_mask_sampling = true);

/// FID of edits against sources, mean perceptual distance, mean Pre_error and
/// mean text alignment. Needs at least d + 1 entries, all with edits, and a
/// trained alignment head in the model.
MetricReport evaluate_entries(const std::vector<ManifestEntry>& entries, const EditModel& model);

std::string report_to_json(const MetricReport& r);

}  // namespace sketchedit
