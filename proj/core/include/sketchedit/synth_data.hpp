#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sketchedit/conditioning.hpp"
#include "sketchedit/tensor.hpp"

namespace sketchedit {

struct NamedColor {
    std::string name;
    float r, g, b;  // [0, 1]
};

/// Attribute lists of the procedural garment generator. The caption grammar
/// is "<color> <silhouette> with <pattern>".
struct DatasetSpec {
    int image_size = 32;
    std::vector<NamedColor> colors;
    std::vector<std::string> silhouettes;  // subset of {tee, dress, pants}
    std::vector<std::string> patterns;     // subset of {plain, stripes, dots}

    /// 8 colours x {tee, dress, pants} x {plain, stripes, dots}.
    static DatasetSpec standard();
    /// Vocabulary closed over the caption grammar.
    Vocabulary vocabulary() const;
};

struct TrainingSample {
    Image image;
    Sketch sketch;
    std::string caption;
    std::string id;
};

/// Attributes chosen for one garment; rendering is a pure function of these.
struct GarmentAttributes {
    int color = 0;
    int silhouette = 0;
    int pattern = 0;
    int dx = 0;
    int dy = 0;
};

GarmentAttributes sample_attributes(std::uint64_t seed, const DatasetSpec& spec);

/// Renders the garment on a light background; pixel values lie on the 8-bit grid.
Image render_garment(const GarmentAttributes& a, const DatasetSpec& spec);

std::string caption_for(const GarmentAttributes& a, const DatasetSpec& spec);

/// One deterministic sample per seed; throws std::invalid_argument on empty spec lists.
TrainingSample generate_garment(std::uint64_t seed, const DatasetSpec& spec);

struct TrainingExample {
    ConditionBundle bundle;
    Image target;
    Mask mask;
    std::string id;
};
using TrainingBatch = std::vector<TrainingExample>;

/// Self-supervised pair: free-form mask from `seed`, masked source, the
/// sample's own sketch as the user sketch, the source image as target.
TrainingExample make_training_example(const TrainingSample& s, std::uint64_t seed, const MaskConfig& mask_cfg,
                                      const Vocabulary& vocab);

/// Held-out edit: a mask plus a user sketch taken from the same garment
/// re-rendered with a different pattern, and the matching caption.
struct EditCase {
    std::string id;
    Image source;
    Mask mask;
    Sketch user_sketch;
    std::string prompt;
    Image reference;  // the re-rendered garment, composited outside the mask
};

EditCase make_edit_case(std::uint64_t seed, const DatasetSpec& spec, const MaskConfig& mask_cfg);

/// Writes images/<id>.png, sketches/<id>.png and captions.jsonl under out_dir.
std::vector<TrainingSample> build_dataset(int n, const std::filesystem::path& out_dir, const DatasetSpec& spec,
                                          std::uint64_t seed);

/// Reads a directory written by build_dataset (or laid out the same way).
/// Throws std::runtime_error naming the offending file.
std::vector<TrainingSample> load_dataset(const std::filesystem::path& dir);

/// Seed of sample `index` in a dataset generated from `seed`.
std::uint64_t sample_seed(std::uint64_t seed, int index);

/// Identifier of sample `index`, zero padded.
std::string sample_id(int index);

}  // namespace sketchedit
