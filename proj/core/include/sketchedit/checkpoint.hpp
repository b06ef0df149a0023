#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "sketchedit/conditioning.hpp"
#include "sketchedit/denoiser.hpp"
#include "sketchedit/diffusion.hpp"
#include "sketchedit/params.hpp"
#include "sketchedit/trainer.hpp"

namespace sketchedit {

/// Self-describing model container.
///
/// Layout: 8-byte magic "SKEDCKPT", uint32 LE format version, uint64 LE
/// header length, UTF-8 JSON header, then the raw little-endian float32
/// payload of every tensor in header order. The header holds the model,
/// schedule and codec configuration, the vocabulary, the training config,
/// final step, loss history and a tensor table {name, shape, offset, count}
/// (offsets in floats from the payload start).
struct Checkpoint {
    static constexpr std::uint32_t kFormatVersion = 1;

    ModelConfig model;
    ScheduleConfig schedule;
    std::vector<std::string> vocabulary;  // tokens after the reserved unknown token
    ParamSet params;
    /// Text-alignment proxy head; empty when untrained.
    ParamSet align_params;
    TrainConfig train;
    int final_step = 0;
    std::vector<LossReport> history;

    Vocabulary vocab() const { return Vocabulary(vocabulary); }
    bool align_trained() const { return align_params.size() > 0; }
};

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt);
/// Throws std::runtime_error on a bad magic, unsupported version or truncated payload.
Checkpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// A checkpoint holding freshly initialised parameters (no training).
Checkpoint initial_checkpoint(const ModelConfig& model, const ScheduleConfig& schedule, const Vocabulary& vocab,
                              const TrainConfig& train);

/// Parses a training config document (JSON). Unknown keys and wrong types are
/// rejected with std::invalid_argument; missing keys take their defaults.
TrainConfig parse_train_config(std::string_view json_text);
std::string train_config_to_json(const TrainConfig& cfg);

}  // namespace sketchedit
