#pragma once

#include "json.hpp"
#include "sketchedit/trainer.hpp"

namespace sketchedit::detail {

using Json = nlohmann::ordered_json;

Json to_json(const ModelConfig& m);
Json to_json(const ScheduleConfig& s);
Json to_json(const TrainConfig& c);

/// Strict readers: unknown keys and type mismatches throw std::invalid_argument.
ModelConfig model_from_json(const Json& j);
ScheduleConfig schedule_from_json(const Json& j);
TrainConfig train_from_json(const Json& j);

}  // namespace sketchedit::detail
