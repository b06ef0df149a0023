#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>

#include "config_json.hpp"
#include "sketchedit/checkpoint.hpp"

namespace sketchedit {
namespace detail {

namespace {

using Reader = std::function<void(const Json&)>;

void read_object(const Json& j, const std::string& where, const std::map<std::string, Reader>& fields) {
    if (!j.is_object()) throw std::invalid_argument(where + ": expected an object");
    for (const auto& [key, value] : j.items()) {
        auto it = fields.find(key);
        if (it == fields.end()) throw std::invalid_argument(where + ": unknown key '" + key + "'");
        try {
            it->second(value);
        } catch (const nlohmann::json::exception&) {
            throw std::invalid_argument(where + "." + key + ": wrong type");
        }
    }
}

template <typename T>
Reader number(T& out, const std::string& name) {
    return [&out, name](const Json& v) {
        if constexpr (std::is_same_v<T, double>) {
            if (!v.is_number()) throw std::invalid_argument(name + ": expected a number");
        } else {
            if (!v.is_number_integer()) throw std::invalid_argument(name + ": expected an integer");
        }
        out = v.get<T>();
    };
}

Reader boolean(bool& out, const std::string& name) {
    return [&out, name](const Json& v) {
        if (!v.is_boolean()) throw std::invalid_argument(name + ": expected a boolean");
        out = v.get<bool>();
    };
}

Json to_json(const MaskConfig& m) {
    return Json{{"control_points", m.control_points}, {"center_min", m.center_min}, {"center_max", m.center_max},
                {"radius_min", m.radius_min},         {"radius_max", m.radius_max}, {"min_area", m.min_area},
                {"max_area", m.max_area},             {"max_retries", m.max_retries}};
}

MaskConfig mask_from_json(const Json& j) {
    MaskConfig m;
    read_object(j, "mask", {{"control_points", number(m.control_points, "mask.control_points")},
                            {"center_min", number(m.center_min, "mask.center_min")},
                            {"center_max", number(m.center_max, "mask.center_max")},
                            {"radius_min", number(m.radius_min, "mask.radius_min")},
                            {"radius_max", number(m.radius_max, "mask.radius_max")},
                            {"min_area", number(m.min_area, "mask.min_area")},
                            {"max_area", number(m.max_area, "mask.max_area")},
                            {"max_retries", number(m.max_retries, "mask.max_retries")}});
    return m;
}

}  // namespace

Json to_json(const ModelConfig& m) {
    return Json{{"image_size", m.image_size}, {"codec_factor", m.codec_factor}, {"channels", m.channels},
                {"res_blocks", m.res_blocks}, {"time_dim", m.time_dim},         {"vocab_size", m.vocab_size},
                {"extra_channels", m.extra_channels}};
}

Json to_json(const ScheduleConfig& s) {
    return Json{{"kind", "linear"}, {"steps", s.steps}, {"beta_start", s.beta_start}, {"beta_end", s.beta_end}};
}

Json to_json(const TrainConfig& c) {
    Json model = to_json(c.model);
    model.erase("vocab_size");
    model.erase("extra_channels");
    return Json{{"lr", c.lr},
                {"adam_beta1", c.adam_beta1},
                {"adam_beta2", c.adam_beta2},
                {"adam_eps", c.adam_eps},
                {"batch_size", c.batch_size},
                {"steps", c.steps},
                {"lambda_pix", c.lambda_pix},
                {"seed", c.seed},
                {"inverse_latent_loss", c.inverse_latent_loss},
                {"extra_channels", c.model.extra_channels},
                {"freeze_base", c.freeze_base},
                {"proxy_steps", c.proxy_steps},
                {"proxy_lr", c.proxy_lr},
                {"schedule", to_json(c.schedule)},
                {"model", model},
                {"mask", to_json(c.mask)}};
}

ModelConfig model_from_json(const Json& j) {
    ModelConfig m;
    read_object(j, "model",
                {{"image_size", number(m.image_size, "model.image_size")},
                 {"codec_factor", number(m.codec_factor, "model.codec_factor")},
                 {"channels",
                  [&m](const Json& v) {
                      if (!v.is_array()) throw std::invalid_argument("model.channels: expected an array");
                      m.channels.clear();
                      for (const auto& c : v) {
                          if (!c.is_number_integer()) throw std::invalid_argument("model.channels: expected integers");
                          m.channels.push_back(c.get<int>());
                      }
                  }},
                 {"res_blocks", number(m.res_blocks, "model.res_blocks")},
                 {"time_dim", number(m.time_dim, "model.time_dim")},
                 {"vocab_size", number(m.vocab_size, "model.vocab_size")},
                 {"extra_channels", boolean(m.extra_channels, "model.extra_channels")}});
    return m;
}

ScheduleConfig schedule_from_json(const Json& j) {
    ScheduleConfig s;
    read_object(j, "schedule", {{"kind",
                                 [](const Json& v) {
                                     if (v != "linear") throw std::invalid_argument("schedule.kind: only \"linear\" is supported");
                                 }},
                                {"steps", number(s.steps, "schedule.steps")},
                                {"beta_start", number(s.beta_start, "schedule.beta_start")},
                                {"beta_end", number(s.beta_end, "schedule.beta_end")}});
    return s;
}

TrainConfig train_from_json(const Json& j) {
    TrainConfig c;
    std::optional<bool> model_extra;
    bool top_extra = c.model.extra_channels;
    read_object(j, "config",
                {{"lr", number(c.lr, "lr")},
                 {"adam_beta1", number(c.adam_beta1, "adam_beta1")},
                 {"adam_beta2", number(c.adam_beta2, "adam_beta2")},
                 {"adam_eps", number(c.adam_eps, "adam_eps")},
                 {"batch_size", number(c.batch_size, "batch_size")},
                 {"steps", number(c.steps, "steps")},
                 {"lambda_pix", number(c.lambda_pix, "lambda_pix")},
                 {"seed",
                  [&c](const Json& v) {
                      if (!v.is_number_unsigned()) throw std::invalid_argument("seed: expected a non-negative integer");
                      c.seed = v.get<std::uint64_t>();
                  }},
                 {"inverse_latent_loss", boolean(c.inverse_latent_loss, "inverse_latent_loss")},
                 {"extra_channels", boolean(top_extra, "extra_channels")},
                 {"freeze_base", boolean(c.freeze_base, "freeze_base")},
                 {"proxy_steps", number(c.proxy_steps, "proxy_steps")},
                 {"proxy_lr", number(c.proxy_lr, "proxy_lr")},
                 {"schedule", [&c](const Json& v) { c.schedule = schedule_from_json(v); }},
                 {"model",
                  [&c, &model_extra](const Json& v) {
                      c.model = model_from_json(v);
                      if (v.contains("extra_channels")) model_extra = c.model.extra_channels;
                  }},
                 {"mask", [&c](const Json& v) { c.mask = mask_from_json(v); }}});

    if (model_extra && j.contains("extra_channels") && *model_extra != top_extra) {
        throw std::invalid_argument("extra_channels and model.extra_channels disagree");
    }
    c.model.extra_channels = model_extra.value_or(top_extra);
    if (!(c.lr > 0.0)) throw std::invalid_argument("lr must be > 0");
    if (c.batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
    if (c.steps < 0) throw std::invalid_argument("steps must be >= 0");
    if (!(c.lambda_pix >= 0.0)) throw std::invalid_argument("lambda_pix must be >= 0");
    if (c.proxy_steps < 0) throw std::invalid_argument("proxy_steps must be >= 0");
    if (!(c.adam_beta1 >= 0.0 && c.adam_beta1 < 1.0 && c.adam_beta2 >= 0.0 && c.adam_beta2 < 1.0)) {
        throw std::invalid_argument("adam betas must lie in [0, 1)");
    }
    c.model.validate();
    make_schedule(c.schedule);
    return c;
}

}  // namespace detail

TrainConfig parse_train_config(std::string_view json_text) {
    detail::Json j;
    try {
        j = detail::Json::parse(json_text);
    } catch (const nlohmann::json::parse_error& e) {
        throw std::invalid_argument(std::string("config: malformed JSON: ") + e.what());
    }
    return detail::train_from_json(j);
}

std::string train_config_to_json(const TrainConfig& cfg) { return detail::to_json(cfg).dump(2); }

}  // namespace sketchedit
