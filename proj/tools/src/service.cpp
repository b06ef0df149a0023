#include "sketchedit_app/service.hpp"

#include <chrono>
#include <stdexcept>

#include "json.hpp"
#include "sketchedit/image_io.hpp"
#include "sketchedit/metrics.hpp"
// After Eigen: resolv.h, pulled in by httplib, defines a `_res` macro.
#include "httplib.h"

namespace sketchedit::app {

using Json = nlohmann::ordered_json;

namespace {

struct FieldError : std::runtime_error {
    FieldError(int status, std::string field, const std::string& msg)
        : std::runtime_error(msg), status(status), field(std::move(field)) {}
    int status;
    std::string field;
};

HttpReply json_reply(int status, const Json& j) { return {status, j.dump()}; }

HttpReply error_reply(int status, const std::string& message, const std::string& field = {}) {
    Json j{{"error", message}};
    if (!field.empty()) j["field"] = field;
    return json_reply(status, j);
}

Json parse_body(const std::string& body) {
    Json j = Json::parse(body, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw FieldError(400, "", "request body must be a JSON object");
    return j;
}

const Json& field(const Json& j, const std::string& name) {
    if (!j.contains(name)) throw FieldError(400, name, "missing field '" + name + "'");
    return j[name];
}

std::vector<std::uint8_t> png_field(const Json& j, const std::string& name) {
    const Json& v = field(j, name);
    if (!v.is_string()) throw FieldError(400, name, name + ": expected a base64-encoded PNG string");
    try {
        return base64_decode(v.get<std::string>());
    } catch (const std::invalid_argument& e) {
        throw FieldError(400, name, name + ": " + e.what());
    }
}

template <typename Decode>
auto decode_field(const Json& j, const std::string& name, Decode decode) {
    const auto bytes = png_field(j, name);
    try {
        return decode(bytes);
    } catch (const std::exception& e) {
        throw FieldError(400, name, name + ": " + e.what());
    }
}

Image decode_rgb(std::span<const std::uint8_t> b) { return decode_png(b); }
Mask decode_mask(std::span<const std::uint8_t> b) { return decode_mask_png(b); }

void require_dims(const Tensor& t, const Shape& image, const std::string& name) {
    if (t.height() != image.height || t.width() != image.width) {
        throw FieldError(400, name,
                         name + ": " + std::to_string(t.width()) + "x" + std::to_string(t.height()) +
                             " does not match image " + std::to_string(image.width) + "x" + std::to_string(image.height));
    }
}

}  // namespace

HttpReply EditService::health() const { return json_reply(200, Json{{"status", "ok"}, {"model_loaded", model_ != nullptr}}); }

HttpReply EditService::model_info() const {
    if (!model_) return error_reply(503, "model not loaded");
    const Checkpoint& c = model_->checkpoint();
    Json model{{"image_size", c.model.image_size},   {"codec_factor", c.model.codec_factor},
               {"latent_channels", c.model.latent_channels()}, {"latent_size", c.model.latent_size()},
               {"channels", c.model.channels},       {"res_blocks", c.model.res_blocks},
               {"time_dim", c.model.time_dim},       {"extra_channels", c.model.extra_channels}};
    return json_reply(200, Json{{"format_version", Checkpoint::kFormatVersion},
                                {"model", model},
                                {"schedule", {{"steps", c.schedule.steps},
                                              {"beta_start", c.schedule.beta_start},
                                              {"beta_end", c.schedule.beta_end}}},
                                {"vocabulary", c.vocab().tokens()},
                                {"final_step", c.final_step},
                                {"text_align_trained", c.align_trained()},
                                {"parameter_count", c.params.count()}});
}

HttpReply EditService::edit(const std::string& body) const {
    if (!model_) return error_reply(503, "model not loaded");
    const auto start = std::chrono::steady_clock::now();
    try {
        const Json j = parse_body(body);
        EditRequest req;
        req.source = decode_field(j, "image", decode_rgb);
        const int size = model_->checkpoint().model.image_size;
        if (req.source.height() != size || req.source.width() != size) {
            throw FieldError(400, "image", "image: model expects " + std::to_string(size) + "x" + std::to_string(size) +
                                               ", got " + std::to_string(req.source.width()) + "x" +
                                               std::to_string(req.source.height()));
        }
        req.mask = decode_field(j, "mask", decode_mask);
        require_dims(req.mask, req.source.shape(), "mask");
        if (j.contains("sketch") && !j["sketch"].is_null()) {
            req.user_sketch = decode_field(j, "sketch", decode_rgb);
            require_dims(req.user_sketch, req.source.shape(), "sketch");
        } else {
            req.user_sketch = extract_sketch(req.source);
        }
        const Json& prompt = field(j, "prompt");
        if (!prompt.is_string() || prompt.get<std::string>().find_first_not_of(" \t\r\n") == std::string::npos) {
            throw FieldError(400, "prompt", "prompt: expected a non-empty string");
        }
        req.prompt = prompt.get<std::string>();
        if (j.contains("seed")) {
            if (!j["seed"].is_number_unsigned()) throw FieldError(400, "seed", "seed: expected a non-negative integer");
            req.seed = j["seed"].get<std::uint64_t>();
        }
        if (j.contains("steps") && !j["steps"].is_null()) {
            if (!j["steps"].is_number_integer()) throw FieldError(400, "steps", "steps: expected an integer");
            const auto steps = j["steps"].get<std::int64_t>();
            if (steps < 1) throw FieldError(400, "steps", "steps: must be >= 1");
            if (steps > model_->schedule().T) {
                throw FieldError(422, "steps", "steps: " + std::to_string(steps) + " exceeds T = " +
                                                   std::to_string(model_->schedule().T));
            }
            req.steps = static_cast<int>(steps);
        }
        if (j.contains("latent_mask_sampling")) {
            if (!j["latent_mask_sampling"].is_boolean()) {
                throw FieldError(400, "latent_mask_sampling", "latent_mask_sampling: expected a boolean");
            }
            req.latent_mask_sampling = j["latent_mask_sampling"].get<bool>();
        }

        const Image result = quantize(blended_sample(req, *model_));
        Json reply{{"image", base64_encode(encode_png(result))}};
        if (editable_fraction(req.mask) < 1.0) {
            reply["pre_error"] = pre_error(result, req.source, req.mask);
        } else {
            reply["pre_error"] = nullptr;
        }
        reply["duration_ms"] =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
        return json_reply(200, reply);
    } catch (const FieldError& e) {
        return error_reply(e.status, e.what(), e.field);
    } catch (const std::invalid_argument& e) {
        return error_reply(400, e.what());
    } catch (const std::exception& e) {
        return error_reply(500, e.what());
    }
}

HttpReply EditService::sketch(const std::string& body) const {
    try {
        const Json j = parse_body(body);
        const Image source = decode_field(j, "image", decode_rgb);
        return json_reply(200, Json{{"sketch", base64_encode(encode_png(extract_sketch(source)))}});
    } catch (const FieldError& e) {
        return error_reply(e.status, e.what(), e.field);
    } catch (const std::exception& e) {
        return error_reply(500, e.what());
    }
}

struct ApiServer::Impl {
    httplib::Server server;
};

ApiServer::ApiServer(const EditService& service) : impl_(std::make_unique<Impl>()) {
    httplib::Server& server = impl_->server;
    auto send = [](httplib::Response& res, const HttpReply& r) {
        res.status = r.status;
        res.set_content(r.body, "application/json");
    };
    server.Get("/api/health", [&service, send](const httplib::Request&, httplib::Response& res) {
        send(res, service.health());
    });
    server.Get("/api/model-info", [&service, send](const httplib::Request&, httplib::Response& res) {
        send(res, service.model_info());
    });
    server.Post("/api/edit", [&service, send](const httplib::Request& req, httplib::Response& res) {
        send(res, service.edit(req.body));
    });
    server.Post("/api/sketch", [&service, send](const httplib::Request& req, httplib::Response& res) {
        send(res, service.sketch(req.body));
    });
    server.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
    server.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) {
        res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
        res.set_header("Access-Control-Allow-Headers", "Content-Type");
        res.status = 204;
    });
}

ApiServer::~ApiServer() = default;

int ApiServer::bind(const std::string& host, int port) {
    const int bound = port == 0 ? impl_->server.bind_to_any_port(host) : (impl_->server.bind_to_port(host, port) ? port : -1);
    if (bound < 0) throw std::runtime_error("cannot listen on " + host + ":" + std::to_string(port));
    return bound;
}

void ApiServer::run() { impl_->server.listen_after_bind(); }

void ApiServer::stop() { impl_->server.stop(); }

void serve(const EditService& service, const std::string& host, int port) {
    ApiServer server(service);
    server.bind(host, port);
    server.run();
}

}  // namespace sketchedit::app
