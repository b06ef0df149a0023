#pragma once

#include <memory>
#include <string>

#include "sketchedit/sampler.hpp"

namespace sketchedit::app {

struct HttpReply {
    int status = 200;
    std::string body;  // JSON
};

/// Request handlers of the edit service, independent of the HTTP transport.
/// The model snapshot is immutable; handlers may run concurrently.
class EditService {
public:
    explicit EditService(std::shared_ptr<const EditModel> model) : model_(std::move(model)) {}

    HttpReply health() const;
    HttpReply model_info() const;
    /// POST /api/edit: {image, mask, sketch: base64 PNG, prompt, seed, steps}.
    HttpReply edit(const std::string& body) const;
    /// POST /api/sketch: {image} -> {sketch}, the extracted source sketch.
    HttpReply sketch(const std::string& body) const;

private:
    std::shared_ptr<const EditModel> model_;
};

/// HTTP transport for an EditService.
class ApiServer {
public:
    explicit ApiServer(const EditService& service);
    ~ApiServer();
    ApiServer(const ApiServer&) = delete;
    ApiServer& operator=(const ApiServer&) = delete;

    /// Binds host:port (port 0 picks a free port) and returns the bound port.
    int bind(const std::string& host, int port);
    /// Blocks handling requests until stop() is called.
    void run();
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// Blocks serving the API on host:port until the process is stopped.
void serve(const EditService& service, const std::string& host, int port);

}  // namespace sketchedit::app
