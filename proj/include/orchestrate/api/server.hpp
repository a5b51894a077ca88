#pragma once

#include <memory>
#include <string>
#include <thread>

#include "orchestrate/controller/controller.hpp"
#include "orchestrate/error.hpp"

namespace httplib {
class Server;
}

namespace orchestrate::api {

/// The controller's HTTP API on loopback:
///
///   POST /v1/experiments                      body: experiment config (JSON)
///   GET  /v1/experiments
///   GET  /v1/experiments/{id}?history=1
///   POST /v1/experiments/{id}/stop
///   GET  /v1/experiments/{id}/logs?follow=1&since_seq=N   NDJSON stream
///   GET  /v1/cluster/status
///   GET  /v1/events?since=N&wait_ms=M
///
/// Errors are {"error": {"kind", "message", "field"}} with a status code
/// derived from the kind.
class ApiServer {
public:
    ApiServer(controller::Controller& controller, store::StateRoot& store);
    ~ApiServer();
    ApiServer(const ApiServer&) = delete;
    ApiServer& operator=(const ApiServer&) = delete;

    /// Binds 127.0.0.1:port, falling back to an ephemeral port when it is
    /// taken (port 0 always picks an ephemeral one). Starts serving on a
    /// background thread and returns "host:port".
    std::string start(int port = 0);
    void stop();

    const std::string& endpoint() const noexcept { return endpoint_; }

private:
    void routes();

    controller::Controller& controller_;
    store::StateRoot& store_;
    std::unique_ptr<httplib::Server> server_;
    std::thread thread_;
    std::string endpoint_;
};

int http_status(ErrorKind kind);

}  // namespace orchestrate::api
