#pragma once

#include <functional>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "orchestrate/store/records.hpp"

namespace orchestrate::api {

/// Thin blocking client of ApiServer. Server errors are rethrown as
/// orchestrate::Error with the server's kind; a connection failure is
/// Error(unavailable).
class ApiClient {
public:
    explicit ApiClient(std::string endpoint);

    const std::string& endpoint() const noexcept { return endpoint_; }

    /// True when the endpoint answers /v1/cluster/status.
    bool reachable() const;

    std::string create_experiment(const nlohmann::json& config) const;
    nlohmann::json list_experiments() const;
    nlohmann::json experiment_status(const std::string& id, bool include_history = false) const;
    /// Returns {"killed": n, "status": {...}}.
    nlohmann::json stop_experiment(const std::string& id) const;
    nlohmann::json cluster_status() const;
    /// Returns {"events": [...], "last_seq": n, "first_seq": n}.
    nlohmann::json events(std::uint64_t since, int wait_ms = 0) const;

    /// Streams log records in cursor order; returning false from `sink`
    /// stops early. With follow, returns once the experiment is terminal and
    /// drained.
    void stream_logs(const std::string& id, bool follow, std::uint64_t since_seq,
                     const std::function<bool(const store::LogRecord&)>& sink) const;

private:
    std::string host_;
    int port_ = 0;
    std::string endpoint_;
};

}  // namespace orchestrate::api
