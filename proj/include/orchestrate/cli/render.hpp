#pragma once

#include <string>

#include <nlohmann/json.hpp>

#include "orchestrate/provider/provider.hpp"
#include "orchestrate/store/records.hpp"

namespace orchestrate::cli {

/// Plain-text renderings of command results. Every line is stable so the
/// output can be compared against golden files.

std::string render_cluster_created(const provider::ClusterState& cluster);
std::string render_cluster_destroyed(const provider::DestroyReport& report);
/// `status` is the JSON of GET /v1/cluster/status (or the offline
/// equivalent built by cluster_status_offline).
std::string render_cluster_status(const nlohmann::json& status);
nlohmann::json cluster_status_offline(const provider::ClusterState& cluster);

/// `status` is the JSON of GET /v1/experiments/{id}.
std::string render_experiment_status(const nlohmann::json& status);

/// "<run-short-id> <stream>| <line>"; with color the prefix is wrapped in
/// the run's palette color.
std::string render_log_line(const store::LogRecord& record, bool color);
/// ANSI color code for a run, cycling a fixed palette by creation index.
int run_color(const std::string& run_id);

std::string format_value(double v);
std::string format_assignment(const nlohmann::json& assignment);

}  // namespace orchestrate::cli
