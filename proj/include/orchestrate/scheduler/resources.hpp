#pragma once

#include <nlohmann/json.hpp>

namespace orchestrate::scheduler {

/// Largest single node in the catalog has 8 GPUs; a run never spans nodes.
inline constexpr int kMaxGpusPerRun = 8;

/// Per-run resource request. GPUs are accounting tokens.
struct ResourceRequest {
    int gpus = 0;
    int cpus = 1;

    friend bool operator==(const ResourceRequest&, const ResourceRequest&) = default;
};

/// Parses a `resources` block; throws Error(invalid_argument) with field
/// paths for negative GPUs, non-positive CPUs and GPUs above kMaxGpusPerRun
/// ("exceeds largest supported node").
ResourceRequest parse_resources(const nlohmann::json& j, const std::string& path = "resources");
nlohmann::json to_json(const ResourceRequest& r);

}  // namespace orchestrate::scheduler
