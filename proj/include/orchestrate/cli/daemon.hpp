#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <string>

#include "orchestrate/api/client.hpp"
#include "orchestrate/controller/controller.hpp"
#include "orchestrate/provider/provider.hpp"

namespace orchestrate::cli {

struct ServeOptions {
    std::string cluster;
    int port = 0;
    controller::ControllerOptions controller;
};

/// Runs a cluster's controller and API server until SIGTERM or SIGINT.
/// Holds clusters/<name>/controller.lock for its lifetime; a second serve
/// for the same cluster fails with Error(conflict).
void serve(store::StateRoot& root, provider::Provider& provider, const ServeOptions& options, std::ostream& log);

/// The running controller of `cluster`, or nullopt when none holds the
/// controller lock. Waits briefly for a controller that is still starting.
std::optional<api::ApiClient> find_controller(const store::StateRoot& root, const provider::Provider& provider,
                                              const std::string& cluster);

/// find_controller, spawning a detached `<exe> controller serve` when none is
/// running. Its output goes to clusters/<name>/controller.log.
api::ApiClient ensure_controller(const store::StateRoot& root, const provider::Provider& provider,
                                 const std::string& cluster, const std::filesystem::path& exe);

/// Sends SIGTERM to the cluster's controller and waits for it to release its
/// lock. Returns how many runs its shutdown killed (0 when none was running).
std::size_t stop_controller(const store::StateRoot& root, const provider::ClusterState& cluster,
                            std::chrono::seconds timeout = std::chrono::seconds(60));

}  // namespace orchestrate::cli
