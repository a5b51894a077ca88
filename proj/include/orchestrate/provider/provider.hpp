#pragma once

#include <functional>
#include <string>
#include <vector>

#include "orchestrate/provider/cluster.hpp"
#include "orchestrate/store/state_root.hpp"

namespace orchestrate::provider {

struct ProviderOptions {
    int cluster_quota = 3;
};

struct DestroyReport {
    std::string cluster_name;
    std::size_t runs_killed = 0;
    std::size_t logs_deleted = 0;
    std::size_t experiments_retained = 0;
};

/// Stops the cluster's controller (killing its runs) and returns how many
/// runs were killed. Supplied by whoever knows how to reach the controller.
using ControllerShutdown = std::function<std::size_t(const ClusterState&)>;

/// Simulated cloud provider. Cluster lifecycle operations are serialized
/// across processes with a lock file under the state root.
class Provider {
public:
    Provider(store::StateRoot& root, Catalog catalog, ProviderOptions options = {});

    const Catalog& catalog() const noexcept { return catalog_; }
    const ProviderOptions& options() const noexcept { return options_; }

    /// Provisions every pool at min_nodes. Throws quota_exceeded when the
    /// account already holds `cluster_quota` clusters, conflict on a
    /// duplicate name.
    ClusterState create_cluster(const ClusterConfig& config);

    ClusterState load_cluster(const std::string& name) const;
    void save_cluster(const ClusterState& cluster) const;
    std::vector<std::string> cluster_names() const;

    /// Shuts the controller down via `shutdown`, purges logs, marks active
    /// experiments deleted and frees the name and quota slot.
    DestroyReport destroy_cluster(const std::string& name, const ControllerShutdown& shutdown = {});

private:
    store::StateRoot& root_;
    Catalog catalog_;
    ProviderOptions options_;
};

}  // namespace orchestrate::provider
