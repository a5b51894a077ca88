#include "orchestrate/provider/provider.hpp"

#include <fstream>
#include <sstream>

#include "orchestrate/error.hpp"
#include "orchestrate/file_lock.hpp"

namespace orchestrate::provider {

namespace fs = std::filesystem;

Provider::Provider(store::StateRoot& root, Catalog catalog, ProviderOptions options)
    : root_(root), catalog_(std::move(catalog)), options_(options) {}

ClusterState Provider::create_cluster(const ClusterConfig& config) {
    FileLock lock(root_.clusters_dir() / ".lifecycle.lock");
    if (root_.has_cluster(config.cluster_name)) {
        throw Error(ErrorKind::conflict, "cluster '" + config.cluster_name + "' already exists", "cluster_name");
    }
    const auto existing = root_.cluster_names();
    if (static_cast<int>(existing.size()) >= options_.cluster_quota) {
        std::string names;
        for (const auto& n : existing) names += (names.empty() ? "" : ", ") + n;
        throw Error(ErrorKind::quota_exceeded, "cluster quota reached: the account is limited to " +
                                                   std::to_string(options_.cluster_quota) +
                                                   " clusters (existing: " + names + ")");
    }
    const Timestamp now = now_us();
    ClusterState cluster;
    cluster.name = config.cluster_name;
    cluster.cloud_provider = config.cloud_provider;
    cluster.created_at = now;
    for (const auto& pc : config.pools) {
        NodePool pool;
        pool.kind = pc.kind;
        pool.instance_type = pc.instance_type;
        pool.min_nodes = pc.min_nodes;
        pool.max_nodes = pc.max_nodes;
        const InstanceCapacity& cap = catalog_.lookup(pc.instance_type);
        pool.capacity = cap;
        for (int i = 0; i < pc.min_nodes; ++i) pool.nodes.push_back(make_node(pool, cap, now));
        cluster.pools.push_back(std::move(pool));
    }
    fs::create_directories(root_.cluster_dir(cluster.name));
    save_cluster(cluster);
    return cluster;
}

ClusterState Provider::load_cluster(const std::string& name) const {
    const fs::path file = root_.cluster_dir(name) / "cluster.json";
    std::ifstream in(file);
    if (!in) throw Error(ErrorKind::not_found, "cluster not found: no such cluster '" + name + "'");
    try {
        return cluster_from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::internal, "corrupt cluster file " + file.string() + ": " + e.what());
    }
}

void Provider::save_cluster(const ClusterState& cluster) const {
    store::StateRoot::write_atomically(root_.cluster_dir(cluster.name) / "cluster.json", to_json(cluster).dump(2) + "\n");
}

std::vector<std::string> Provider::cluster_names() const { return root_.cluster_names(); }

DestroyReport Provider::destroy_cluster(const std::string& name, const ControllerShutdown& shutdown) {
    FileLock lock(root_.clusters_dir() / ".lifecycle.lock");
    const ClusterState cluster = load_cluster(name);
    DestroyReport report;
    report.cluster_name = name;
    if (shutdown) report.runs_killed = shutdown(cluster);
    const store::PurgeReport purge = root_.purge_cluster_artifacts(name);
    report.logs_deleted = purge.logs_deleted;
    report.experiments_retained = purge.experiments_retained;
    std::error_code ec;
    fs::remove_all(root_.cluster_dir(name), ec);
    if (ec) throw Error(ErrorKind::internal, "cannot remove cluster directory: " + ec.message());
    return report;
}

}  // namespace orchestrate::provider
