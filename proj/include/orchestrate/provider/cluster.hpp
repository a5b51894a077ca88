#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "orchestrate/clock.hpp"
#include "orchestrate/scheduler/resources.hpp"

namespace orchestrate::provider {

struct InstanceCapacity {
    std::string instance_type;
    int cpus = 0;
    int gpus = 0;

    friend bool operator==(const InstanceCapacity&, const InstanceCapacity&) = default;
};

/// Instance type -> capacity. Immutable once a cluster is created from it.
class Catalog {
public:
    /// The shipped defaults (data/catalog.yml).
    static Catalog builtin();
    /// Builtin entries overridden/extended by `override_file` if it exists.
    static Catalog load(const std::filesystem::path& override_file);
    static Catalog from_json(const nlohmann::json& j);

    /// Throws Error(not_found) listing the known types.
    const InstanceCapacity& lookup(const std::string& instance_type) const;
    bool contains(const std::string& instance_type) const { return types_.contains(instance_type); }
    std::vector<std::string> known_types() const;

    void add(InstanceCapacity capacity) { types_[capacity.instance_type] = std::move(capacity); }

private:
    std::map<std::string, InstanceCapacity> types_;
};

enum class PoolKind { gpu, cpu };
std::string_view to_string(PoolKind k);

struct PoolConfig {
    PoolKind kind = PoolKind::gpu;
    std::string instance_type;
    int min_nodes = 0;
    int max_nodes = 0;
};

/// Parsed cluster configuration file. Keys match the original tool's file
/// format: cloud_provider, cluster_name, gpu: / cpu: blocks.
struct ClusterConfig {
    std::string cloud_provider;
    std::string cluster_name;
    std::vector<PoolConfig> pools;  // gpu first when both present
};

ClusterConfig parse_cluster_config(const nlohmann::json& j, const Catalog& catalog);
ClusterConfig load_cluster_config(const std::filesystem::path& file, const Catalog& catalog);

/// A run's footprint on the node it was placed on.
struct Residency {
    scheduler::ResourceRequest request;
    std::vector<int> gpu_slots;
};

struct Node {
    std::string id;
    PoolKind pool = PoolKind::gpu;
    InstanceCapacity capacity;
    int allocated_cpus = 0;
    int allocated_gpus = 0;
    std::map<std::string, Residency> resident;  // run id -> footprint
    Timestamp idle_since = 0;                   // meaningful while resident is empty

    int free_cpus() const { return capacity.cpus - allocated_cpus; }
    int free_gpus() const { return capacity.gpus - allocated_gpus; }
    bool fits(const scheduler::ResourceRequest& r) const { return r.cpus <= free_cpus() && r.gpus <= free_gpus(); }
};

struct NodePool {
    PoolKind kind = PoolKind::gpu;
    std::string instance_type;
    int min_nodes = 0;
    int max_nodes = 0;
    InstanceCapacity capacity;  // per node
    std::vector<Node> nodes;
    int next_ordinal = 0;
};

/// A named logical cluster. Owned by its controller while one is running.
struct ClusterState {
    std::string name;
    std::string cloud_provider;
    std::vector<NodePool> pools;
    Timestamp created_at = 0;
    std::optional<std::string> controller_endpoint;  // host:port
    std::optional<int> controller_pid;

    NodePool* find_pool(PoolKind kind);
    const NodePool* find_pool(PoolKind kind) const;
    Node* find_node(const std::string& node_id);
    const Node* find_node(const std::string& node_id) const;
    std::vector<const Node*> nodes() const;  // sorted by id

    int node_count() const;
    int total_gpus() const;
    int total_cpus() const;

    /// Places a run; returns the GPU slot indices it was given. Throws
    /// Error(internal) if it does not fit (the planner never asks for that).
    std::vector<int> allocate(const std::string& node_id, const std::string& run_id,
                              const scheduler::ResourceRequest& request);
    /// Releases a run's footprint; no-op if the run is not resident.
    void release(const std::string& node_id, const std::string& run_id, Timestamp now = now_us());

    /// Empty string when pool bounds, capacity and allocation bookkeeping all
    /// hold; otherwise a description of the first violation.
    std::string check_invariants() const;
};

/// Adds a pool's min_nodes nodes with zero allocation.
Node make_node(NodePool& pool, const InstanceCapacity& capacity, Timestamp now);

/// Resizes a pool to clamp(desired, min, max). Removes only idle nodes,
/// highest id first; if shrinking would evict a resident run, throws
/// Error(conflict) naming the blocking node.
ClusterState scale_pool(ClusterState cluster, PoolKind kind, int desired, const Catalog& catalog,
                        Timestamp now = now_us());

nlohmann::json to_json(const ClusterState& c);
ClusterState cluster_from_json(const nlohmann::json& j);

}  // namespace orchestrate::provider
