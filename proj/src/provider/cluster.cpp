#include "orchestrate/provider/cluster.hpp"

#include <algorithm>
#include <cstdio>
#include <regex>
#include <set>

#include "orchestrate/error.hpp"
#include "orchestrate/json_fields.hpp"
#include "orchestrate/yaml_json.hpp"

namespace orchestrate::provider {

namespace jf = json_fields;
using nlohmann::json;

std::string_view to_string(PoolKind k) { return k == PoolKind::gpu ? "gpu" : "cpu"; }

// --- catalog ---------------------------------------------------------------

Catalog Catalog::builtin() {
    Catalog c;
    c.add({"c4.xlarge", 4, 0});
    c.add({"p3.2xlarge", 8, 1});
    c.add({"p3.8xlarge", 32, 4});
    c.add({"p3.16xlarge", 64, 8});
    return c;
}

Catalog Catalog::from_json(const json& j) {
    Catalog c;
    const json& types = jf::require(j, "instance_types", "");
    if (!types.is_object()) jf::fail("instance_types", "expected a mapping");
    for (const auto& [name, spec] : types.items()) {
        const std::string path = "instance_types." + name;
        InstanceCapacity cap;
        cap.instance_type = name;
        cap.cpus = static_cast<int>(jf::as_integer(jf::require(spec, "cpus", path), path + ".cpus"));
        cap.gpus = static_cast<int>(jf::as_integer(jf::require(spec, "gpus", path), path + ".gpus"));
        if (cap.cpus < 1) jf::fail(path + ".cpus", "must be positive");
        if (cap.gpus < 0) jf::fail(path + ".gpus", "must be non-negative");
        c.add(std::move(cap));
    }
    return c;
}

Catalog Catalog::load(const std::filesystem::path& override_file) {
    Catalog c = builtin();
    if (!override_file.empty() && std::filesystem::exists(override_file)) {
        for (auto& [name, cap] : from_json(load_yaml_file(override_file)).types_) c.add(cap);
    }
    return c;
}

const InstanceCapacity& Catalog::lookup(const std::string& instance_type) const {
    auto it = types_.find(instance_type);
    if (it == types_.end()) {
        std::string known;
        for (const auto& name : known_types()) known += (known.empty() ? "" : ", ") + name;
        throw Error(ErrorKind::not_found, "unknown instance type '" + instance_type + "' (known: " + known + ")");
    }
    return it->second;
}

std::vector<std::string> Catalog::known_types() const {
    std::vector<std::string> out;
    for (const auto& [name, cap] : types_) out.push_back(name);
    return out;
}

// --- config ----------------------------------------------------------------

ClusterConfig parse_cluster_config(const json& j, const Catalog& catalog) {
    if (!j.is_object()) jf::fail("", "cluster configuration must be a mapping");
    ClusterConfig cfg;
    cfg.cloud_provider = jf::as_string(jf::require(j, "cloud_provider", ""), "cloud_provider");
    if (cfg.cloud_provider != "aws" && cfg.cloud_provider != "aws-sim") {
        jf::fail("cloud_provider", "unsupported provider '" + cfg.cloud_provider + "' (only aws is available, simulated)");
    }
    cfg.cluster_name = jf::as_string(jf::require(j, "cluster_name", ""), "cluster_name");
    static const std::regex kName("[A-Za-z0-9][A-Za-z0-9._-]{0,62}");
    if (!std::regex_match(cfg.cluster_name, kName)) {
        jf::fail("cluster_name", "must be 1-63 characters of letters, digits, '.', '_' or '-'");
    }
    for (PoolKind kind : {PoolKind::gpu, PoolKind::cpu}) {
        const std::string key(to_string(kind));
        const json* block = jf::optional(j, key);
        if (!block) continue;
        PoolConfig pool;
        pool.kind = kind;
        pool.instance_type = jf::as_string(jf::require(*block, "instance_type", key), key + ".instance_type");
        pool.min_nodes = static_cast<int>(jf::as_integer(jf::require(*block, "min_nodes", key), key + ".min_nodes"));
        pool.max_nodes = static_cast<int>(jf::as_integer(jf::require(*block, "max_nodes", key), key + ".max_nodes"));
        if (!catalog.contains(pool.instance_type)) {
            try {
                catalog.lookup(pool.instance_type);
            } catch (const Error& e) {
                jf::fail(key + ".instance_type", e.bare_message());
            }
        }
        const InstanceCapacity& cap = catalog.lookup(pool.instance_type);
        if (kind == PoolKind::gpu && cap.gpus == 0) {
            jf::fail(key + ".instance_type", "'" + pool.instance_type + "' has no GPUs; use it in the cpu pool");
        }
        if (kind == PoolKind::cpu && cap.gpus > 0) {
            jf::fail(key + ".instance_type", "'" + pool.instance_type + "' has GPUs; use it in the gpu pool");
        }
        if (pool.min_nodes < 0) jf::fail(key + ".min_nodes", "must be non-negative");
        if (pool.max_nodes < pool.min_nodes) jf::fail(key + ".max_nodes", "must be >= min_nodes");
        cfg.pools.push_back(std::move(pool));
    }
    if (cfg.pools.empty()) jf::fail("", "at least one of the gpu or cpu pools is required");
    return cfg;
}

ClusterConfig load_cluster_config(const std::filesystem::path& file, const Catalog& catalog) {
    return parse_cluster_config(load_yaml_file(file), catalog);
}

// --- state -----------------------------------------------------------------

NodePool* ClusterState::find_pool(PoolKind kind) {
    for (auto& p : pools) {
        if (p.kind == kind) return &p;
    }
    return nullptr;
}

const NodePool* ClusterState::find_pool(PoolKind kind) const {
    return const_cast<ClusterState*>(this)->find_pool(kind);
}

Node* ClusterState::find_node(const std::string& node_id) {
    for (auto& p : pools) {
        for (auto& n : p.nodes) {
            if (n.id == node_id) return &n;
        }
    }
    return nullptr;
}

const Node* ClusterState::find_node(const std::string& node_id) const {
    return const_cast<ClusterState*>(this)->find_node(node_id);
}

std::vector<const Node*> ClusterState::nodes() const {
    std::vector<const Node*> out;
    for (const auto& p : pools) {
        for (const auto& n : p.nodes) out.push_back(&n);
    }
    std::sort(out.begin(), out.end(), [](const Node* a, const Node* b) { return a->id < b->id; });
    return out;
}

int ClusterState::node_count() const {
    int n = 0;
    for (const auto& p : pools) n += static_cast<int>(p.nodes.size());
    return n;
}

int ClusterState::total_gpus() const {
    int n = 0;
    for (const auto& p : pools) {
        for (const auto& node : p.nodes) n += node.capacity.gpus;
    }
    return n;
}

int ClusterState::total_cpus() const {
    int n = 0;
    for (const auto& p : pools) {
        for (const auto& node : p.nodes) n += node.capacity.cpus;
    }
    return n;
}

std::vector<int> ClusterState::allocate(const std::string& node_id, const std::string& run_id,
                                        const scheduler::ResourceRequest& request) {
    Node* node = find_node(node_id);
    if (!node) throw Error(ErrorKind::internal, "allocate on unknown node " + node_id);
    if (!node->fits(request)) throw Error(ErrorKind::internal, "run " + run_id + " does not fit on " + node_id);
    if (node->resident.contains(run_id)) throw Error(ErrorKind::internal, "run " + run_id + " already on " + node_id);
    std::set<int> used;
    for (const auto& [id, r] : node->resident) used.insert(r.gpu_slots.begin(), r.gpu_slots.end());
    std::vector<int> slots;
    for (int s = 0; s < node->capacity.gpus && static_cast<int>(slots.size()) < request.gpus; ++s) {
        if (!used.contains(s)) slots.push_back(s);
    }
    node->allocated_cpus += request.cpus;
    node->allocated_gpus += request.gpus;
    node->resident[run_id] = Residency{request, slots};
    return slots;
}

void ClusterState::release(const std::string& node_id, const std::string& run_id, Timestamp now) {
    Node* node = find_node(node_id);
    if (!node) return;
    auto it = node->resident.find(run_id);
    if (it == node->resident.end()) return;
    node->allocated_cpus -= it->second.request.cpus;
    node->allocated_gpus -= it->second.request.gpus;
    node->resident.erase(it);
    if (node->resident.empty()) node->idle_since = now;
}

std::string ClusterState::check_invariants() const {
    std::set<std::string> ids;
    for (const auto& p : pools) {
        const int count = static_cast<int>(p.nodes.size());
        if (count < p.min_nodes || count > p.max_nodes) {
            return std::string(to_string(p.kind)) + " pool has " + std::to_string(count) + " nodes outside [" +
                   std::to_string(p.min_nodes) + ", " + std::to_string(p.max_nodes) + "]";
        }
        for (const auto& n : p.nodes) {
            if (!ids.insert(n.id).second) return "duplicate node id " + n.id;
            int cpus = 0, gpus = 0;
            for (const auto& [run, r] : n.resident) {
                cpus += r.request.cpus;
                gpus += r.request.gpus;
                if (static_cast<int>(r.gpu_slots.size()) != r.request.gpus) return "slot count mismatch for " + run;
            }
            if (cpus != n.allocated_cpus || gpus != n.allocated_gpus) return "allocation bookkeeping drift on " + n.id;
            if (n.allocated_cpus < 0 || n.allocated_cpus > n.capacity.cpus) return "cpu oversubscription on " + n.id;
            if (n.allocated_gpus < 0 || n.allocated_gpus > n.capacity.gpus) return "gpu oversubscription on " + n.id;
        }
    }
    return {};
}

Node make_node(NodePool& pool, const InstanceCapacity& capacity, Timestamp now) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s-%03d", pool.kind == PoolKind::gpu ? "gpu" : "cpu", pool.next_ordinal++);
    Node n;
    n.id = buf;
    n.pool = pool.kind;
    n.capacity = capacity;
    n.idle_since = now;
    return n;
}

ClusterState scale_pool(ClusterState cluster, PoolKind kind, int desired, const Catalog& catalog, Timestamp now) {
    NodePool* pool = cluster.find_pool(kind);
    if (!pool) {
        throw Error(ErrorKind::not_found, "cluster '" + cluster.name + "' has no " + std::string(to_string(kind)) + " pool");
    }
    const int target = std::clamp(desired, pool->min_nodes, pool->max_nodes);
    const InstanceCapacity& cap = catalog.lookup(pool->instance_type);
    while (static_cast<int>(pool->nodes.size()) < target) pool->nodes.push_back(make_node(*pool, cap, now));

    int excess = static_cast<int>(pool->nodes.size()) - target;
    if (excess <= 0) return cluster;
    std::vector<std::size_t> idle;  // indices, highest id first
    for (std::size_t i = pool->nodes.size(); i-- > 0;) {
        if (pool->nodes[i].resident.empty()) idle.push_back(i);
    }
    if (static_cast<int>(idle.size()) < excess) {
        std::string blocking;
        for (const auto& n : pool->nodes) {
            if (!n.resident.empty()) blocking = n.id;
        }
        throw Error(ErrorKind::conflict, "cannot shrink " + std::string(to_string(kind)) + " pool to " +
                                             std::to_string(target) + " nodes: node " + blocking + " has " +
                                             std::to_string(cluster.find_node(blocking)->resident.size()) +
                                             " resident run(s)");
    }
    idle.resize(static_cast<std::size_t>(excess));
    std::sort(idle.begin(), idle.end(), std::greater<>());
    for (std::size_t i : idle) pool->nodes.erase(pool->nodes.begin() + static_cast<std::ptrdiff_t>(i));
    return cluster;
}

// --- serialization ---------------------------------------------------------

json to_json(const ClusterState& c) {
    json pools = json::array();
    for (const auto& p : c.pools) {
        json nodes = json::array();
        for (const auto& n : p.nodes) {
            json resident = json::object();
            for (const auto& [run, r] : n.resident) {
                resident[run] = {{"request", scheduler::to_json(r.request)}, {"gpu_slots", r.gpu_slots}};
            }
            nodes.push_back({{"id", n.id},
                             {"capacity", {{"instance_type", n.capacity.instance_type},
                                           {"cpus", n.capacity.cpus},
                                           {"gpus", n.capacity.gpus}}},
                             {"allocated", {{"cpus", n.allocated_cpus}, {"gpus", n.allocated_gpus}}},
                             {"resident_runs", resident},
                             {"idle_since", n.idle_since}});
        }
        pools.push_back({{"pool_kind", std::string(to_string(p.kind))},
                         {"instance_type", p.instance_type},
                         {"min_nodes", p.min_nodes},
                         {"max_nodes", p.max_nodes},
                         {"next_ordinal", p.next_ordinal},
                         {"capacity", {{"cpus", p.capacity.cpus}, {"gpus", p.capacity.gpus}}},
                         {"nodes", nodes}});
    }
    return {{"schema", "orchestrate.cluster/1"},
            {"name", c.name},
            {"cloud_provider", c.cloud_provider},
            {"created_at", c.created_at},
            {"controller_endpoint", c.controller_endpoint ? json(*c.controller_endpoint) : json(nullptr)},
            {"controller_pid", c.controller_pid ? json(*c.controller_pid) : json(nullptr)},
            {"pools", pools}};
}

ClusterState cluster_from_json(const json& j) {
    ClusterState c;
    c.name = j.at("name").get<std::string>();
    c.cloud_provider = j.at("cloud_provider").get<std::string>();
    c.created_at = j.at("created_at").get<Timestamp>();
    if (!j.at("controller_endpoint").is_null()) c.controller_endpoint = j.at("controller_endpoint").get<std::string>();
    if (!j.at("controller_pid").is_null()) c.controller_pid = j.at("controller_pid").get<int>();
    for (const auto& pj : j.at("pools")) {
        NodePool p;
        p.kind = pj.at("pool_kind").get<std::string>() == "gpu" ? PoolKind::gpu : PoolKind::cpu;
        p.instance_type = pj.at("instance_type").get<std::string>();
        p.min_nodes = pj.at("min_nodes").get<int>();
        p.max_nodes = pj.at("max_nodes").get<int>();
        p.next_ordinal = pj.at("next_ordinal").get<int>();
        p.capacity = {p.instance_type, pj.at("capacity").at("cpus").get<int>(), pj.at("capacity").at("gpus").get<int>()};
        for (const auto& nj : pj.at("nodes")) {
            Node n;
            n.id = nj.at("id").get<std::string>();
            n.pool = p.kind;
            const json& cap = nj.at("capacity");
            n.capacity = {cap.at("instance_type").get<std::string>(), cap.at("cpus").get<int>(), cap.at("gpus").get<int>()};
            n.allocated_cpus = nj.at("allocated").at("cpus").get<int>();
            n.allocated_gpus = nj.at("allocated").at("gpus").get<int>();
            for (const auto& [run, rj] : nj.at("resident_runs").items()) {
                n.resident[run] = Residency{scheduler::parse_resources(rj.at("request")),
                                            rj.at("gpu_slots").get<std::vector<int>>()};
            }
            n.idle_since = nj.at("idle_since").get<Timestamp>();
            p.nodes.push_back(std::move(n));
        }
        c.pools.push_back(std::move(p));
    }
    return c;
}

}  // namespace orchestrate::provider
