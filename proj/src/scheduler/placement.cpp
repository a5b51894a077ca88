#include "orchestrate/scheduler/placement.hpp"

#include <algorithm>
#include <set>
#include <tuple>

namespace orchestrate::scheduler {

using provider::ClusterState;
using provider::Node;
using provider::PoolKind;

std::vector<const QueuedRun*> fairness_order(const PlacementProblem& problem) {
    std::vector<std::string> order;
    std::set<std::string> seen;
    for (const auto& id : problem.experiment_order) {
        if (seen.insert(id).second) order.push_back(id);
    }
    std::map<std::string, std::vector<const QueuedRun*>> per_experiment;
    for (const auto& run : problem.queue) {
        if (seen.insert(run.experiment_id).second) order.push_back(run.experiment_id);
        per_experiment[run.experiment_id].push_back(&run);
    }
    std::vector<const QueuedRun*> out;
    out.reserve(problem.queue.size());
    for (std::size_t round = 0; out.size() < problem.queue.size(); ++round) {
        for (const auto& id : order) {
            const auto& runs = per_experiment[id];
            if (round < runs.size()) out.push_back(runs[round]);
        }
    }
    return out;
}

namespace {

struct Residual {
    const Node* node;
    int cpus;
    int gpus;

    bool fits(const ResourceRequest& r) const { return r.cpus <= cpus && r.gpus <= gpus; }
};

std::vector<Residual> residuals(const ClusterState& cluster) {
    std::vector<Residual> out;
    for (const Node* n : cluster.nodes()) out.push_back({n, n->free_cpus(), n->free_gpus()});
    return out;
}

template <typename Choose>
std::vector<Placement> plan(const ClusterState& cluster, const PlacementProblem& problem, Choose choose) {
    std::vector<Residual> nodes = residuals(cluster);
    std::map<std::string, int> slots = problem.slots;
    std::vector<Placement> out;
    for (const QueuedRun* run : fairness_order(problem)) {
        auto cap = slots.find(run->experiment_id);
        if (cap != slots.end() && cap->second <= 0) continue;
        Residual* target = choose(nodes, run->request);
        if (!target) continue;
        target->cpus -= run->request.cpus;
        target->gpus -= run->request.gpus;
        if (cap != slots.end()) --cap->second;
        out.push_back({run->run_id, target->node->id});
    }
    return out;
}

Residual* best_fit(std::vector<Residual>& nodes, const ResourceRequest& request) {
    auto best_in = [&](bool cpu_pool_only) -> Residual* {
        Residual* best = nullptr;
        for (auto& r : nodes) {
            if (cpu_pool_only && r.node->pool != PoolKind::cpu) continue;
            if (!r.fits(request)) continue;
            if (!best || std::tuple(r.gpus, r.cpus, r.node->id) < std::tuple(best->gpus, best->cpus, best->node->id)) {
                best = &r;
            }
        }
        return best;
    };
    if (request.gpus == 0) {
        if (Residual* r = best_in(true)) return r;
    }
    return best_in(false);
}

Residual* first_fit(std::vector<Residual>& nodes, const ResourceRequest& request) {
    for (auto& r : nodes) {
        if (r.fits(request)) return &r;
    }
    return nullptr;
}

bool fits_empty(const provider::InstanceCapacity& cap, const ResourceRequest& r) {
    return r.cpus <= cap.cpus && r.gpus <= cap.gpus;
}

}  // namespace

std::vector<Placement> place_queued(const ClusterState& cluster, const PlacementProblem& problem) {
    auto best = plan(cluster, problem, best_fit);
    auto first = plan(cluster, problem, first_fit);
    return first.size() > best.size() ? first : best;
}

std::vector<Placement> first_fit_baseline(const ClusterState& cluster, const PlacementProblem& problem) {
    return plan(cluster, problem, first_fit);
}

bool satisfiable(const ClusterState& cluster, const ResourceRequest& request) {
    for (const auto& pool : cluster.pools) {
        if (pool.max_nodes <= 0) continue;
        if (fits_empty(pool.capacity, request)) return true;
    }
    return false;
}

AutoscaleDecision autoscale_tick(const ClusterState& cluster, const std::vector<QueuedRun>& queue, Timestamp now,
                                 Timestamp idle_timeout_us) {
    AutoscaleDecision out;
    std::set<PoolKind> growing;
    const auto nodes = cluster.nodes();
    for (const auto& run : queue) {
        const bool fits_now = std::any_of(nodes.begin(), nodes.end(), [&](const Node* n) { return n->fits(run.request); });
        if (fits_now) continue;
        // Preferred pool first: CPU pool for GPU-free runs.
        std::vector<PoolKind> candidates = run.request.gpus == 0 ? std::vector{PoolKind::cpu, PoolKind::gpu}
                                                                  : std::vector{PoolKind::gpu};
        bool ever = false;
        for (PoolKind kind : candidates) {
            const auto* pool = cluster.find_pool(kind);
            if (!pool || !fits_empty(pool->capacity, run.request)) continue;
            if (pool->max_nodes <= 0) continue;
            ever = true;
            if (static_cast<int>(pool->nodes.size()) < pool->max_nodes) {
                if (growing.insert(kind).second) {
                    out.requests.push_back({kind, +1, "run " + run.run_id + " fits no current node"});
                }
                break;
            }
        }
        if (!ever) out.unschedulable.push_back(run.run_id);
    }
    for (const auto& pool : cluster.pools) {
        if (growing.contains(pool.kind)) continue;
        if (static_cast<int>(pool.nodes.size()) <= pool.min_nodes) continue;
        for (auto it = pool.nodes.rbegin(); it != pool.nodes.rend(); ++it) {
            if (it->resident.empty() && now - it->idle_since > idle_timeout_us) {
                out.requests.push_back({pool.kind, -1, "node " + it->id + " idle"});
                break;
            }
        }
    }
    return out;
}

}  // namespace orchestrate::scheduler
