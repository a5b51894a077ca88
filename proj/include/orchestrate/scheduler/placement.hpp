#pragma once

#include <map>
#include <string>
#include <vector>

#include "orchestrate/provider/cluster.hpp"
#include "orchestrate/scheduler/resources.hpp"

namespace orchestrate::scheduler {

struct QueuedRun {
    std::string run_id;
    std::string experiment_id;
    ResourceRequest request;
};

struct Placement {
    std::string run_id;
    std::string node_id;

    friend bool operator==(const Placement&, const Placement&) = default;
};

/// Input to one planning step. `queue` is in submission order.
/// `experiment_order` is experiment creation order; experiments missing from
/// it follow in order of first appearance in the queue. `slots` caps how many
/// more runs each experiment may have placed (parallel bandwidth minus live
/// runs); experiments absent from `slots` are uncapped.
struct PlacementProblem {
    std::vector<QueuedRun> queue;
    std::vector<std::string> experiment_order;
    std::map<std::string, int> slots;
};

/// Candidate order: round-robin across experiments, each experiment's runs in
/// submission order.
std::vector<const QueuedRun*> fairness_order(const PlacementProblem& problem);

/// Best-fit placement over the fairness order. GPU-free runs go to CPU-pool
/// nodes when one fits; nodes are ranked by residual GPUs, then residual
/// CPUs, then id. Falls back to the first-fit plan when that places more.
/// Pure and deterministic.
std::vector<Placement> place_queued(const provider::ClusterState& cluster, const PlacementProblem& problem);

/// Lowest-id node that fits, over the same fairness order and slot caps.
std::vector<Placement> first_fit_baseline(const provider::ClusterState& cluster, const PlacementProblem& problem);

/// True when some pool, scaled to its maximum, has a node type that fits.
bool satisfiable(const provider::ClusterState& cluster, const ResourceRequest& request);

struct ScaleRequest {
    provider::PoolKind pool = provider::PoolKind::gpu;
    int delta = 0;  // +1 or -1
    std::string reason;

    friend bool operator==(const ScaleRequest& a, const ScaleRequest& b) {
        return a.pool == b.pool && a.delta == b.delta;
    }
};

struct AutoscaleDecision {
    std::vector<ScaleRequest> requests;
    std::vector<std::string> unschedulable;  // queued runs no pool type can ever hold
};

/// Grows a pool by one node when a queued run fits an empty node of that pool
/// but no existing node; shrinks a pool by one when one of its nodes has been
/// idle longer than `idle_timeout_us` and the pool is above its minimum.
/// At most one request per pool per tick. Deterministic.
AutoscaleDecision autoscale_tick(const provider::ClusterState& cluster, const std::vector<QueuedRun>& queue,
                                 Timestamp now, Timestamp idle_timeout_us);

}  // namespace orchestrate::scheduler
