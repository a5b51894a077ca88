#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "orchestrate/executor/run_spec.hpp"
#include "orchestrate/provider/cluster.hpp"
#include "orchestrate/scheduler/placement.hpp"
#include "orchestrate/scheduler/run.hpp"
#include "orchestrate/store/state_root.hpp"

namespace orchestrate::scheduler {

struct SchedulerOptions {
    Timestamp idle_timeout_us = 30'000'000;
    bool autoscale = true;
};

struct RunCounts {
    std::size_t queued = 0, scheduled = 0, running = 0, succeeded = 0, failed = 0, killed = 0;

    std::size_t live() const { return scheduled + running; }
    std::size_t total() const { return queued + scheduled + running + succeeded + failed + killed; }
};

/// Owns one cluster's run table and node allocations. Not thread-safe: the
/// controller's event loop is the only caller. Every run transition is
/// appended to the journal (if any) before the call returns.
class Scheduler {
public:
    Scheduler(provider::ClusterState cluster, SchedulerOptions options = {},
              std::optional<std::filesystem::path> journal = std::nullopt, store::StateRoot* store = nullptr);

    const provider::ClusterState& cluster() const noexcept { return cluster_; }
    const SchedulerOptions& options() const noexcept { return options_; }

    /// Experiments take part in round-robin fairness in registration order.
    void register_experiment(const std::string& experiment_id, int parallel_bandwidth);
    bool has_experiment(const std::string& experiment_id) const { return bandwidth_.contains(experiment_id); }

    /// Throws Error(unschedulable) if no pool type can ever hold `request`.
    void check_request(const ResourceRequest& request) const;

    /// Queues a run for the suggestion. Throws Error(internal) if the
    /// experiment's queued + live runs already reach its bandwidth.
    const RunRecord& submit_run(const std::string& experiment_id, const optimizer::Suggestion& suggestion,
                                const ResourceRequest& request, Timestamp now = now_us());

    /// Plans and applies placements; returns the runs moved to scheduled.
    std::vector<RunRecord> schedule(Timestamp now = now_us());

    /// Applies one autoscale tick; returns the requests that were applied.
    AutoscaleDecision autoscale(Timestamp now = now_us());

    const RunRecord& mark_running(const std::string& run_id, Timestamp now = now_us());

    /// Finishes a run: releases its node and, while the experiment is active,
    /// records a success or failure observation through the store. A killed
    /// run of an active experiment (a timeout) is recorded as a failure.
    const RunRecord& complete_run(const std::string& run_id, const executor::Outcome& outcome,
                                  Timestamp now = now_us());

    /// Kills every non-terminal run of the experiment and releases its
    /// allocations. Returns the killed runs, with the state they were in
    /// before (so callers can signal running processes). Idempotent.
    std::vector<RunRecord> kill_experiment_runs(const std::string& experiment_id, Timestamp now = now_us());

    /// Kills every non-terminal run on the cluster.
    std::vector<RunRecord> kill_all(const std::string& reason, Timestamp now = now_us());

    const RunRecord& run(const std::string& run_id) const;
    const RunRecord* find_run(const std::string& run_id) const;
    std::vector<const RunRecord*> experiment_runs(const std::string& experiment_id) const;
    RunCounts counts(const std::string& experiment_id) const;
    std::vector<QueuedRun> queued() const;

    /// Allocated (cpus, gpus) summed over the experiment's live runs.
    std::pair<int, int> experiment_allocation(const std::string& experiment_id) const;

private:
    RunRecord& mutable_run(const std::string& run_id);
    std::vector<RunRecord> kill_runs(const std::string& experiment_id, const std::string& reason, Timestamp now);
    void journal(const RunRecord& run);
    void release(RunRecord& run, Timestamp now);
    void load_journal();

    provider::ClusterState cluster_;
    SchedulerOptions options_;
    std::optional<std::filesystem::path> journal_path_;
    std::ofstream journal_out_;
    store::StateRoot* store_;

    std::vector<std::string> experiment_order_;
    std::map<std::string, int> bandwidth_;
    std::map<std::string, int> next_index_;
    std::map<std::string, RunRecord> runs_;
    std::map<std::string, std::vector<std::string>> by_experiment_;  // run ids in creation order
    std::vector<std::string> queue_;                                 // queued run ids, submission order
};

/// Reads a run journal: the last record for each run id wins, in first-seen
/// order. A torn final line is ignored.
std::vector<RunRecord> read_run_journal(const std::filesystem::path& file);

}  // namespace orchestrate::scheduler
