#pragma once

#include <vector>

#include <nlohmann/json.hpp>

#include "orchestrate/scheduler/run.hpp"
#include "orchestrate/store/records.hpp"

namespace orchestrate::controller {

/// The experiment status report:
///
///   id, name, state, cluster_name, cluster_destroyed, strategy,
///   created_at, closed_at,
///   budget: {completed, failed, total}    completed = successful observations
///   runs: {queued, scheduled, running, succeeded, failed, killed, total, live}
///   best: {assignment, value} | null
///   run_table: [{run_id, short_id, index, state, node_id, gpu_slots,
///                duration_us, value, reason, exit_code}]   creation order
///   observations: [{index, suggestion_id, run_id, value, failed, best}]
///                 only when `include_history`
nlohmann::json experiment_status(const store::ExperimentRecord& record, const std::vector<scheduler::RunRecord>& runs,
                                 bool cluster_destroyed, bool include_history, Timestamp now = now_us());

}  // namespace orchestrate::controller
