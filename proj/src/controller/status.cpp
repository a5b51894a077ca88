#include "orchestrate/controller/status.hpp"

#include "orchestrate/optimizer/strategy.hpp"

namespace orchestrate::controller {

using nlohmann::json;
using scheduler::RunState;

json experiment_status(const store::ExperimentRecord& r, const std::vector<scheduler::RunRecord>& runs,
                       bool cluster_destroyed, bool include_history, Timestamp now) {
    json counts = {{"queued", 0}, {"scheduled", 0}, {"running", 0}, {"succeeded", 0}, {"failed", 0}, {"killed", 0}};
    json table = json::array();
    for (const auto& run : runs) {
        counts[std::string(to_string(run.state))] = counts[std::string(to_string(run.state))].get<int>() + 1;
        table.push_back({{"run_id", run.run_id},
                         {"short_id", run.short_id()},
                         {"index", run.index},
                         {"state", std::string(to_string(run.state))},
                         {"node_id", run.node_id ? json(*run.node_id) : json(nullptr)},
                         {"gpu_slots", run.gpu_slots},
                         {"duration_us", run.duration_us(now)},
                         {"value", run.value ? json(*run.value) : json(nullptr)},
                         {"reason", run.exit && !run.exit->reason.empty() ? json(run.exit->reason) : json(nullptr)},
                         {"exit_code", run.exit && run.exit->code ? json(*run.exit->code) : json(nullptr)}});
    }
    counts["total"] = runs.size();
    counts["live"] = counts["scheduled"].get<int>() + counts["running"].get<int>();

    json out = {{"id", r.id},
                {"name", r.name},
                {"state", std::string(to_string(r.state))},
                {"cluster_name", r.cluster_name},
                {"cluster_destroyed", cluster_destroyed},
                {"strategy", std::string(optimizer::to_string(r.strategy.kind))},
                {"created_at", r.created_at},
                {"closed_at", r.closed_at ? json(*r.closed_at) : json(nullptr)},
                {"budget",
                 {{"completed", r.succeeded_count()}, {"failed", r.failed_count()}, {"total", r.observation_budget}}},
                {"runs", counts},
                {"best", r.best ? json{{"assignment", optimizer::assignment_to_json(r.best->assignment)},
                                       {"value", r.best->value}}
                                : json(nullptr)},
                {"run_table", table}};
    if (include_history) {
        const auto trace = optimizer::best_trace(r.observations);
        json history = json::array();
        for (std::size_t i = 0; i < r.observations.size(); ++i) {
            const auto& o = r.observations[i];
            history.push_back({{"index", i},
                               {"suggestion_id", o.suggestion_id},
                               {"run_id", o.run_id},
                               {"value", o.value ? json(*o.value) : json(nullptr)},
                               {"failed", o.failed},
                               {"best", trace[i] ? json(*trace[i]) : json(nullptr)}});
        }
        out["observations"] = history;
    }
    return out;
}

}  // namespace orchestrate::controller
