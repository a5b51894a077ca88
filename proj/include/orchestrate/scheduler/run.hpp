#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "orchestrate/clock.hpp"
#include "orchestrate/optimizer/observation.hpp"
#include "orchestrate/scheduler/resources.hpp"

namespace orchestrate::scheduler {

enum class RunState { queued, scheduled, running, succeeded, failed, killed };

std::string_view to_string(RunState s);
RunState run_state_from_string(const std::string& s);
bool is_terminal(RunState s);
bool is_live(RunState s);  // scheduled or running: holds resources
bool is_legal_transition(RunState from, RunState to);

struct RunExit {
    std::optional<int> code;
    std::string reason;
};

/// One evaluation of one suggestion: the scheduler's unit of work.
struct RunRecord {
    std::string run_id;  // "<experiment>-r0000"
    std::string experiment_id;
    int index = 0;  // creation index within the experiment
    optimizer::Suggestion suggestion;
    ResourceRequest request;
    RunState state = RunState::queued;
    std::optional<std::string> node_id;
    std::vector<int> gpu_slots;
    Timestamp queued_at = 0;
    std::optional<Timestamp> scheduled_at;
    std::optional<Timestamp> started_at;
    std::optional<Timestamp> finished_at;
    std::optional<RunExit> exit;
    std::optional<double> value;

    /// "r0000": the run id without its experiment prefix.
    std::string short_id() const;
    /// Time since start (or scheduling), up to finish or `now`.
    Timestamp duration_us(Timestamp now = now_us()) const;
};

std::string make_run_id(const std::string& experiment_id, int index);

/// Moves a run to `to`, stamping the matching timestamp. Throws
/// Error(illegal_transition) for anything outside the state machine.
void transition(RunRecord& run, RunState to, Timestamp now);

nlohmann::json to_json(const RunRecord& r);
RunRecord run_from_json(const nlohmann::json& j);

}  // namespace orchestrate::scheduler
