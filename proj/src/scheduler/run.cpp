#include "orchestrate/scheduler/run.hpp"

#include <cstdio>

#include "orchestrate/error.hpp"

namespace orchestrate::scheduler {

using nlohmann::json;

std::string_view to_string(RunState s) {
    switch (s) {
        case RunState::queued: return "queued";
        case RunState::scheduled: return "scheduled";
        case RunState::running: return "running";
        case RunState::succeeded: return "succeeded";
        case RunState::failed: return "failed";
        case RunState::killed: return "killed";
    }
    return "unknown";
}

RunState run_state_from_string(const std::string& s) {
    for (RunState st : {RunState::queued, RunState::scheduled, RunState::running, RunState::succeeded,
                        RunState::failed, RunState::killed}) {
        if (to_string(st) == s) return st;
    }
    throw Error(ErrorKind::invalid_argument, "unknown run state '" + s + "'");
}

bool is_terminal(RunState s) {
    return s == RunState::succeeded || s == RunState::failed || s == RunState::killed;
}

bool is_live(RunState s) { return s == RunState::scheduled || s == RunState::running; }

bool is_legal_transition(RunState from, RunState to) {
    switch (from) {
        case RunState::queued: return to == RunState::scheduled || to == RunState::killed;
        case RunState::scheduled: return to == RunState::running || to == RunState::killed || to == RunState::failed;
        case RunState::running: return is_terminal(to);
        default: return false;
    }
}

std::string RunRecord::short_id() const {
    const auto pos = run_id.rfind('-');
    return pos == std::string::npos ? run_id : run_id.substr(pos + 1);
}

Timestamp RunRecord::duration_us(Timestamp now) const {
    const auto start = started_at ? started_at : scheduled_at;
    if (!start) return 0;
    return (finished_at ? *finished_at : now) - *start;
}

std::string make_run_id(const std::string& experiment_id, int index) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "-r%04d", index);
    return experiment_id + buf;
}

void transition(RunRecord& run, RunState to, Timestamp now) {
    if (!is_legal_transition(run.state, to)) {
        throw Error(ErrorKind::illegal_transition, "run " + run.run_id + " cannot go from " +
                                                       std::string(to_string(run.state)) + " to " +
                                                       std::string(to_string(to)));
    }
    run.state = to;
    if (to == RunState::scheduled) run.scheduled_at = now;
    else if (to == RunState::running) run.started_at = now;
    else run.finished_at = now;
}

namespace {

json opt_ts(const std::optional<Timestamp>& t) { return t ? json(*t) : json(nullptr); }

std::optional<Timestamp> ts_from(const json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<Timestamp>();
}

}  // namespace

json to_json(const RunRecord& r) {
    json j = {{"run_id", r.run_id},
              {"experiment_id", r.experiment_id},
              {"index", r.index},
              {"suggestion_id", r.suggestion.suggestion_id},
              {"sequence_index", r.suggestion.sequence_index},
              {"strategy", std::string(optimizer::to_string(r.suggestion.strategy))},
              {"assignment", optimizer::assignment_to_json(r.suggestion.assignment)},
              {"resources", to_json(r.request)},
              {"state", std::string(to_string(r.state))},
              {"node_id", r.node_id ? json(*r.node_id) : json(nullptr)},
              {"gpu_slots", r.gpu_slots},
              {"queued_at", r.queued_at},
              {"scheduled_at", opt_ts(r.scheduled_at)},
              {"started_at", opt_ts(r.started_at)},
              {"finished_at", opt_ts(r.finished_at)},
              {"value", r.value ? json(*r.value) : json(nullptr)}};
    if (r.exit) {
        j["exit"] = {{"code", r.exit->code ? json(*r.exit->code) : json(nullptr)}, {"reason", r.exit->reason}};
    } else {
        j["exit"] = nullptr;
    }
    return j;
}

RunRecord run_from_json(const json& j) {
    RunRecord r;
    r.run_id = j.at("run_id").get<std::string>();
    r.experiment_id = j.at("experiment_id").get<std::string>();
    r.index = j.at("index").get<int>();
    r.suggestion.suggestion_id = j.at("suggestion_id").get<std::string>();
    r.suggestion.sequence_index = j.at("sequence_index").get<std::uint64_t>();
    r.suggestion.strategy = optimizer::strategy_from_string(j.at("strategy").get<std::string>());
    r.suggestion.assignment = optimizer::assignment_from_json(j.at("assignment"));
    r.request = parse_resources(j.at("resources"));
    r.state = run_state_from_string(j.at("state").get<std::string>());
    if (!j.at("node_id").is_null()) r.node_id = j.at("node_id").get<std::string>();
    r.gpu_slots = j.at("gpu_slots").get<std::vector<int>>();
    r.queued_at = j.at("queued_at").get<Timestamp>();
    r.scheduled_at = ts_from(j, "scheduled_at");
    r.started_at = ts_from(j, "started_at");
    r.finished_at = ts_from(j, "finished_at");
    if (j.contains("value") && !j.at("value").is_null()) r.value = j.at("value").get<double>();
    if (j.contains("exit") && !j.at("exit").is_null()) {
        RunExit e;
        if (!j.at("exit").at("code").is_null()) e.code = j.at("exit").at("code").get<int>();
        e.reason = j.at("exit").at("reason").get<std::string>();
        r.exit = e;
    }
    return r;
}

}  // namespace orchestrate::scheduler
