#include "orchestrate/store/records.hpp"

#include "orchestrate/error.hpp"

namespace orchestrate::store {

using nlohmann::json;

std::string_view to_string(ExperimentState s) {
    switch (s) {
        case ExperimentState::active: return "active";
        case ExperimentState::completed: return "completed";
        case ExperimentState::deleted: return "deleted";
    }
    return "?";
}

ExperimentState experiment_state_from_string(const std::string& s) {
    if (s == "active") return ExperimentState::active;
    if (s == "completed") return ExperimentState::completed;
    if (s == "deleted") return ExperimentState::deleted;
    throw Error(ErrorKind::internal, "unknown experiment state '" + s + "'");
}

std::string_view to_string(LogStream s) { return s == LogStream::stdout_stream ? "stdout" : "stderr"; }

LogStream log_stream_from_string(const std::string& s) {
    if (s == "stdout") return LogStream::stdout_stream;
    if (s == "stderr") return LogStream::stderr_stream;
    throw Error(ErrorKind::internal, "unknown log stream '" + s + "'");
}

std::size_t ExperimentRecord::succeeded_count() const {
    std::size_t n = 0;
    for (const auto& o : observations) n += o.succeeded() ? 1 : 0;
    return n;
}

std::size_t ExperimentRecord::failed_count() const { return observations.size() - succeeded_count(); }

json meta_to_json(const ExperimentRecord& r) {
    json j = {
        {"schema", "orchestrate.experiment/1"},
        {"id", r.id},
        {"name", r.name},
        {"cluster_name", r.cluster_name},
        {"parameters", optimizer::to_json(r.space)},
        {"strategy", optimizer::to_json(r.strategy)},
        {"observation_budget", r.observation_budget},
        {"parallel_bandwidth", r.parallel_bandwidth},
        {"resources", scheduler::to_json(r.resources)},
        {"run", r.run ? executor::to_json(*r.run) : json(nullptr)},
        {"synthetic", r.synthetic ? executor::to_json(*r.synthetic) : json(nullptr)},
        {"state", std::string(to_string(r.state))},
        {"created_at", r.created_at},
        {"closed_at", r.closed_at ? json(*r.closed_at) : json(nullptr)},
    };
    return j;
}

ExperimentRecord meta_from_json(const json& j) {
    ExperimentRecord r;
    r.id = j.at("id").get<std::string>();
    r.name = j.at("name").get<std::string>();
    r.cluster_name = j.at("cluster_name").get<std::string>();
    r.space = optimizer::parse_space(j.at("parameters"));
    const json& s = j.at("strategy");
    r.strategy.kind = optimizer::strategy_from_string(s.at("kind").get<std::string>());
    r.strategy.seed = s.at("seed").get<std::uint64_t>();
    r.strategy.population_size = s.value("population_size", 5);
    r.strategy.mutation_scale = s.value("mutation_scale", 0.1);
    r.strategy.categorical_mutation_probability = s.value("categorical_mutation_probability", 0.2);
    r.strategy.grid_cap = s.value("grid_cap", optimizer::kDefaultGridCap);
    r.observation_budget = j.at("observation_budget").get<std::size_t>();
    r.parallel_bandwidth = j.at("parallel_bandwidth").get<std::size_t>();
    r.resources = scheduler::parse_resources(j.at("resources"));
    if (!j.at("run").is_null()) r.run = executor::parse_run_spec(j.at("run"));
    if (!j.at("synthetic").is_null()) r.synthetic = executor::parse_synthetic_spec(j.at("synthetic"));
    r.state = experiment_state_from_string(j.at("state").get<std::string>());
    r.created_at = j.at("created_at").get<Timestamp>();
    if (!j.at("closed_at").is_null()) r.closed_at = j.at("closed_at").get<Timestamp>();
    return r;
}

json to_json(const optimizer::Observation& o) {
    return {
        {"suggestion_id", o.suggestion_id},
        {"sequence_index", o.sequence_index},
        {"assignment", optimizer::assignment_to_json(o.assignment)},
        {"value", o.value ? json(*o.value) : json(nullptr)},
        {"failed", o.failed},
        {"run_id", o.run_id},
        {"reported_at", o.reported_at},
    };
}

optimizer::Observation observation_from_json(const json& j, const optimizer::ParameterSpace* space) {
    optimizer::Observation o;
    o.suggestion_id = j.at("suggestion_id").get<std::string>();
    o.sequence_index = j.at("sequence_index").get<std::uint64_t>();
    o.assignment = optimizer::assignment_from_json(j.at("assignment"), space);
    if (!j.at("value").is_null()) o.value = j.at("value").get<double>();
    o.failed = j.at("failed").get<bool>();
    o.run_id = j.value("run_id", "");
    o.reported_at = j.value("reported_at", Timestamp{0});
    if (!o.well_formed()) throw Error(ErrorKind::internal, "observation has both or neither of value and failed");
    return o;
}

json to_json(const LogRecord& r) {
    return {
        {"experiment_id", r.experiment_id},
        {"run_id", r.run_id},
        {"stream", std::string(to_string(r.stream))},
        {"seq", r.seq},
        {"cursor", r.cursor},
        {"timestamp", r.timestamp},
        {"line", r.line},
    };
}

LogRecord log_record_from_json(const json& j) {
    LogRecord r;
    r.experiment_id = j.at("experiment_id").get<std::string>();
    r.run_id = j.at("run_id").get<std::string>();
    r.stream = log_stream_from_string(j.at("stream").get<std::string>());
    r.seq = j.at("seq").get<std::uint64_t>();
    r.cursor = j.at("cursor").get<std::uint64_t>();
    r.timestamp = j.at("timestamp").get<Timestamp>();
    r.line = j.at("line").get<std::string>();
    return r;
}

}  // namespace orchestrate::store
