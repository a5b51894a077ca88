#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "orchestrate/clock.hpp"
#include "orchestrate/executor/run_spec.hpp"
#include "orchestrate/optimizer/observation.hpp"
#include "orchestrate/optimizer/space.hpp"
#include "orchestrate/optimizer/strategy.hpp"
#include "orchestrate/scheduler/resources.hpp"

namespace orchestrate::store {

enum class ExperimentState { active, completed, deleted };
std::string_view to_string(ExperimentState s);
ExperimentState experiment_state_from_string(const std::string& s);

inline bool is_terminal(ExperimentState s) { return s != ExperimentState::active; }

/// Durable description and history of one tuning experiment. Outlives the
/// cluster it ran on.
struct ExperimentRecord {
    std::string id;
    std::string name;
    std::string cluster_name;
    optimizer::ParameterSpace space;
    optimizer::StrategyOptions strategy;
    std::size_t observation_budget = 1;
    std::size_t parallel_bandwidth = 1;
    scheduler::ResourceRequest resources;
    std::optional<executor::RunSpec> run;
    std::optional<executor::SyntheticSpec> synthetic;
    ExperimentState state = ExperimentState::active;
    std::vector<optimizer::Observation> observations;
    std::optional<optimizer::BestSeen> best;
    Timestamp created_at = 0;
    std::optional<Timestamp> closed_at;

    std::size_t succeeded_count() const;
    std::size_t failed_count() const;
};

enum class LogStream { stdout_stream, stderr_stream };
std::string_view to_string(LogStream s);  // "stdout" / "stderr"
LogStream log_stream_from_string(const std::string& s);

/// One line of model output. `seq` orders lines within (run_id, stream);
/// `cursor` orders all lines of one experiment by arrival and is the resume
/// point for followers.
struct LogRecord {
    std::string experiment_id;
    std::string run_id;
    LogStream stream = LogStream::stdout_stream;
    std::uint64_t seq = 0;
    std::uint64_t cursor = 0;
    Timestamp timestamp = 0;
    std::string line;
};

struct PurgeReport {
    std::size_t logs_deleted = 0;
    std::size_t experiments_retained = 0;
};

// Serialized forms. Field names are stable and documented in README.md.
nlohmann::json meta_to_json(const ExperimentRecord& r);
/// Fills everything except observations/best.
ExperimentRecord meta_from_json(const nlohmann::json& j);
nlohmann::json to_json(const optimizer::Observation& o);
optimizer::Observation observation_from_json(const nlohmann::json& j, const optimizer::ParameterSpace* space);
nlohmann::json to_json(const LogRecord& r);
LogRecord log_record_from_json(const nlohmann::json& j);

}  // namespace orchestrate::store
