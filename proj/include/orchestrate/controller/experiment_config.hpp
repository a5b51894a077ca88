#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "orchestrate/executor/run_spec.hpp"
#include "orchestrate/optimizer/space.hpp"
#include "orchestrate/optimizer/strategy.hpp"
#include "orchestrate/scheduler/resources.hpp"

namespace orchestrate::controller {

/// The experiment configuration file:
///
///   name: str
///   cluster_name: str                 optional; CLI --cluster overrides
///   parameters: [ {name, type, bounds|values, scale, grid_count} ]
///   strategy: random | grid | evolutionary   (default random)
///   seed: int                         optional
///   evolutionary: {population_size, mutation_scale, categorical_mutation_probability}
///   observation_budget: int >= 1
///   parallel_bandwidth: int >= 1
///   resources: {gpus, cpus}           default {gpus: 0, cpus: 1}
///   run: {command, workdir, env, timeout_seconds}
///   synthetic: {objective, params, duration_ms}     exactly one of run/synthetic
struct ExperimentConfig {
    std::string name;
    std::optional<std::string> cluster_name;
    optimizer::ParameterSpace space;
    optimizer::StrategyOptions strategy;
    std::size_t observation_budget = 1;
    std::size_t parallel_bandwidth = 1;
    scheduler::ResourceRequest resources;
    std::optional<executor::RunSpec> run;
    std::optional<executor::SyntheticSpec> synthetic;
};

/// Validates with field paths. A relative (or missing) run.workdir is
/// resolved against `base_dir` when one is given.
ExperimentConfig parse_experiment_config(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
ExperimentConfig load_experiment_config(const std::filesystem::path& file);
nlohmann::json to_json(const ExperimentConfig& c);

}  // namespace orchestrate::controller
