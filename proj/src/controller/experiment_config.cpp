#include "orchestrate/controller/experiment_config.hpp"

#include <set>

#include "orchestrate/json_fields.hpp"
#include "orchestrate/yaml_json.hpp"

namespace orchestrate::controller {

namespace jf = json_fields;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::size_t positive_count(const json& j, const std::string& key) {
    const long long v = jf::as_integer(jf::require(j, key, ""), key);
    if (v < 1) jf::fail(key, "must be at least 1");
    return static_cast<std::size_t>(v);
}

}  // namespace

ExperimentConfig parse_experiment_config(const json& j, const fs::path& base_dir) {
    if (!j.is_object()) jf::fail("", "experiment configuration must be a mapping");
    static const std::set<std::string> kKnown = {"name",     "cluster_name",       "parameters",
                                                 "strategy", "seed",               "evolutionary",
                                                 "observation_budget", "parallel_bandwidth", "resources",
                                                 "run",      "synthetic"};
    for (const auto& [key, value] : j.items()) {
        if (!kKnown.contains(key)) jf::fail(key, "unknown field");
    }
    ExperimentConfig c;
    c.name = jf::as_string(jf::require(j, "name", ""), "name");
    if (c.name.empty()) jf::fail("name", "must not be empty");
    if (const json* cl = jf::optional(j, "cluster_name")) c.cluster_name = jf::as_string(*cl, "cluster_name");
    c.space = optimizer::parse_space(jf::require(j, "parameters", ""), "parameters");
    c.strategy = optimizer::parse_strategy_options(j);
    c.observation_budget = positive_count(j, "observation_budget");
    c.parallel_bandwidth = positive_count(j, "parallel_bandwidth");
    if (const json* r = jf::optional(j, "resources")) c.resources = scheduler::parse_resources(*r, "resources");

    const json* run = jf::optional(j, "run");
    const json* synthetic = jf::optional(j, "synthetic");
    if ((run != nullptr) == (synthetic != nullptr)) {
        jf::fail(run ? "synthetic" : "run", "exactly one of run or synthetic is required");
    }
    if (run) {
        c.run = executor::parse_run_spec(*run, "run");
        if (!base_dir.empty()) {
            const fs::path wd = c.run->workdir.empty() ? base_dir : base_dir / c.run->workdir;
            c.run->workdir = fs::weakly_canonical(fs::absolute(wd)).string();
        }
    } else {
        c.synthetic = executor::parse_synthetic_spec(*synthetic, "synthetic");
    }
    if (c.strategy.kind == optimizer::StrategyKind::grid) {
        // Validates the cap up front so the error carries a field.
        if (optimizer::grid_size(c.space) > c.strategy.grid_cap) {
            jf::fail("strategy", "grid has " + std::to_string(optimizer::grid_size(c.space)) +
                                     " points, more than the limit of " + std::to_string(c.strategy.grid_cap));
        }
    }
    return c;
}

ExperimentConfig load_experiment_config(const fs::path& file) {
    return parse_experiment_config(load_yaml_file(file), fs::absolute(file).parent_path());
}

json to_json(const ExperimentConfig& c) {
    json j = {{"name", c.name},
              {"parameters", optimizer::to_json(c.space)},
              {"observation_budget", c.observation_budget},
              {"parallel_bandwidth", c.parallel_bandwidth},
              {"resources", scheduler::to_json(c.resources)}};
    j["strategy"] = std::string(optimizer::to_string(c.strategy.kind));
    j["seed"] = c.strategy.seed;
    j["evolutionary"] = {{"population_size", c.strategy.population_size},
                         {"mutation_scale", c.strategy.mutation_scale},
                         {"categorical_mutation_probability", c.strategy.categorical_mutation_probability}};
    if (c.cluster_name) j["cluster_name"] = *c.cluster_name;
    if (c.run) j["run"] = executor::to_json(*c.run);
    if (c.synthetic) j["synthetic"] = executor::to_json(*c.synthetic);
    return j;
}

}  // namespace orchestrate::controller
