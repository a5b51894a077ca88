#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "orchestrate/optimizer/observation.hpp"
#include "orchestrate/optimizer/space.hpp"

namespace orchestrate::optimizer {

inline constexpr std::size_t kDefaultGridCap = 10'000;
inline constexpr int kDefaultGridCount = 3;

struct StrategyOptions {
    StrategyKind kind = StrategyKind::random;
    std::uint64_t seed = 0;
    int population_size = 5;                        // mu, evolutionary only
    double mutation_scale = 0.1;                    // sigma as a fraction of the range
    double categorical_mutation_probability = 0.2;
    std::size_t grid_cap = kDefaultGridCap;
};

nlohmann::json to_json(const StrategyOptions& o);
/// Reads `strategy`, `seed` and the optional `evolutionary` block of an
/// experiment config.
StrategyOptions parse_strategy_options(const nlohmann::json& config);

/// Enumerates the grid: doubles evenly spaced on their scale (endpoints
/// included), ints evenly spaced then rounded and deduplicated, categoricals
/// take all values. Ordered with the last parameter varying fastest.
/// Throws invalid_argument when the product exceeds `cap`.
std::vector<Assignment> grid_enumerate(const ParameterSpace& space, std::size_t cap = kDefaultGridCap);

/// Number of grid points (after int dedup) without materializing them.
std::size_t grid_size(const ParameterSpace& space);

/// The i-th random-search assignment. Pure in (seed, index).
Assignment sample_random(const ParameterSpace& space, std::uint64_t seed, std::uint64_t index);

/// Gaussian/resample mutation of `parent` using the stream (seed, index).
Assignment mutate(const Assignment& parent, const ParameterSpace& space, const StrategyOptions& options,
                  std::uint64_t seed, std::uint64_t index);

struct PopulationMember {
    Assignment assignment;
    double value = 0.0;
    std::uint64_t sequence_index = 0;
};

/// Per-experiment suggestion state. Mutated only through suggest() and
/// ingest_observation(); the controller serializes both.
class StrategyState {
public:
    StrategyState(std::string experiment_id, StrategyOptions options, std::size_t observation_budget);

    const StrategyOptions& options() const noexcept { return options_; }
    std::size_t observation_budget() const noexcept { return budget_; }
    std::size_t issued_count() const noexcept { return issued_; }
    std::size_t observed_count() const noexcept { return observed_.size(); }
    std::size_t open_count() const noexcept { return open_.size(); }
    bool is_open(const std::string& suggestion_id) const { return open_.contains(suggestion_id); }

    /// Sorted by value, best first; at most options().population_size members.
    const std::vector<PopulationMember>& population() const noexcept { return population_; }

    /// Rebuilds the state from a persisted observation history (controller
    /// restart). Indices that were issued but never observed are reissued.
    void restore(std::span<const Observation> history);

private:
    friend std::optional<Suggestion> suggest(StrategyState&, const ParameterSpace&);
    friend void ingest_observation(StrategyState&, const Observation&);
    friend void withdraw_suggestion(StrategyState&, const std::string&);

    std::uint64_t next_free_index();
    void offer_to_population(const Assignment& a, double value, std::uint64_t index);

    std::string experiment_id_;
    StrategyOptions options_;
    std::size_t budget_;
    std::size_t issued_ = 0;
    std::map<std::string, std::uint64_t> open_;   // suggestion id -> index
    std::set<std::uint64_t> observed_;
    std::uint64_t cursor_ = 0;                    // every index below is used
    std::vector<PopulationMember> population_;
    std::optional<std::vector<Assignment>> grid_;
};

/// Next suggestion, or nullopt when the budget (or the grid) is exhausted.
std::optional<Suggestion> suggest(StrategyState& state, const ParameterSpace& space);

/// Closes the observation's suggestion and updates the population.
/// Throws invalid_argument for unknown or already-closed suggestions.
void ingest_observation(StrategyState& state, const Observation& obs);

/// Closes an open suggestion without an observation (its run was killed
/// before producing one). Unknown ids are ignored.
void withdraw_suggestion(StrategyState& state, const std::string& suggestion_id);

/// Argmax over successful observations; ties go to the earliest.
std::optional<BestSeen> best_assignment(std::span<const Observation> observations);

/// Running maximum of successful values, one entry per observation (absent
/// until the first success).
std::vector<std::optional<double>> best_trace(std::span<const Observation> observations);

}  // namespace orchestrate::optimizer
