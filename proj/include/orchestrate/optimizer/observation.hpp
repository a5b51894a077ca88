#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "orchestrate/clock.hpp"
#include "orchestrate/optimizer/space.hpp"

namespace orchestrate::optimizer {

enum class StrategyKind { random, grid, evolutionary };

std::string_view to_string(StrategyKind kind);
StrategyKind strategy_from_string(const std::string& s);  // throws invalid_argument

/// A parameter assignment going out to a run.
struct Suggestion {
    std::string suggestion_id;
    Assignment assignment;
    StrategyKind strategy = StrategyKind::random;
    std::uint64_t sequence_index = 0;
};

/// The result of evaluating one suggestion: a metric value or a failure,
/// never both. Values are maximized.
struct Observation {
    std::string suggestion_id;
    std::uint64_t sequence_index = 0;
    Assignment assignment;
    std::optional<double> value;
    bool failed = false;
    std::string run_id;
    Timestamp reported_at = 0;

    static Observation success(std::string suggestion_id, std::uint64_t index, Assignment a, double value,
                               std::string run_id = {}) {
        return {std::move(suggestion_id), index, std::move(a), value, false, std::move(run_id), now_us()};
    }
    static Observation failure(std::string suggestion_id, std::uint64_t index, Assignment a,
                               std::string run_id = {}) {
        return {std::move(suggestion_id), index, std::move(a), std::nullopt, true, std::move(run_id), now_us()};
    }

    bool succeeded() const noexcept { return !failed && value.has_value(); }
    bool well_formed() const noexcept { return value.has_value() != failed; }
};

struct BestSeen {
    Assignment assignment;
    double value = 0.0;
};

}  // namespace orchestrate::optimizer
