#include "orchestrate/optimizer/strategy.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "orchestrate/error.hpp"
#include "orchestrate/json_fields.hpp"
#include "orchestrate/optimizer/rng.hpp"

namespace orchestrate::optimizer {

namespace jf = json_fields;
using nlohmann::json;

std::string_view to_string(StrategyKind kind) {
    switch (kind) {
        case StrategyKind::random: return "random";
        case StrategyKind::grid: return "grid";
        case StrategyKind::evolutionary: return "evolutionary";
    }
    return "?";
}

StrategyKind strategy_from_string(const std::string& s) {
    if (s == "random") return StrategyKind::random;
    if (s == "grid") return StrategyKind::grid;
    if (s == "evolutionary") return StrategyKind::evolutionary;
    throw Error(ErrorKind::invalid_argument, "unknown strategy '" + s + "' (expected random, grid or evolutionary)",
                "strategy");
}

json to_json(const StrategyOptions& o) {
    return {{"kind", std::string(to_string(o.kind))},
            {"seed", o.seed},
            {"population_size", o.population_size},
            {"mutation_scale", o.mutation_scale},
            {"categorical_mutation_probability", o.categorical_mutation_probability},
            {"grid_cap", o.grid_cap}};
}

StrategyOptions parse_strategy_options(const json& config) {
    StrategyOptions o;
    if (const json* s = jf::optional(config, "strategy")) o.kind = strategy_from_string(jf::as_string(*s, "strategy"));
    if (const json* seed = jf::optional(config, "seed")) {
        const long long v = jf::as_integer(*seed, "seed");
        if (v < 0) jf::fail("seed", "seed must be non-negative");
        o.seed = static_cast<std::uint64_t>(v);
    }
    if (const json* evo = jf::optional(config, "evolutionary")) {
        if (const json* mu = jf::optional(*evo, "population_size")) {
            o.population_size = static_cast<int>(jf::as_integer(*mu, "evolutionary.population_size"));
            if (o.population_size < 1) jf::fail("evolutionary.population_size", "must be at least 1");
        }
        if (const json* sigma = jf::optional(*evo, "mutation_scale")) {
            o.mutation_scale = jf::as_number(*sigma, "evolutionary.mutation_scale");
            if (!(o.mutation_scale > 0.0)) jf::fail("evolutionary.mutation_scale", "must be positive");
        }
        if (const json* p = jf::optional(*evo, "categorical_mutation_probability")) {
            o.categorical_mutation_probability = jf::as_number(*p, "evolutionary.categorical_mutation_probability");
            if (o.categorical_mutation_probability < 0.0 || o.categorical_mutation_probability > 1.0)
                jf::fail("evolutionary.categorical_mutation_probability", "must be within [0, 1]");
        }
    }
    return o;
}

namespace {

// Coordinates on the sampling scale.
double to_scale(const ParameterDef& p, double x) { return p.scale == Scale::log ? std::log10(x) : x; }
double from_scale(const ParameterDef& p, double t) { return p.scale == Scale::log ? std::pow(10.0, t) : t; }

std::vector<ParamValue> grid_axis(const ParameterDef& p) {
    std::vector<ParamValue> axis;
    if (p.kind == ParameterKind::categorical) {
        for (const auto& v : p.values) axis.emplace_back(v);
        return axis;
    }
    const int n = p.grid_count.value_or(kDefaultGridCount);
    if (p.kind == ParameterKind::real) {
        const double lo = to_scale(p, p.min);
        const double hi = to_scale(p, p.max);
        for (int k = 0; k < n; ++k) {
            double x;
            if (k == 0) x = p.min;
            else if (k == n - 1) x = p.max;
            else x = from_scale(p, lo + (hi - lo) * k / (n - 1));
            axis.emplace_back(x);
        }
        return axis;
    }
    for (int k = 0; k < n; ++k) {
        const double x = n == 1 ? p.min : p.min + (p.max - p.min) * k / (n - 1);
        const auto v = static_cast<std::int64_t>(std::llround(x));
        if (axis.empty() || std::get<std::int64_t>(axis.back()) != v) axis.emplace_back(v);
    }
    return axis;
}

std::string suggestion_id_for(const std::string& experiment_id, std::uint64_t index) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "-s%04llu", static_cast<unsigned long long>(index));
    return experiment_id + buf;
}

}  // namespace

std::size_t grid_size(const ParameterSpace& space) {
    std::size_t total = 1;
    for (const auto& p : space.params()) {
        const std::size_t n = grid_axis(p).size();
        if (total > std::numeric_limits<std::size_t>::max() / n) return std::numeric_limits<std::size_t>::max();
        total *= n;
    }
    return total;
}

std::vector<Assignment> grid_enumerate(const ParameterSpace& space, std::size_t cap) {
    std::vector<std::vector<ParamValue>> axes;
    std::size_t total = 1;
    for (const auto& p : space.params()) {
        axes.push_back(grid_axis(p));
        total *= axes.back().size();
        if (total > cap) {
            throw Error(ErrorKind::invalid_argument,
                        "grid has more than " + std::to_string(cap) + " points", "parameters");
        }
    }
    std::vector<Assignment> out;
    out.reserve(total);
    std::vector<std::size_t> digit(axes.size(), 0);
    for (std::size_t n = 0; n < total; ++n) {
        Assignment a;
        for (std::size_t i = 0; i < axes.size(); ++i) a[space.params()[i].name] = axes[i][digit[i]];
        out.push_back(std::move(a));
        // Odometer increment, last parameter fastest.
        for (std::size_t i = axes.size(); i-- > 0;) {
            if (++digit[i] < axes[i].size()) break;
            digit[i] = 0;
        }
    }
    return out;
}

Assignment sample_random(const ParameterSpace& space, std::uint64_t seed, std::uint64_t index) {
    CounterRng rng(seed, index);
    Assignment a;
    for (const auto& p : space.params()) {
        const double u = rng.uniform();
        switch (p.kind) {
            case ParameterKind::real: {
                const double lo = to_scale(p, p.min);
                const double hi = to_scale(p, p.max);
                a[p.name] = std::clamp(from_scale(p, lo + u * (hi - lo)), p.min, p.max);
                break;
            }
            case ParameterKind::integer: {
                const auto span = static_cast<std::uint64_t>(p.max - p.min) + 1;
                const auto k = std::min(static_cast<std::uint64_t>(u * static_cast<double>(span)), span - 1);
                a[p.name] = static_cast<std::int64_t>(p.min) + static_cast<std::int64_t>(k);
                break;
            }
            case ParameterKind::categorical: {
                const auto k = std::min(static_cast<std::size_t>(u * static_cast<double>(p.values.size())),
                                        p.values.size() - 1);
                a[p.name] = p.values[k];
                break;
            }
        }
    }
    return a;
}

Assignment mutate(const Assignment& parent, const ParameterSpace& space, const StrategyOptions& options,
                  std::uint64_t seed, std::uint64_t index) {
    CounterRng rng(seed, index);
    Assignment child;
    for (const auto& p : space.params()) {
        const ParamValue& pv = parent.at(p.name);
        switch (p.kind) {
            case ParameterKind::real: {
                const double lo = to_scale(p, p.min);
                const double hi = to_scale(p, p.max);
                const double sigma = options.mutation_scale * (hi - lo);
                const double t = std::clamp(to_scale(p, std::get<double>(pv)) + sigma * rng.normal(), lo, hi);
                child[p.name] = std::clamp(from_scale(p, t), p.min, p.max);
                break;
            }
            case ParameterKind::integer: {
                const double sigma = options.mutation_scale * (p.max - p.min);
                const double x = static_cast<double>(std::get<std::int64_t>(pv)) + sigma * rng.normal();
                child[p.name] = static_cast<std::int64_t>(std::clamp(std::round(x), p.min, p.max));
                break;
            }
            case ParameterKind::categorical: {
                if (rng.uniform() < options.categorical_mutation_probability) {
                    child[p.name] = p.values[rng.below(p.values.size())];
                } else {
                    child[p.name] = pv;
                }
                break;
            }
        }
    }
    return child;
}

StrategyState::StrategyState(std::string experiment_id, StrategyOptions options, std::size_t observation_budget)
    : experiment_id_(std::move(experiment_id)), options_(options), budget_(observation_budget) {}

std::uint64_t StrategyState::next_free_index() {
    std::set<std::uint64_t> open_indices;
    for (const auto& [id, idx] : open_) open_indices.insert(idx);
    while (observed_.contains(cursor_) || open_indices.contains(cursor_)) ++cursor_;
    return cursor_;
}

void StrategyState::offer_to_population(const Assignment& a, double value, std::uint64_t index) {
    const auto mu = static_cast<std::size_t>(options_.population_size);
    if (population_.size() >= mu && value <= population_.back().value) return;
    // Upper bound keeps earlier members ahead of later equal values.
    auto pos = std::upper_bound(population_.begin(), population_.end(), value,
                                [](double v, const PopulationMember& m) { return v > m.value; });
    population_.insert(pos, PopulationMember{a, value, index});
    if (population_.size() > mu) population_.pop_back();
}

void StrategyState::restore(std::span<const Observation> history) {
    open_.clear();
    observed_.clear();
    population_.clear();
    cursor_ = 0;
    for (const auto& obs : history) {
        observed_.insert(obs.sequence_index);
        if (obs.succeeded()) offer_to_population(obs.assignment, *obs.value, obs.sequence_index);
    }
    issued_ = observed_.size();
}

std::optional<Suggestion> suggest(StrategyState& state, const ParameterSpace& space) {
    if (state.observed_.size() + state.open_.size() >= state.budget_) return std::nullopt;
    const std::uint64_t index = state.next_free_index();
    const StrategyOptions& o = state.options_;

    Assignment assignment;
    switch (o.kind) {
        case StrategyKind::random:
            assignment = sample_random(space, o.seed, index);
            break;
        case StrategyKind::grid:
            if (!state.grid_) state.grid_ = grid_enumerate(space, o.grid_cap);
            if (index >= state.grid_->size()) return std::nullopt;
            assignment = (*state.grid_)[index];
            break;
        case StrategyKind::evolutionary:
            if (state.population_.size() < static_cast<std::size_t>(o.population_size)) {
                assignment = sample_random(space, o.seed, index);
            } else {
                // Parent choice draws from its own (seed, index)-keyed stream.
                CounterRng pick(o.seed ^ 0x9e3779b97f4a7c15ULL, index);
                const auto& parent = state.population_[pick.below(state.population_.size())];
                assignment = mutate(parent.assignment, space, o, o.seed, index);
            }
            break;
    }

    Suggestion s{suggestion_id_for(state.experiment_id_, index), std::move(assignment), o.kind, index};
    state.open_.emplace(s.suggestion_id, index);
    ++state.issued_;
    return s;
}

void ingest_observation(StrategyState& state, const Observation& obs) {
    auto it = state.open_.find(obs.suggestion_id);
    if (it == state.open_.end()) {
        throw Error(ErrorKind::invalid_argument, "suggestion '" + obs.suggestion_id + "' is not open");
    }
    state.observed_.insert(it->second);
    state.open_.erase(it);
    if (obs.succeeded()) state.offer_to_population(obs.assignment, *obs.value, obs.sequence_index);
}

void withdraw_suggestion(StrategyState& state, const std::string& suggestion_id) {
    state.open_.erase(suggestion_id);
}

std::optional<BestSeen> best_assignment(std::span<const Observation> observations) {
    std::optional<BestSeen> best;
    for (const auto& obs : observations) {
        if (!obs.succeeded()) continue;
        if (!best || *obs.value > best->value) best = BestSeen{obs.assignment, *obs.value};
    }
    return best;
}

std::vector<std::optional<double>> best_trace(std::span<const Observation> observations) {
    std::vector<std::optional<double>> trace;
    trace.reserve(observations.size());
    std::optional<double> best;
    for (const auto& obs : observations) {
        if (obs.succeeded() && (!best || *obs.value > *best)) best = obs.value;
        trace.push_back(best);
    }
    return trace;
}

}  // namespace orchestrate::optimizer
