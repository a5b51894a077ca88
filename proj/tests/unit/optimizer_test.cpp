#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "orchestrate/error.hpp"
#include "orchestrate/optimizer/strategy.hpp"

namespace {

using namespace orchestrate;
using namespace orchestrate::optimizer;

ParameterDef real(std::string name, double lo, double hi, Scale scale = Scale::linear,
                  std::optional<int> grid = std::nullopt) {
    ParameterDef p;
    p.name = std::move(name);
    p.kind = ParameterKind::real;
    p.min = lo;
    p.max = hi;
    p.scale = scale;
    p.grid_count = grid;
    return p;
}

ParameterDef integer(std::string name, double lo, double hi, std::optional<int> grid = std::nullopt) {
    ParameterDef p = real(std::move(name), lo, hi, Scale::linear, grid);
    p.kind = ParameterKind::integer;
    return p;
}

ParameterDef categorical(std::string name, std::vector<std::string> values) {
    ParameterDef p;
    p.name = std::move(name);
    p.kind = ParameterKind::categorical;
    p.values = std::move(values);
    return p;
}

double x_of(const Assignment& a, const std::string& name = "x") { return std::get<double>(a.at(name)); }

// Random search over x in [0, 1] against f(x) = -(x - 0.3)^2.
std::vector<Observation> run_quadratic(StrategyKind kind, std::uint64_t seed, std::size_t budget, int mu = 5) {
    const ParameterSpace space = validate_space({real("x", 0.0, 1.0)});
    StrategyOptions o;
    o.kind = kind;
    o.seed = seed;
    o.population_size = mu;
    StrategyState state("exp", o, budget);
    std::vector<Observation> history;
    while (auto s = suggest(state, space)) {
        const double x = x_of(s->assignment);
        auto obs = Observation::success(s->suggestion_id, s->sequence_index, s->assignment, -(x - 0.3) * (x - 0.3));
        ingest_observation(state, obs);
        history.push_back(obs);
    }
    return history;
}

TEST(ValidateSpace, AcceptsLinearAndLogDoubles) {
    EXPECT_NO_THROW(validate_space({real("x", 0.0, 1.0)}));
    EXPECT_NO_THROW(validate_space({real("lr", 1e-4, 1e-1, Scale::log)}));
}

TEST(ValidateSpace, RejectsDegenerateBounds) {
    try {
        validate_space({real("x", 1.0, 1.0)});
        FAIL() << "expected an error";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::invalid_argument);
        EXPECT_EQ(e.bare_message(), "min must be < max");
        EXPECT_EQ(e.field(), "parameters[0].bounds");
    }
}

TEST(ValidateSpace, RejectsDuplicatesLogNonPositiveAndEmptyCategorical) {
    EXPECT_THROW(validate_space({real("x", 0, 1), real("x", 0, 2)}), Error);
    EXPECT_THROW(validate_space({real("lr", 0.0, 1.0, Scale::log)}), Error);
    EXPECT_THROW(validate_space({categorical("opt", {})}), Error);
    EXPECT_THROW(validate_space({integer("n", 1.5, 4)}), Error);
}

TEST(ParseSpace, ReportsFieldPaths) {
    auto j = nlohmann::json::parse(R"([{"name":"x","type":"double","bounds":{"min":0,"max":1}},
                                       {"name":"y","type":"double","bounds":{"min":0}}])");
    try {
        parse_space(j);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.field(), "parameters[1].bounds.max");
    }
}

TEST(GridEnumerate, LinearDoubleEndpointsAndMidpoint) {
    auto grid = grid_enumerate(validate_space({real("x", 0.0, 1.0, Scale::linear, 3)}));
    ASSERT_EQ(grid.size(), 3u);
    EXPECT_EQ(x_of(grid[0]), 0.0);
    EXPECT_EQ(x_of(grid[1]), 0.5);
    EXPECT_EQ(x_of(grid[2]), 1.0);
}

TEST(GridEnumerate, LogDoubleIsEvenInLog10) {
    auto grid = grid_enumerate(validate_space({real("lr", 1e-4, 1e-1, Scale::log, 4)}));
    ASSERT_EQ(grid.size(), 4u);
    const double expected[] = {1e-4, 1e-3, 1e-2, 1e-1};
    for (int i = 0; i < 4; ++i) EXPECT_NEAR(x_of(grid[i], "lr") / expected[i], 1.0, 1e-12);
    // Successive ratios are equal: even spacing in log space.
    for (int i = 1; i < 4; ++i) EXPECT_NEAR(x_of(grid[i], "lr") / x_of(grid[i - 1], "lr"), 10.0, 1e-9);
}

TEST(GridEnumerate, IntegerGridDeduplicates) {
    auto grid = grid_enumerate(validate_space({integer("n", 1, 2, 5)}));
    ASSERT_EQ(grid.size(), 2u);
    EXPECT_EQ(std::get<std::int64_t>(grid[0].at("n")), 1);
    EXPECT_EQ(std::get<std::int64_t>(grid[1].at("n")), 2);
}

TEST(GridEnumerate, LastParameterVariesFastest) {
    auto grid = grid_enumerate(validate_space({real("x", 0, 1, Scale::linear, 2), categorical("y", {"a", "b"})}));
    ASSERT_EQ(grid.size(), 4u);
    const std::vector<std::pair<double, std::string>> expected = {{0, "a"}, {0, "b"}, {1, "a"}, {1, "b"}};
    for (std::size_t i = 0; i < 4; ++i) {
        EXPECT_EQ(x_of(grid[i]), expected[i].first);
        EXPECT_EQ(std::get<std::string>(grid[i].at("y")), expected[i].second);
    }
}

TEST(GridEnumerate, CapIsEnforced) {
    auto space = validate_space({integer("a", 0, 1000, 200), integer("b", 0, 1000, 200)});
    EXPECT_THROW(grid_enumerate(space), Error);
    EXPECT_EQ(grid_enumerate(space, 40'000).size(), 40'000u);
}

TEST(GridStrategy, SuggestsEnumerationThenExhausts) {
    auto space = validate_space({real("x", 0, 1, Scale::linear, 2), categorical("y", {"a", "b"})});
    StrategyOptions o;
    o.kind = StrategyKind::grid;
    StrategyState state("e", o, 100);
    std::vector<Assignment> got;
    while (auto s = suggest(state, space)) got.push_back(s->assignment);
    EXPECT_EQ(got, grid_enumerate(space));
}

TEST(RandomStrategy, SameIndexSameAssignment) {
    auto space = validate_space({real("x", 0, 1), integer("n", 1, 10), categorical("c", {"a", "b", "c"})});
    EXPECT_EQ(sample_random(space, 11, 5), sample_random(space, 11, 5));
    EXPECT_NE(sample_random(space, 11, 5), sample_random(space, 11, 6));
}

TEST(RandomStrategy, LogScaleIsLogUniform) {
    auto space = validate_space({real("lr", 1e-4, 1e-1, Scale::log)});
    int low_decade = 0;
    for (std::uint64_t i = 0; i < 1000; ++i) {
        const double lr = x_of(sample_random(space, 3, i), "lr");
        ASSERT_GE(lr, 1e-4);
        ASSERT_LE(lr, 1e-1);
        if (lr <= 1e-3) ++low_decade;
    }
    EXPECT_NEAR(low_decade / 1000.0, 1.0 / 3.0, 0.05);
}

// Values produced by tests/oracles/random_search_golden.py (seed 42, budget 100).
TEST(RandomStrategy, MatchesOfflineOracle) {
    auto space = validate_space({real("x", 0, 1)});
    EXPECT_DOUBLE_EQ(x_of(sample_random(space, 42, 0)), 0.48972255042353174);
    EXPECT_DOUBLE_EQ(x_of(sample_random(space, 42, 1)), 0.8379890331048921);
    EXPECT_DOUBLE_EQ(x_of(sample_random(space, 42, 2)), 0.04620208104708445);

    auto history = run_quadratic(StrategyKind::random, 42, 100);
    ASSERT_EQ(history.size(), 100u);
    auto best = best_assignment(history);
    ASSERT_TRUE(best);
    EXPECT_DOUBLE_EQ(x_of(best->assignment), 0.3029301318462765);
    EXPECT_DOUBLE_EQ(best->value, -8.585672636563706e-06);
    EXPECT_NEAR(x_of(best->assignment), 0.3, 0.05);
}

TEST(RandomStrategy, CompletionOrderDoesNotChangeSuggestions) {
    auto space = validate_space({real("x", 0, 1), integer("n", 0, 9)});
    StrategyOptions o;
    o.seed = 9;
    std::mt19937_64 shuffle_rng(1);
    std::multiset<std::string> reference;
    for (int trial = 0; trial < 20; ++trial) {
        StrategyState state("e", o, 40);
        std::vector<Suggestion> open;
        std::multiset<std::string> seen;
        while (true) {
            while (open.size() < 4) {
                auto s = suggest(state, space);
                if (!s) break;
                seen.insert(format_assignment(s->assignment));
                open.push_back(*s);
            }
            if (open.empty()) break;
            std::shuffle(open.begin(), open.end(), shuffle_rng);
            auto s = open.back();
            open.pop_back();
            ingest_observation(state, Observation::success(s.suggestion_id, s.sequence_index, s.assignment, 1.0));
        }
        if (trial == 0) reference = seen;
        EXPECT_EQ(seen, reference);
        EXPECT_EQ(seen.size(), 40u);
    }
}

TEST(EvolutionaryStrategy, OffspringStayInBounds) {
    auto space = validate_space({real("x", 0, 1)});
    StrategyOptions o;
    o.kind = StrategyKind::evolutionary;
    o.population_size = 1;
    Assignment parent{{"x", 0.5}};
    for (std::uint64_t i = 0; i < 2000; ++i) {
        const double x = x_of(mutate(parent, space, o, 5, i));
        EXPECT_GE(x, 0.0);
        EXPECT_LE(x, 1.0);
    }
    // Sigma of 0.1 puts some offspring well away from the parent.
    double spread = 0;
    for (std::uint64_t i = 0; i < 2000; ++i) spread += std::abs(x_of(mutate(parent, space, o, 5, i)) - 0.5);
    EXPECT_NEAR(spread / 2000, 0.1 * std::sqrt(2.0 / M_PI), 0.01);
}

TEST(EvolutionaryStrategy, PopulationKeepsTopMu) {
    auto space = validate_space({real("x", 0, 1)});
    StrategyOptions o;
    o.kind = StrategyKind::evolutionary;
    o.population_size = 2;
    StrategyState state("e", o, 10);
    std::vector<Suggestion> s;
    for (int i = 0; i < 5; ++i) s.push_back(*suggest(state, space));

    ingest_observation(state, Observation::success(s[0].suggestion_id, 0, s[0].assignment, 0.5));
    ingest_observation(state, Observation::failure(s[1].suggestion_id, 1, s[1].assignment));
    EXPECT_EQ(state.population().size(), 1u);  // failures never enter
    ingest_observation(state, Observation::success(s[2].suggestion_id, 2, s[2].assignment, 0.2));
    ASSERT_EQ(state.population().size(), 2u);
    ingest_observation(state, Observation::success(s[3].suggestion_id, 3, s[3].assignment, 0.9));
    ASSERT_EQ(state.population().size(), 2u);
    EXPECT_EQ(state.population()[0].value, 0.9);
    EXPECT_EQ(state.population()[1].value, 0.5);  // 0.2 evicted
    ingest_observation(state, Observation::success(s[4].suggestion_id, 4, s[4].assignment, 0.1));
    EXPECT_EQ(state.population()[1].value, 0.5);  // below minimum: unchanged

    EXPECT_THROW(ingest_observation(state, Observation::success(s[4].suggestion_id, 4, s[4].assignment, 0.1)), Error);
    EXPECT_THROW(ingest_observation(state, Observation::success("bogus", 9, s[4].assignment, 0.1)), Error);
}

TEST(EvolutionaryStrategy, BehavesAsRandomUntilPopulationFull) {
    auto space = validate_space({real("x", 0, 1)});
    StrategyOptions o;
    o.kind = StrategyKind::evolutionary;
    o.seed = 4;
    StrategyState state("e", o, 10);
    for (std::uint64_t i = 0; i < 5; ++i) EXPECT_EQ(suggest(state, space)->assignment, sample_random(space, 4, i));
}

TEST(BestAssignment, TiesGoToEarliestAndFailuresAreIgnored) {
    std::vector<Observation> obs = {
        Observation::failure("a", 0, {{"x", 0.2}}),
        Observation::success("b", 1, {{"x", 0.4}}, 0.9),
        Observation::success("c", 2, {{"x", 0.6}}, 0.9),
    };
    auto best = best_assignment(obs);
    ASSERT_TRUE(best);
    EXPECT_EQ(x_of(best->assignment), 0.4);

    std::vector<Observation> failed = {Observation::failure("a", 0, {{"x", 0.2}})};
    EXPECT_FALSE(best_assignment(failed));
}

TEST(BestTrace, RunningMax) {
    std::vector<Observation> obs = {
        Observation::success("a", 0, {}, 0.5),
        Observation::success("b", 1, {}, 0.3),
        Observation::success("c", 2, {}, 0.9),
    };
    auto trace = best_trace(obs);
    EXPECT_EQ(trace, (std::vector<std::optional<double>>{0.5, 0.5, 0.9}));
}

// --- property tests over randomly generated spaces -------------------------

ParameterSpace random_space(std::mt19937_64& rng) {
    std::uniform_int_distribution<int> count(1, 4), kind(0, 3), grid(1, 4);
    std::uniform_real_distribution<double> lo(-5, 5), width(1e-3, 10), expo(-6, 0);
    std::vector<ParameterDef> defs;
    const int n = count(rng);
    for (int i = 0; i < n; ++i) {
        const std::string name = "p" + std::to_string(i);
        switch (kind(rng)) {
            case 0: { double a = lo(rng); defs.push_back(real(name, a, a + width(rng), Scale::linear, grid(rng))); break; }
            case 1: { double a = std::pow(10, expo(rng)); defs.push_back(real(name, a, a * (1 + width(rng)), Scale::log, grid(rng))); break; }
            case 2: { int a = static_cast<int>(lo(rng)); defs.push_back(integer(name, a, a + 1 + static_cast<int>(width(rng)), grid(rng))); break; }
            default: {
                std::vector<std::string> values;
                for (int k = 0; k < grid(rng); ++k) values.push_back("v" + std::to_string(k));
                defs.push_back(categorical(name, values));
            }
        }
    }
    return validate_space(defs);
}

TEST(StrategyProperties, SuggestionsStayInBoundsForAllStrategies) {
    std::mt19937_64 rng(2024);
    for (int trial = 0; trial < 1000; ++trial) {
        const ParameterSpace space = random_space(rng);
        for (auto kind : {StrategyKind::random, StrategyKind::grid, StrategyKind::evolutionary}) {
            StrategyOptions o;
            o.kind = kind;
            o.seed = rng();
            o.population_size = 2;
            StrategyState state("e", o, 12);
            std::uniform_real_distribution<double> value(-1, 1);
            while (auto s = suggest(state, space)) {
                ASSERT_TRUE(space.contains(s->assignment)) << format_assignment(s->assignment);
                ingest_observation(state, Observation::success(s->suggestion_id, s->sequence_index, s->assignment,
                                                               value(rng)));
            }
        }
    }
}

TEST(StrategyProperties, GridSuggestionsEqualEnumerationWithoutRepeats) {
    std::mt19937_64 rng(77);
    for (int trial = 0; trial < 200; ++trial) {
        const ParameterSpace space = random_space(rng);
        const auto grid = grid_enumerate(space);
        StrategyOptions o;
        o.kind = StrategyKind::grid;
        StrategyState state("e", o, grid.size() + 5);
        std::vector<Assignment> got;
        while (auto s = suggest(state, space)) got.push_back(s->assignment);
        EXPECT_EQ(got, grid);
        std::set<std::string> distinct;
        for (const auto& a : got) distinct.insert(format_assignment(a));
        EXPECT_EQ(distinct.size(), got.size());
    }
}

TEST(StrategyProperties, BestTraceNeverDecreases) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> value(-10, 10);
    std::bernoulli_distribution fails(0.2);
    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<Observation> obs;
        for (int i = 0; i < 30; ++i) {
            obs.push_back(fails(rng) ? Observation::failure("s", i, {}) : Observation::success("s", i, {}, value(rng)));
        }
        auto trace = best_trace(obs);
        for (std::size_t i = 1; i < trace.size(); ++i) {
            if (trace[i - 1]) {
                ASSERT_TRUE(trace[i]);
                ASSERT_GE(*trace[i], *trace[i - 1]);
            }
        }
    }
}

TEST(StrategyProperties, RestoreReissuesUnobservedIndices) {
    auto space = validate_space({real("x", 0, 1)});
    StrategyOptions o;
    o.seed = 3;
    StrategyState first("e", o, 6);
    std::vector<Suggestion> s;
    for (int i = 0; i < 4; ++i) s.push_back(*suggest(first, space));
    std::vector<Observation> history = {
        Observation::success(s[0].suggestion_id, 0, s[0].assignment, 0.1),
        Observation::success(s[2].suggestion_id, 2, s[2].assignment, 0.2),
    };
    StrategyState resumed("e", o, 6);
    resumed.restore(history);
    EXPECT_EQ(suggest(resumed, space)->sequence_index, 1u);
    EXPECT_EQ(suggest(resumed, space)->sequence_index, 3u);
    EXPECT_EQ(suggest(resumed, space)->sequence_index, 4u);
    EXPECT_EQ(suggest(resumed, space)->sequence_index, 5u);
    EXPECT_FALSE(suggest(resumed, space));  // 2 observed + 4 open = budget
}

// Weak statistical comparison, recorded rather than gated.
TEST(StrategyStatistics, EvolutionaryVersusRandomOnQuadratic) {
    int evolutionary_wins = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        auto evo = best_assignment(run_quadratic(StrategyKind::evolutionary, seed, 60, 5));
        auto rnd = best_assignment(run_quadratic(StrategyKind::random, seed, 60, 5));
        if (evo->value >= rnd->value) ++evolutionary_wins;
    }
    RecordProperty("evolutionary_wins_of_100", evolutionary_wins);
    std::cout << "evolutionary best >= random best for " << evolutionary_wins << "/100 seeds\n";
}

}  // namespace
