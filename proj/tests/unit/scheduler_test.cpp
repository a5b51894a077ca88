#include <gtest/gtest.h>

#include <functional>
#include <random>

#include "orchestrate/error.hpp"
#include "orchestrate/scheduler/scheduler.hpp"
#include "placement_oracle.hpp"
#include "test_support.hpp"

namespace {

using namespace orchestrate;
using namespace orchestrate::scheduler;
using executor::Outcome;
using provider::ClusterState;
using provider::PoolKind;
using orchestrate::testing::make_cluster;
using orchestrate::testing::make_experiment;
using orchestrate::testing::TempDir;
using orchestrate::testing::oracle_first_fit;
using orchestrate::testing::random_scenario;
using orchestrate::testing::Scenario;

QueuedRun q(const std::string& exp, int i, int gpus, int cpus = 1) {
    return {exp + "-r" + std::to_string(i), exp, {gpus, cpus}};
}

optimizer::Suggestion sugg(const std::string& exp, int i) {
    return {exp + "-s" + std::to_string(i), {{"x", 0.1 * i}}, optimizer::StrategyKind::random,
            static_cast<std::uint64_t>(i)};
}

// Maximum number of runs placeable, by exhaustive search over every
// run -> {node, unplaced} mapping.
int brute_force_max(const ClusterState& cluster, const std::vector<QueuedRun>& runs) {
    const auto nodes = cluster.nodes();
    std::vector<int> cpus, gpus;
    for (const auto* n : nodes) {
        cpus.push_back(n->free_cpus());
        gpus.push_back(n->free_gpus());
    }
    int best = 0;
    std::function<void(std::size_t, int)> go = [&](std::size_t i, int placed) {
        if (placed + static_cast<int>(runs.size() - i) <= best) return;
        if (i == runs.size()) {
            best = std::max(best, placed);
            return;
        }
        for (std::size_t k = 0; k < nodes.size(); ++k) {
            if (runs[i].request.cpus <= cpus[k] && runs[i].request.gpus <= gpus[k]) {
                cpus[k] -= runs[i].request.cpus;
                gpus[k] -= runs[i].request.gpus;
                go(i + 1, placed + 1);
                cpus[k] += runs[i].request.cpus;
                gpus[k] += runs[i].request.gpus;
            }
        }
        go(i + 1, placed);
    };
    go(0, 0);
    return best;
}

TEST(PlaceQueued, FiveFourGpuRunsOnTwoNodesPlacesTwo) {
    const auto c = make_cluster({{PoolKind::gpu, "p3.8xlarge", 2}});
    PlacementProblem p;
    for (int i = 0; i < 5; ++i) p.queue.push_back(q("A", i, 4));
    const auto placed = place_queued(c, p);
    EXPECT_EQ(brute_force_max(c, p.queue), 2);
    ASSERT_EQ(placed.size(), 2u);
    EXPECT_NE(placed[0].node_id, placed[1].node_id);
}

TEST(PlaceQueued, CpuOnlyRunPrefersCpuNode) {
    const auto c = make_cluster({{PoolKind::gpu, "p3.8xlarge", 1}, {PoolKind::cpu, "c4.xlarge", 1}});
    PlacementProblem p;
    p.queue.push_back(q("A", 0, 0));
    const auto placed = place_queued(c, p);
    ASSERT_EQ(placed.size(), 1u);
    EXPECT_EQ(placed[0].node_id, "cpu-000");
}

TEST(PlaceQueued, CpuOnlyRunFallsBackToGpuNode) {
    auto c = make_cluster({{PoolKind::gpu, "p3.8xlarge", 1}, {PoolKind::cpu, "c4.xlarge", 1}});
    c.allocate("cpu-000", "busy", {0, 4});
    PlacementProblem p;
    p.queue.push_back(q("A", 0, 0));
    const auto placed = place_queued(c, p);
    ASSERT_EQ(placed.size(), 1u);
    EXPECT_EQ(placed[0].node_id, "gpu-000");
}

TEST(PlaceQueued, EmptyQueue) {
    const auto c = make_cluster({{PoolKind::gpu, "p3.8xlarge", 2}});
    EXPECT_TRUE(place_queued(c, {}).empty());
}

TEST(PlaceQueued, RoundRobinSharesGpusAcrossExperiments) {
    const auto c = make_cluster({{PoolKind::gpu, "p3.8xlarge", 1}});
    PlacementProblem p;
    p.experiment_order = {"A", "B"};
    for (int i = 0; i < 4; ++i) p.queue.push_back(q("A", i, 1));
    for (int i = 0; i < 4; ++i) p.queue.push_back(q("B", i, 1));
    const auto placed = place_queued(c, p);
    std::map<std::string, int> per;
    for (const auto& pl : placed) per[pl.run_id.substr(0, 1)]++;
    EXPECT_EQ(per["A"], 2);
    EXPECT_EQ(per["B"], 2);
    // Enumeration of the fairness order: A0 B0 A1 B1 A2 B2 ...
    const auto order = fairness_order(p);
    std::vector<std::string> ids;
    for (const auto* r : order) ids.push_back(r->run_id);
    EXPECT_EQ(ids, (std::vector<std::string>{"A-r0", "B-r0", "A-r1", "B-r1", "A-r2", "B-r2", "A-r3", "B-r3"}));
}

TEST(PlaceQueued, BestFitFillsTightestNode) {
    auto c = make_cluster({{PoolKind::gpu, "p3.8xlarge", 2}});
    c.allocate("gpu-001", "busy", {3, 1});
    PlacementProblem p;
    p.queue.push_back(q("A", 0, 1));
    EXPECT_EQ(place_queued(c, p).at(0).node_id, "gpu-001");
}

TEST(PlaceQueued, SlotsCapPerExperiment) {
    const auto c = make_cluster({{PoolKind::gpu, "p3.16xlarge", 1}});
    PlacementProblem p;
    for (int i = 0; i < 5; ++i) p.queue.push_back(q("A", i, 1));
    p.slots["A"] = 2;
    EXPECT_EQ(place_queued(c, p).size(), 2u);
}

TEST(PlaceQueued, RandomizedSafetyDeterminismAndFirstFitBound) {
    std::mt19937_64 rng(20240601);
    for (int trial = 0; trial < 10000; ++trial) {
        const Scenario s = random_scenario(rng);
        const auto placed = place_queued(s.cluster, s.problem);
        ASSERT_EQ(placed, place_queued(s.cluster, s.problem)) << "trial " << trial;
        const ClusterState copy = s.cluster;
        ASSERT_EQ(placed, place_queued(copy, s.problem)) << "trial " << trial;

        ClusterState applied = s.cluster;
        std::map<std::string, int> per_exp;
        std::set<std::string> seen;
        for (const auto& p : placed) {
            ASSERT_TRUE(seen.insert(p.run_id).second);
            const auto it = std::find_if(s.problem.queue.begin(), s.problem.queue.end(),
                                         [&](const QueuedRun& r) { return r.run_id == p.run_id; });
            ASSERT_NE(it, s.problem.queue.end());
            const auto* node = applied.find_node(p.node_id);
            ASSERT_NE(node, nullptr);
            ASSERT_TRUE(node->fits(it->request)) << "capacity violation, trial " << trial;
            applied.allocate(p.node_id, p.run_id, it->request);
            per_exp[it->experiment_id]++;
        }
        ASSERT_EQ(applied.check_invariants(), "") << "trial " << trial;
        for (const auto& [e, n] : per_exp) {
            if (s.problem.slots.contains(e)) ASSERT_LE(n, s.problem.slots.at(e)) << "bandwidth, trial " << trial;
        }
        const std::size_t ff = oracle_first_fit(s.cluster, s.problem);
        ASSERT_EQ(first_fit_baseline(s.cluster, s.problem).size(), ff) << "trial " << trial;
        ASSERT_GE(placed.size(), ff) << "trial " << trial;
        // Liveness: something placeable means something placed.
        if (ff > 0) ASSERT_GE(placed.size(), 1u);
    }
}

TEST(Autoscale, GrowsFullPool) {
    auto c = make_cluster({{PoolKind::gpu, "p3.8xlarge", 1, 1, 2}});
    c.allocate("gpu-000", "busy", {4, 1});
    const auto d = autoscale_tick(c, {q("A", 0, 4)}, 0, 30'000'000);
    ASSERT_EQ(d.requests.size(), 1u);
    EXPECT_EQ(d.requests[0].pool, PoolKind::gpu);
    EXPECT_EQ(d.requests[0].delta, 1);
    EXPECT_TRUE(d.unschedulable.empty());
}

TEST(Autoscale, NoGrowthAtMax) {
    auto c = make_cluster({{PoolKind::gpu, "p3.8xlarge", 2}});
    c.allocate("gpu-000", "b0", {4, 1});
    c.allocate("gpu-001", "b1", {4, 1});
    EXPECT_TRUE(autoscale_tick(c, {q("A", 0, 4)}, 0, 30'000'000).requests.empty());
}

TEST(Autoscale, FixedPoolIgnoresIdleness) {
    const auto c = make_cluster({{PoolKind::gpu, "p3.8xlarge", 2}});
    EXPECT_TRUE(autoscale_tick(c, {}, 60'000'000, 30'000'000).requests.empty());
}

TEST(Autoscale, ShrinksIdlePoolAboveMin) {
    const auto c = make_cluster({{PoolKind::gpu, "p3.8xlarge", 2, 0, 2}});
    EXPECT_TRUE(autoscale_tick(c, {}, 10'000'000, 30'000'000).requests.empty());
    const auto d = autoscale_tick(c, {}, 60'000'000, 30'000'000);
    ASSERT_EQ(d.requests.size(), 1u);
    EXPECT_EQ(d.requests[0].delta, -1);
}

TEST(Autoscale, OversizedRunReportedUnschedulable) {
    const auto c = make_cluster({{PoolKind::gpu, "p3.8xlarge", 1, 1, 4}});
    const auto d = autoscale_tick(c, {q("A", 0, 8)}, 0, 30'000'000);
    EXPECT_TRUE(d.requests.empty());
    EXPECT_EQ(d.unschedulable, (std::vector<std::string>{"A-r0"}));
}

TEST(Autoscale, CpuRunGrowsCpuPool) {
    auto c = make_cluster({{PoolKind::gpu, "p3.8xlarge", 1, 1, 2}, {PoolKind::cpu, "c4.xlarge", 0, 0, 2}});
    c.allocate("gpu-000", "busy", {0, 32});
    const auto d = autoscale_tick(c, {q("A", 0, 0, 2)}, 0, 30'000'000);
    ASSERT_EQ(d.requests.size(), 1u);
    EXPECT_EQ(d.requests[0].pool, PoolKind::cpu);
}

TEST(RunStateMachine, LegalTransitionsOnly) {
    RunRecord r;
    r.run_id = "e-r0000";
    EXPECT_THROW(transition(r, RunState::running, 1), Error);
    transition(r, RunState::scheduled, 1);
    transition(r, RunState::running, 2);
    transition(r, RunState::succeeded, 3);
    EXPECT_EQ(r.duration_us(), 1);
    EXPECT_THROW(transition(r, RunState::killed, 4), Error);
    RunRecord k;
    transition(k, RunState::killed, 1);
    EXPECT_TRUE(is_terminal(k.state));
    EXPECT_EQ(r.short_id(), "r0000");
}

TEST(RunRecordJson, RoundTrips) {
    RunRecord r;
    r.run_id = make_run_id("exp", 7);
    r.experiment_id = "exp";
    r.index = 7;
    r.suggestion = sugg("exp", 7);
    r.request = {2, 3};
    r.node_id = "gpu-001";
    r.gpu_slots = {1, 3};
    r.state = RunState::failed;
    r.scheduled_at = 5;
    r.exit = RunExit{1, "exit status 1"};
    EXPECT_EQ(r.run_id, "exp-r0007");
    EXPECT_EQ(to_json(run_from_json(to_json(r))), to_json(r));
}

class SchedulerFixture : public ::testing::Test {
protected:
    TempDir dir;
    store::StateRoot root{dir.path()};

    Scheduler make(ClusterState c, const std::vector<std::pair<std::string, int>>& experiments) {
        Scheduler s(std::move(c), {}, dir / "runs.jsonl", &root);
        for (const auto& [id, bw] : experiments) {
            root.create_experiment(make_experiment(id, "test", 100, static_cast<std::size_t>(bw)));
            s.register_experiment(id, bw);
        }
        return s;
    }
};

TEST_F(SchedulerFixture, SubmitRejectsOversizedAndUnschedulable) {
    auto s = make(make_cluster({{PoolKind::cpu, "c4.xlarge", 2}}), {{"A", 4}});
    try {
        s.submit_run("A", sugg("A", 0), {16, 1});
        FAIL();
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("exceeds largest supported node"), std::string::npos);
    }
    try {
        s.submit_run("A", sugg("A", 0), {4, 1});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::unschedulable);
        EXPECT_NE(std::string(e.what()).find("unschedulable"), std::string::npos);
    }
    EXPECT_EQ(s.submit_run("A", sugg("A", 0), {0, 1}).state, RunState::queued);
}

TEST_F(SchedulerFixture, SubmitBeyondBandwidthIsInternalError) {
    auto s = make(make_cluster({{PoolKind::cpu, "c4.xlarge", 1}}), {{"A", 1}});
    s.submit_run("A", sugg("A", 0), {0, 1});
    try {
        s.submit_run("A", sugg("A", 1), {0, 1});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::internal);
    }
}

TEST_F(SchedulerFixture, CompletionReleasesAndRecords) {
    auto s = make(make_cluster({{PoolKind::gpu, "p3.8xlarge", 1}}), {{"A", 2}});
    const auto id0 = s.submit_run("A", sugg("A", 0), {2, 1}).run_id;
    const auto id1 = s.submit_run("A", sugg("A", 1), {1, 1}).run_id;
    ASSERT_EQ(s.schedule().size(), 2u);
    EXPECT_EQ(s.cluster().find_node("gpu-000")->allocated_gpus, 3);
    s.mark_running(id0);
    s.mark_running(id1);
    s.complete_run(id0, Outcome::succeeded(0.7));
    EXPECT_EQ(s.cluster().find_node("gpu-000")->allocated_gpus, 1);
    s.complete_run(id1, Outcome::failed("exit status 1", 1));
    EXPECT_EQ(s.cluster().find_node("gpu-000")->allocated_gpus, 0);
    const auto exp = root.load_experiment("A");
    ASSERT_EQ(exp.observations.size(), 2u);
    EXPECT_EQ(exp.observations[0].value, 0.7);
    EXPECT_TRUE(exp.observations[1].failed);
    EXPECT_EQ(s.run(id1).exit->code, 1);
    try {
        s.complete_run(id0, Outcome::succeeded(0.1));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::illegal_transition);
    }
}

TEST_F(SchedulerFixture, KillExperimentRunsIsIsolatedAndIdempotent) {
    auto s = make(make_cluster({{PoolKind::gpu, "p3.8xlarge", 1}}), {{"A", 5}, {"B", 1}});
    std::vector<std::string> a;
    const auto b = s.submit_run("B", sugg("B", 0), {1, 1}).run_id;
    for (int i = 0; i < 5; ++i) a.push_back(s.submit_run("A", sugg("A", i), {1, 1}).run_id);
    s.schedule();
    // B takes one GPU, A gets three; two A runs stay queued.
    for (const auto& id : a) {
        if (s.run(id).state == RunState::scheduled) s.mark_running(id);
    }
    s.mark_running(b);
    const auto c = s.counts("A");
    EXPECT_EQ(c.running, 3u);
    EXPECT_EQ(c.queued, 2u);
    EXPECT_EQ(s.kill_experiment_runs("A").size(), 5u);
    EXPECT_EQ(s.experiment_allocation("A"), (std::pair<int, int>{0, 0}));
    EXPECT_EQ(s.counts("A").killed, 5u);
    EXPECT_EQ(s.run(b).state, RunState::running);
    EXPECT_EQ(s.experiment_allocation("B"), (std::pair<int, int>{1, 1}));
    EXPECT_TRUE(s.kill_experiment_runs("A").empty());
    EXPECT_TRUE(root.load_experiment("A").observations.empty());
}

TEST_F(SchedulerFixture, BandwidthNeverExceededAcrossSchedules) {
    auto s = make(make_cluster({{PoolKind::gpu, "p3.16xlarge", 2}}), {{"A", 3}});
    int index = 0;
    std::mt19937 rng(5);
    for (int step = 0; step < 200; ++step) {
        while (s.counts("A").queued + s.counts("A").live() < 3) s.submit_run("A", sugg("A", index++), {1, 1});
        for (const auto& r : s.schedule()) s.mark_running(r.run_id);
        ASSERT_LE(s.counts("A").live(), 3u);
        for (const auto* r : s.experiment_runs("A")) {
            if (r->state == RunState::running && rng() % 2) {
                s.complete_run(r->run_id, Outcome::succeeded(0.5));
                break;
            }
        }
        ASSERT_EQ(s.cluster().check_invariants(), "");
    }
}

TEST_F(SchedulerFixture, AutoscaleAddsNodeForQueuedRun) {
    auto s = make(make_cluster({{PoolKind::gpu, "p3.8xlarge", 1, 1, 2}}), {{"A", 2}});
    s.submit_run("A", sugg("A", 0), {4, 1});
    s.submit_run("A", sugg("A", 1), {4, 1});
    EXPECT_EQ(s.schedule().size(), 1u);
    const auto d = s.autoscale();
    ASSERT_EQ(d.requests.size(), 1u);
    EXPECT_EQ(s.cluster().node_count(), 2);
    EXPECT_EQ(s.schedule().size(), 1u);
}

TEST_F(SchedulerFixture, JournalRestartKillsInterruptedRuns) {
    std::string done, live;
    {
        auto s = make(make_cluster({{PoolKind::gpu, "p3.8xlarge", 1}}), {{"A", 2}});
        done = s.submit_run("A", sugg("A", 0), {1, 1}).run_id;
        live = s.submit_run("A", sugg("A", 1), {1, 1}).run_id;
        s.schedule();
        s.mark_running(done);
        s.mark_running(live);
        s.complete_run(done, Outcome::succeeded(0.2));
    }
    auto cluster = make_cluster({{PoolKind::gpu, "p3.8xlarge", 1}});
    cluster.allocate("gpu-000", live, {1, 1});  // stale allocation
    Scheduler s(cluster, {}, dir / "runs.jsonl", &root);
    s.register_experiment("A", 2);
    EXPECT_EQ(s.run(done).state, RunState::succeeded);
    EXPECT_EQ(s.run(live).state, RunState::killed);
    EXPECT_EQ(s.cluster().find_node("gpu-000")->allocated_gpus, 0);
    EXPECT_EQ(s.submit_run("A", sugg("A", 2), {1, 1}).run_id, "A-r0002");
    EXPECT_EQ(read_run_journal(dir / "runs.jsonl").size(), 3u);
}

}  // namespace
