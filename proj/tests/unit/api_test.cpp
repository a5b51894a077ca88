#include <gtest/gtest.h>

#include <httplib.h>

#include <thread>

#include "orchestrate/api/client.hpp"
#include "orchestrate/api/server.hpp"
#include "test_support.hpp"

using namespace orchestrate;
using nlohmann::json;
using orchestrate::testing::TempDir;

namespace {

json synthetic_config(int budget, int bandwidth, int duration_ms = 20, int gpus = 1, int log_lines = 0) {
    json c = {{"name", "exp"},
              {"parameters", json::array({{{"name", "x"}, {"type", "double"}, {"bounds", {{"min", 0.0}, {"max", 1.0}}}}})},
              {"observation_budget", budget},
              {"parallel_bandwidth", bandwidth},
              {"resources", {{"gpus", gpus}, {"cpus", 1}}},
              {"synthetic", {{"objective", "negated_quadratic"}, {"duration_ms", duration_ms}}}};
    if (log_lines > 0) c["synthetic"]["params"] = {{"log_lines", log_lines}};
    return c;
}

bool wait_until(const std::function<bool()>& pred, std::chrono::milliseconds timeout = std::chrono::seconds(20)) {
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    while (std::chrono::steady_clock::now() < deadline) {
        if (pred()) return true;
        std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }
    return pred();
}

ErrorKind kind_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.kind();
    }
    return ErrorKind::internal;
}

struct Fixture {
    TempDir dir;
    store::StateRoot root{dir.path()};
    provider::Provider provider{root, provider::Catalog::builtin()};
    std::unique_ptr<controller::Controller> controller;
    std::unique_ptr<api::ApiServer> server;
    std::unique_ptr<api::ApiClient> client;

    Fixture() {
        provider.create_cluster({"aws", "alpha", {{provider::PoolKind::gpu, "p3.2xlarge", 4, 4}}});
        controller::ControllerOptions options;
        options.grace = std::chrono::milliseconds(300);
        controller = std::make_unique<controller::Controller>(root, provider, "alpha", options);
        controller->start();
        server = std::make_unique<api::ApiServer>(*controller, root);
        client = std::make_unique<api::ApiClient>(server->start(0));
    }
    ~Fixture() {
        server->stop();
        controller->shutdown();
    }
};

}  // namespace

TEST(Api, CreateStatusStop) {
    Fixture f;
    EXPECT_TRUE(f.client->reachable());
    const auto id = f.client->create_experiment(synthetic_config(100, 3, 5000));
    const json s = f.client->experiment_status(id);
    EXPECT_EQ(s["id"], id);
    EXPECT_EQ(s["runs"]["live"], 3);
    EXPECT_EQ(f.client->list_experiments().size(), 1u);
    const json stop = f.client->stop_experiment(id);
    EXPECT_EQ(stop["killed"], 3);
    EXPECT_EQ(stop["status"]["state"], "deleted");
    EXPECT_EQ(f.client->stop_experiment(id)["killed"], 0);
    EXPECT_EQ(f.client->cluster_status()["totals"]["allocated_gpus"], 0);
}

TEST(Api, ErrorsCarryKindAndField) {
    Fixture f;
    try {
        f.client->create_experiment(synthetic_config(10, 2, 10, 16));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::unschedulable);
        EXPECT_EQ(e.field(), "resources.gpus");
    }
    auto bad = synthetic_config(0, 2);
    EXPECT_EQ(kind_of([&] { f.client->create_experiment(bad); }), ErrorKind::invalid_argument);
    EXPECT_EQ(kind_of([&] { f.client->experiment_status("missing"); }), ErrorKind::not_found);
    EXPECT_EQ(kind_of([&] { f.client->stop_experiment("missing"); }), ErrorKind::not_found);

    httplib::Client raw("127.0.0.1", std::stoi(f.server->endpoint().substr(f.server->endpoint().rfind(':') + 1)));
    const auto r = raw.Post("/v1/experiments", "{not json", "application/json");
    ASSERT_TRUE(r);
    EXPECT_EQ(r->status, 400);
    EXPECT_EQ(json::parse(r->body)["error"]["kind"], "invalid_argument");
    const auto g = raw.Post("/v1/experiments", synthetic_config(1, 1, 10, 16).dump(), "application/json");
    EXPECT_EQ(g->status, 422);
}

TEST(Api, UnreachableControllerIsUnavailable) {
    api::ApiClient client("127.0.0.1:1");
    EXPECT_FALSE(client.reachable());
    EXPECT_EQ(kind_of([&] { client.cluster_status(); }), ErrorKind::unavailable);
}

TEST(Api, BandwidthNeverExceededWhenPolled) {
    Fixture f;
    const auto id = f.client->create_experiment(synthetic_config(40, 3, 10));
    int peak = 0;
    ASSERT_TRUE(wait_until([&] {
        const json s = f.client->experiment_status(id);
        peak = std::max(peak, s["runs"]["live"].get<int>());
        return s["state"] == "completed";
    }));
    EXPECT_LE(peak, 3);
    const json s = f.client->experiment_status(id, true);
    EXPECT_EQ(s["budget"]["completed"].get<int>() + s["budget"]["failed"].get<int>(), 40);
    EXPECT_EQ(s["observations"].size(), 40u);
}

TEST(Api, LogsReplayFollowAndResume) {
    Fixture f;
    const auto id = f.client->create_experiment(synthetic_config(4, 2, 60, 1, 5));
    std::vector<store::LogRecord> followed;
    f.client->stream_logs(id, true, 0, [&](const store::LogRecord& r) {
        followed.push_back(r);
        return true;
    });
    ASSERT_EQ(followed.size(), 20u);
    std::map<std::string, std::uint64_t> last_seq;
    for (std::size_t i = 0; i < followed.size(); ++i) {
        EXPECT_EQ(followed[i].cursor, i);
        auto [it, fresh] = last_seq.try_emplace(followed[i].run_id, followed[i].seq);
        if (!fresh) {
            EXPECT_GT(followed[i].seq, it->second);
            it->second = followed[i].seq;
        }
    }
    EXPECT_EQ(last_seq.size(), 4u);

    std::vector<store::LogRecord> replay;
    f.client->stream_logs(id, false, 0, [&](const store::LogRecord& r) {
        replay.push_back(r);
        return true;
    });
    EXPECT_EQ(replay.size(), 20u);

    std::vector<std::uint64_t> resumed;
    f.client->stream_logs(id, true, 10, [&](const store::LogRecord& r) {
        resumed.push_back(r.cursor);
        return true;
    });
    ASSERT_EQ(resumed.size(), 10u);
    EXPECT_EQ(resumed.front(), 10u);
}

TEST(Api, FollowSeesConcurrentRuns) {
    Fixture f;
    const auto id = f.client->create_experiment(synthetic_config(2, 2, 200, 1, 10));
    std::set<std::string> runs;
    std::size_t n = 0;
    f.client->stream_logs(id, true, 0, [&](const store::LogRecord& r) {
        runs.insert(r.run_id);
        ++n;
        return true;
    });
    EXPECT_EQ(runs.size(), 2u);
    EXPECT_EQ(n, 20u);
}

TEST(Api, LogsUnavailableAfterDestroy) {
    Fixture f;
    auto record = orchestrate::testing::make_experiment(f.root.new_experiment_id(), "gone");
    f.root.create_experiment(record);
    try {
        f.client->stream_logs(record.id, false, 0, [](const store::LogRecord&) { return true; });
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::unavailable);
        EXPECT_EQ(e.bare_message(), "logs unavailable: cluster destroyed");
    }
    const json s = f.client->experiment_status(record.id);
    EXPECT_EQ(s["cluster_destroyed"], true);
}

TEST(Api, EventsResumeWithoutLossOrDuplication) {
    Fixture f;
    const auto id = f.client->create_experiment(synthetic_config(12, 3, 10));
    std::vector<std::uint64_t> seen;
    std::uint64_t cursor = 0;
    bool done = false;
    const auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(20);
    while (!done && std::chrono::steady_clock::now() < deadline) {
        const json batch = f.client->events(cursor, 200);
        for (const auto& e : batch["events"]) {
            seen.push_back(e["seq"]);
            cursor = e["seq"];
            if (e["type"] == "experiment_state" && e["experiment_id"] == id) done = true;
        }
        if (seen.size() > 5 && seen.size() < 10) std::this_thread::sleep_for(std::chrono::milliseconds(30));
    }
    ASSERT_TRUE(done);
    const json all = f.client->events(0);
    ASSERT_EQ(all["events"].size(), seen.size());
    for (std::size_t i = 0; i < seen.size(); ++i) EXPECT_EQ(all["events"][i]["seq"], seen[i]);
    EXPECT_EQ(all["last_seq"], seen.back());
}

TEST(Api, EventsLongPollTimesOut) {
    Fixture f;
    const auto start = std::chrono::steady_clock::now();
    const json batch = f.client->events(f.controller->events().last_seq(), 150);
    EXPECT_TRUE(batch["events"].empty());
    EXPECT_GE(std::chrono::steady_clock::now() - start, std::chrono::milliseconds(140));
}

TEST(Api, BusyPortFallsBackToEphemeral) {
    Fixture f;
    const int taken = std::stoi(f.server->endpoint().substr(f.server->endpoint().rfind(':') + 1));
    api::ApiServer second(*f.controller, f.root);
    const std::string endpoint = second.start(taken);
    EXPECT_NE(endpoint, f.server->endpoint());
    EXPECT_TRUE(api::ApiClient(endpoint).reachable());
    second.stop();
}
