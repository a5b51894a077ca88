#pragma once

#include <chrono>
#include <condition_variable>
#include <deque>
#include <functional>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "orchestrate/controller/event_log.hpp"
#include "orchestrate/controller/experiment_config.hpp"
#include "orchestrate/controller/log_hub.hpp"
#include "orchestrate/executor/execution.hpp"
#include "orchestrate/optimizer/strategy.hpp"
#include "orchestrate/provider/provider.hpp"
#include "orchestrate/scheduler/scheduler.hpp"

namespace orchestrate::controller {

struct ControllerOptions {
    std::chrono::milliseconds grace = executor::kDefaultGrace;
    Timestamp idle_timeout_us = 30'000'000;
    std::chrono::milliseconds tick = std::chrono::milliseconds(100);
    bool autoscale = true;
};

struct StopResult {
    nlohmann::json status;
    std::size_t killed = 0;
};

/// Owns one cluster's scheduler, the strategies of its active experiments
/// and the executor. All decisions run on a single event-loop thread;
/// public methods post commands to it and wait for the result, and may be
/// called from any thread.
class Controller {
public:
    Controller(store::StateRoot& store, provider::Provider& provider, std::string cluster_name,
               ControllerOptions options = {});
    ~Controller();
    Controller(const Controller&) = delete;
    Controller& operator=(const Controller&) = delete;

    /// Loads the cluster, resumes its active experiments and starts the loop.
    void start();
    /// Kills every run and waits for the processes, then stops the loop.
    /// Experiments stay active and resume on the next start. Idempotent;
    /// returns the number of runs killed.
    std::size_t shutdown();

    const std::string& cluster_name() const noexcept { return cluster_name_; }

    /// Validates, persists and starts an experiment; returns its id.
    std::string create_experiment(const ExperimentConfig& config);
    nlohmann::json experiment_status(const std::string& id, bool include_history = false);
    nlohmann::json list_experiments();
    /// Kills the experiment's runs, marks it deleted and waits (up to twice
    /// the grace period) for its processes to exit. Idempotent.
    StopResult stop_experiment(const std::string& id);
    nlohmann::json cluster_status();

    /// Records the HTTP endpoint in the persisted cluster state.
    void set_endpoint(std::optional<std::string> endpoint, std::optional<int> pid);

    LogHub& logs() noexcept { return logs_; }
    EventLog& events() noexcept { return events_; }
    /// True when the experiment is not active here and none of its runs is
    /// still executing (no more log lines can arrive).
    bool drained(const std::string& id);

private:
    struct ActiveExperiment {
        store::ExperimentRecord record;  // configuration; observations not kept current
        optimizer::StrategyState strategy;
    };

    template <typename F>
    auto call(F&& f) -> decltype(f());
    void post(std::function<void()> command);
    void loop();

    void pump();
    void fill_suggestions(ActiveExperiment& exp);
    void launch(const scheduler::RunRecord& run);
    void finish_run(const std::string& run_id, const executor::Outcome& outcome);
    void handle_exit(const std::string& run_id, const executor::Outcome& outcome);
    void after_run_terminal(const scheduler::RunRecord& run);
    void retire(const std::string& experiment_id);
    void check_drained(const std::string& experiment_id);
    void save_cluster();
    void publish_run(const scheduler::RunRecord& run);

    store::StateRoot& store_;
    provider::Provider& provider_;
    std::string cluster_name_;
    ControllerOptions options_;
    Timestamp started_at_ = 0;

    LogHub logs_;
    EventLog events_;
    std::unique_ptr<scheduler::Scheduler> scheduler_;
    std::unique_ptr<executor::RunSupervisor> supervisor_;
    std::map<std::string, ActiveExperiment> active_;
    std::vector<std::string> order_;            // active experiments, creation order
    std::set<std::string> executing_;           // runs with a live process or synthetic job
    std::set<std::string> drained_;
    std::optional<std::string> endpoint_;
    std::optional<int> pid_;
    bool stopping_ = false;

    std::mutex queue_mu_;
    std::condition_variable queue_cv_;
    std::deque<std::function<void()>> queue_;
    bool loop_exit_ = false;
    std::thread loop_thread_;
    std::thread::id loop_id_;
    bool started_ = false;
    bool shut_down_ = false;
    std::mutex lifecycle_mu_;
};

}  // namespace orchestrate::controller
