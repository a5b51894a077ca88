#include "orchestrate/controller/controller.hpp"

#include <algorithm>
#include <iostream>

#include "orchestrate/controller/status.hpp"
#include "orchestrate/error.hpp"

namespace orchestrate::controller {

using nlohmann::json;
using scheduler::RunRecord;
using scheduler::RunState;

Controller::Controller(store::StateRoot& store, provider::Provider& provider, std::string cluster_name,
                       ControllerOptions options)
    : store_(store),
      provider_(provider),
      cluster_name_(std::move(cluster_name)),
      options_(options),
      logs_(store, cluster_name_) {}

Controller::~Controller() { shutdown(); }

// --- loop ------------------------------------------------------------------

template <typename F>
auto Controller::call(F&& f) -> decltype(f()) {
    using R = decltype(f());
    if (std::this_thread::get_id() == loop_id_) return f();
    auto task = std::make_shared<std::packaged_task<R()>>(std::forward<F>(f));
    auto result = task->get_future();
    {
        std::lock_guard lock(queue_mu_);
        if (loop_exit_ || !started_) throw Error(ErrorKind::unavailable, "controller is not running");
        queue_.push_back([task] { (*task)(); });
    }
    queue_cv_.notify_one();
    return result.get();
}

void Controller::post(std::function<void()> command) {
    {
        std::lock_guard lock(queue_mu_);
        if (loop_exit_) return;
        queue_.push_back(std::move(command));
    }
    queue_cv_.notify_one();
}

void Controller::loop() {
    auto next_tick = std::chrono::steady_clock::now() + options_.tick;
    for (;;) {
        std::function<void()> command;
        {
            std::unique_lock lock(queue_mu_);
            queue_cv_.wait_until(lock, next_tick, [&] { return !queue_.empty() || loop_exit_; });
            if (queue_.empty() && loop_exit_) return;
            if (!queue_.empty()) {
                command = std::move(queue_.front());
                queue_.pop_front();
            }
        }
        try {
            if (command) {
                command();
            } else {
                next_tick = std::chrono::steady_clock::now() + options_.tick;
                if (!stopping_) {
                    const auto decision = scheduler_->autoscale(now_us());
                    if (!decision.requests.empty()) save_cluster();
                    pump();
                }
            }
        } catch (const std::exception& e) {
            std::cerr << "controller: " << e.what() << std::endl;
        }
    }
}

// --- lifecycle -------------------------------------------------------------

void Controller::start() {
    std::lock_guard life(lifecycle_mu_);
    if (started_) return;
    provider::ClusterState cluster = provider_.load_cluster(cluster_name_);
    scheduler::SchedulerOptions sopts;
    sopts.idle_timeout_us = options_.idle_timeout_us;
    sopts.autoscale = options_.autoscale;
    scheduler_ = std::make_unique<scheduler::Scheduler>(std::move(cluster), sopts,
                                                        store_.cluster_dir(cluster_name_) / "runs.jsonl", &store_);
    supervisor_ = std::make_unique<executor::RunSupervisor>(options_.grace);
    started_at_ = now_us();

    std::vector<store::ExperimentRecord> resumed;
    for (const auto& id : store_.experiment_ids()) {
        auto r = store_.load_experiment(id);
        if (r.cluster_name == cluster_name_ && r.state == store::ExperimentState::active) resumed.push_back(std::move(r));
    }
    std::sort(resumed.begin(), resumed.end(), [](const auto& a, const auto& b) {
        return std::tie(a.created_at, a.id) < std::tie(b.created_at, b.id);
    });
    for (auto& r : resumed) {
        optimizer::StrategyState strategy(r.id, r.strategy, r.observation_budget);
        strategy.restore(r.observations);
        scheduler_->register_experiment(r.id, static_cast<int>(r.parallel_bandwidth));
        logs_.reopen(r.id);
        order_.push_back(r.id);
        const std::string id = r.id;
        active_.emplace(id, ActiveExperiment{std::move(r), std::move(strategy)});
    }
    save_cluster();
    {
        std::lock_guard lock(queue_mu_);
        started_ = true;
        loop_exit_ = false;
    }
    loop_thread_ = std::thread([this] {
        loop_id_ = std::this_thread::get_id();
        loop();
    });
    post([this] { pump(); });
}

std::size_t Controller::shutdown() {
    std::lock_guard life(lifecycle_mu_);
    if (!started_ || shut_down_) return 0;
    shut_down_ = true;
    std::vector<std::string> waiting;
    const std::size_t killed = call([&] {
        stopping_ = true;
        const auto runs = scheduler_->kill_all("controller shutdown", now_us());
        for (const auto& r : runs) {
            publish_run(scheduler_->run(r.run_id));
            if (executing_.contains(r.run_id)) {
                waiting.push_back(r.run_id);
                supervisor_->kill(r.run_id, "controller shutdown");
            }
        }
        return runs.size();
    });
    supervisor_->wait_for(waiting, options_.grace * 2 + std::chrono::seconds(1));
    {
        std::lock_guard lock(queue_mu_);
        loop_exit_ = true;
    }
    queue_cv_.notify_all();
    loop_thread_.join();
    endpoint_.reset();
    pid_.reset();
    try {
        save_cluster();
    } catch (const std::exception& e) {
        std::cerr << "controller: " << e.what() << std::endl;
    }
    supervisor_.reset();
    return killed;
}

void Controller::set_endpoint(std::optional<std::string> endpoint, std::optional<int> pid) {
    call([&] {
        endpoint_ = std::move(endpoint);
        pid_ = pid;
        save_cluster();
        return 0;
    });
}

void Controller::save_cluster() {
    provider::ClusterState c = scheduler_->cluster();
    c.controller_endpoint = endpoint_;
    c.controller_pid = pid_;
    provider_.save_cluster(c);
}

// --- experiments -------------------------------------------------------------

std::string Controller::create_experiment(const ExperimentConfig& config) {
    return call([&] {
        if (stopping_) throw Error(ErrorKind::unavailable, "controller is shutting down");
        if (config.cluster_name && *config.cluster_name != cluster_name_) {
            throw Error(ErrorKind::invalid_argument,
                        "experiment targets cluster '" + *config.cluster_name + "' but this controller serves '" +
                            cluster_name_ + "'",
                        "cluster_name");
        }
        scheduler_->check_request(config.resources);
        store::ExperimentRecord r;
        r.id = store_.new_experiment_id();
        r.name = config.name;
        r.cluster_name = cluster_name_;
        r.space = config.space;
        r.strategy = config.strategy;
        r.observation_budget = config.observation_budget;
        if (config.strategy.kind == optimizer::StrategyKind::grid) {
            r.observation_budget = std::min(r.observation_budget, optimizer::grid_size(config.space));
        }
        r.parallel_bandwidth = config.parallel_bandwidth;
        r.resources = config.resources;
        r.run = config.run;
        r.synthetic = config.synthetic;
        r.created_at = now_us();
        r = store_.create_experiment(std::move(r));
        optimizer::StrategyState strategy(r.id, r.strategy, r.observation_budget);
        scheduler_->register_experiment(r.id, static_cast<int>(r.parallel_bandwidth));
        order_.push_back(r.id);
        const std::string id = r.id;
        events_.publish("experiment_created", id, "",
                        {{"name", r.name}, {"state", "active"}, {"observation_budget", r.observation_budget}});
        active_.emplace(id, ActiveExperiment{std::move(r), std::move(strategy)});
        pump();
        return id;
    });
}

json Controller::experiment_status(const std::string& id, bool include_history) {
    return call([&] {
        const auto record = store_.load_experiment(id);
        std::vector<RunRecord> runs;
        for (const RunRecord* r : scheduler_->experiment_runs(id)) runs.push_back(*r);
        return controller::experiment_status(record, runs, !store_.has_cluster(record.cluster_name), include_history);
    });
}

json Controller::list_experiments() {
    return call([&] {
        json out = json::array();
        for (const auto& id : store_.experiment_ids()) {
            const auto record = store_.load_experiment(id);
            if (record.cluster_name != cluster_name_) continue;
            std::vector<RunRecord> runs;
            for (const RunRecord* r : scheduler_->experiment_runs(id)) runs.push_back(*r);
            json s = controller::experiment_status(record, runs, false, false);
            s.erase("run_table");
            out.push_back(std::move(s));
        }
        return out;
    });
}

StopResult Controller::stop_experiment(const std::string& id) {
    std::vector<std::string> waiting;
    const std::size_t killed = call([&] {
        const auto record = store_.load_experiment(id);  // not_found for unknown ids
        if (record.state == store::ExperimentState::active) {
            store_.close_experiment(id, store::ExperimentState::deleted);
            events_.publish("experiment_state", id, "", {{"state", "deleted"}});
        }
        const auto runs = scheduler_->kill_experiment_runs(id, now_us());
        auto it = active_.find(id);
        for (const auto& r : runs) {
            if (it != active_.end()) optimizer::withdraw_suggestion(it->second.strategy, r.suggestion.suggestion_id);
            publish_run(scheduler_->run(r.run_id));
            if (executing_.contains(r.run_id)) {
                waiting.push_back(r.run_id);
                supervisor_->kill(r.run_id, "experiment stopped");
            }
        }
        retire(id);
        check_drained(id);
        pump();
        return runs.size();
    });
    supervisor_->wait_for(waiting, options_.grace * 2 + std::chrono::milliseconds(500));
    return {experiment_status(id), killed};
}

json Controller::cluster_status() {
    return call([&] {
        const auto& c = scheduler_->cluster();
        json pools = json::array();
        json allocations = json::object();
        int alloc_gpus = 0, alloc_cpus = 0;
        for (const auto& p : c.pools) {
            json nodes = json::array();
            for (const auto& n : p.nodes) {
                for (const auto& [run_id, residency] : n.resident) {
                    json& a = allocations[scheduler_->run(run_id).experiment_id];
                    if (a.is_null()) a = {{"gpus", 0}, {"cpus", 0}};
                    a["gpus"] = a.value("gpus", 0) + residency.request.gpus;
                    a["cpus"] = a.value("cpus", 0) + residency.request.cpus;
                }
                alloc_gpus += n.allocated_gpus;
                alloc_cpus += n.allocated_cpus;
                nodes.push_back({{"id", n.id},
                                 {"capacity", {{"cpus", n.capacity.cpus}, {"gpus", n.capacity.gpus}}},
                                 {"allocated", {{"cpus", n.allocated_cpus}, {"gpus", n.allocated_gpus}}},
                                 {"resident_runs", n.resident.size()}});
            }
            pools.push_back({{"kind", std::string(provider::to_string(p.kind))},
                             {"instance_type", p.instance_type},
                             {"min_nodes", p.min_nodes},
                             {"max_nodes", p.max_nodes},
                             {"node_count", p.nodes.size()},
                             {"nodes", nodes}});
        }
        std::size_t live = 0;
        for (const auto& id : order_) live += scheduler_->counts(id).live();
        return json{{"name", c.name},
                    {"cloud_provider", c.cloud_provider},
                    {"controller",
                     {{"endpoint", endpoint_ ? json(*endpoint_) : json(nullptr)},
                      {"pid", pid_ ? json(*pid_) : json(nullptr)},
                      {"uptime_s", static_cast<double>(now_us() - started_at_) / 1e6}}},
                    {"pools", pools},
                    {"totals",
                     {{"nodes", c.node_count()},
                      {"gpus", c.total_gpus()},
                      {"cpus", c.total_cpus()},
                      {"allocated_gpus", alloc_gpus},
                      {"allocated_cpus", alloc_cpus}}},
                    {"allocations", allocations},
                    {"queued_runs", scheduler_->queued().size()},
                    {"live_runs", live},
                    {"active_experiments", order_}};
    });
}

bool Controller::drained(const std::string& id) {
    return call([&] {
        if (drained_.contains(id)) return true;
        if (active_.contains(id)) return false;
        for (const RunRecord* r : scheduler_->experiment_runs(id)) {
            if (executing_.contains(r->run_id) || !scheduler::is_terminal(r->state)) return false;
        }
        return true;
    });
}

// --- decisions -------------------------------------------------------------

void Controller::fill_suggestions(ActiveExperiment& exp) {
    const auto& r = exp.record;
    for (;;) {
        const auto c = scheduler_->counts(r.id);
        if (c.queued + c.live() >= r.parallel_bandwidth) return;
        auto s = optimizer::suggest(exp.strategy, r.space);
        if (!s) return;
        const RunRecord& run = scheduler_->submit_run(r.id, *s, r.resources, now_us());
        publish_run(run);
    }
}

void Controller::pump() {
    if (stopping_) return;
    for (int round = 0; round < 1000; ++round) {
        for (const auto& id : order_) fill_suggestions(active_.at(id));
        auto placed = scheduler_->schedule(now_us());
        if (placed.empty() && !scheduler_->queued().empty()) {
            const auto decision = scheduler_->autoscale(now_us());
            if (!decision.requests.empty()) {
                save_cluster();
                placed = scheduler_->schedule(now_us());
            }
        }
        if (placed.empty()) return;
        for (const auto& run : placed) launch(run);
    }
}

void Controller::launch(const RunRecord& run) {
    publish_run(run);
    const ActiveExperiment& exp = active_.at(run.experiment_id);
    executor::LaunchContext ctx{run.experiment_id, run.run_id, run.suggestion.assignment, run.gpu_slots,
                                store_.cluster_dir(cluster_name_) / "runs" / run.experiment_id / run.run_id};
    const std::string exp_id = run.experiment_id;
    const std::string run_id = run.run_id;
    executor::ExecutionCallbacks callbacks{
        [this, exp_id, run_id](store::LogStream stream, std::string line) {
            logs_.append(exp_id, run_id, stream, std::move(line));
        },
        [this, run_id](executor::Outcome outcome) {
            post([this, run_id, outcome = std::move(outcome)] { handle_exit(run_id, outcome); });
        }};
    executing_.insert(run_id);
    const auto error = supervisor_->launch(ctx, exp.record.run, exp.record.synthetic, std::move(callbacks));
    if (error) {
        executing_.erase(run_id);
        logs_.append(exp_id, run_id, store::LogStream::stderr_stream, *error);
        finish_run(run_id, executor::Outcome::failed(*error));
        return;
    }
    publish_run(scheduler_->mark_running(run_id, now_us()));
}

void Controller::handle_exit(const std::string& run_id, const executor::Outcome& outcome) {
    executing_.erase(run_id);
    const RunRecord& run = scheduler_->run(run_id);
    logs_.close_run(run.experiment_id, run_id);
    if (!scheduler::is_terminal(run.state)) {
        finish_run(run_id, outcome);
    } else {
        check_drained(run.experiment_id);
    }
    pump();
}

void Controller::finish_run(const std::string& run_id, const executor::Outcome& outcome) {
    const RunRecord& run = scheduler_->complete_run(run_id, outcome, now_us());
    publish_run(run);
    after_run_terminal(run);
}

void Controller::after_run_terminal(const RunRecord& run) {
    auto it = active_.find(run.experiment_id);
    const auto record = store_.load_experiment(run.experiment_id);
    if (it != active_.end()) {
        const auto& obs = record.observations;
        auto o = std::find_if(obs.rbegin(), obs.rend(),
                              [&](const auto& x) { return x.suggestion_id == run.suggestion.suggestion_id; });
        if (o != obs.rend()) {
            optimizer::ingest_observation(it->second.strategy, *o);
            events_.publish("observation", run.experiment_id, run.run_id,
                            {{"index", obs.size() - 1},
                             {"value", o->value ? json(*o->value) : json(nullptr)},
                             {"failed", o->failed},
                             {"best", record.best ? json(record.best->value) : json(nullptr)}});
        } else {
            optimizer::withdraw_suggestion(it->second.strategy, run.suggestion.suggestion_id);
        }
    }
    if (record.state != store::ExperimentState::active) {
        if (it != active_.end()) {
            events_.publish("experiment_state", run.experiment_id, "",
                            {{"state", std::string(store::to_string(record.state))}});
        }
        retire(run.experiment_id);
    }
    check_drained(run.experiment_id);
}

void Controller::retire(const std::string& experiment_id) {
    active_.erase(experiment_id);
    std::erase(order_, experiment_id);
}

void Controller::check_drained(const std::string& experiment_id) {
    if (drained_.contains(experiment_id) || active_.contains(experiment_id)) return;
    for (const RunRecord* r : scheduler_->experiment_runs(experiment_id)) {
        if (executing_.contains(r->run_id) || !scheduler::is_terminal(r->state)) return;
    }
    drained_.insert(experiment_id);
    logs_.close(experiment_id);
}

void Controller::publish_run(const RunRecord& run) {
    events_.publish("run_state", run.experiment_id, run.run_id,
                    {{"state", std::string(to_string(run.state))},
                     {"node_id", run.node_id ? json(*run.node_id) : json(nullptr)},
                     {"value", run.value ? json(*run.value) : json(nullptr)},
                     {"reason", run.exit ? json(run.exit->reason) : json(nullptr)}});
}

}  // namespace orchestrate::controller
