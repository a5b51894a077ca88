#include "orchestrate/scheduler/scheduler.hpp"

#include <algorithm>

#include "orchestrate/error.hpp"

namespace orchestrate::scheduler {

using executor::Disposition;
using executor::Outcome;
using nlohmann::json;

Scheduler::Scheduler(provider::ClusterState cluster, SchedulerOptions options,
                     std::optional<std::filesystem::path> journal, store::StateRoot* store)
    : cluster_(std::move(cluster)), options_(options), journal_path_(std::move(journal)), store_(store) {
    if (journal_path_) load_journal();
}

void Scheduler::load_journal() {
    // Runs that were in flight belong to a previous controller whose
    // processes are gone; allocations recorded for them are stale.
    for (auto& pool : cluster_.pools) {
        for (auto& node : pool.nodes) {
            node.resident.clear();
            node.allocated_cpus = 0;
            node.allocated_gpus = 0;
        }
    }
    std::vector<RunRecord> interrupted;
    if (std::filesystem::exists(*journal_path_)) {
        for (auto& r : read_run_journal(*journal_path_)) {
            next_index_[r.experiment_id] = std::max(next_index_[r.experiment_id], r.index + 1);
            by_experiment_[r.experiment_id].push_back(r.run_id);
            if (!is_terminal(r.state)) interrupted.push_back(r);
            runs_.emplace(r.run_id, std::move(r));
        }
    }
    journal_out_.open(*journal_path_, std::ios::app);
    if (!journal_out_) throw Error(ErrorKind::internal, "cannot open run journal " + journal_path_->string());
    const Timestamp now = now_us();
    for (const auto& r : interrupted) {
        RunRecord& run = runs_.at(r.run_id);
        run.state = RunState::killed;
        run.finished_at = now;
        run.exit = RunExit{std::nullopt, "controller restarted"};
        run.node_id.reset();
        run.gpu_slots.clear();
        journal(run);
    }
}

void Scheduler::register_experiment(const std::string& experiment_id, int parallel_bandwidth) {
    if (parallel_bandwidth < 1) throw Error(ErrorKind::invalid_argument, "parallel_bandwidth must be >= 1");
    if (!bandwidth_.contains(experiment_id)) experiment_order_.push_back(experiment_id);
    bandwidth_[experiment_id] = parallel_bandwidth;
}

void Scheduler::check_request(const ResourceRequest& request) const {
    if (request.gpus > kMaxGpusPerRun) {
        throw Error(ErrorKind::unschedulable,
                    "requested " + std::to_string(request.gpus) + " GPUs exceeds largest supported node (" +
                        std::to_string(kMaxGpusPerRun) + " GPUs)",
                    "resources.gpus");
    }
    if (!satisfiable(cluster_, request)) {
        std::string pools;
        for (const auto& p : cluster_.pools) {
            pools += (pools.empty() ? "" : ", ") + std::string(provider::to_string(p.kind)) + ": " + p.instance_type +
                     " (" + std::to_string(p.capacity.gpus) + " GPUs, " + std::to_string(p.capacity.cpus) +
                     " CPUs, max " + std::to_string(p.max_nodes) + " nodes)";
        }
        throw Error(ErrorKind::unschedulable,
                    "unschedulable: no pool of cluster '" + cluster_.name + "' can hold " +
                        std::to_string(request.gpus) + " GPUs and " + std::to_string(request.cpus) +
                        " CPUs on one node [" + pools + "]",
                    "resources");
    }
}

const RunRecord& Scheduler::submit_run(const std::string& experiment_id, const optimizer::Suggestion& suggestion,
                                       const ResourceRequest& request, Timestamp now) {
    auto bw = bandwidth_.find(experiment_id);
    if (bw == bandwidth_.end()) {
        throw Error(ErrorKind::internal, "experiment " + experiment_id + " is not registered with the scheduler");
    }
    check_request(request);
    const RunCounts c = counts(experiment_id);
    if (static_cast<int>(c.queued + c.live()) >= bw->second) {
        throw Error(ErrorKind::internal, "bandwidth exceeded for experiment " + experiment_id);
    }
    RunRecord r;
    r.experiment_id = experiment_id;
    r.index = next_index_[experiment_id]++;
    r.run_id = make_run_id(experiment_id, r.index);
    r.suggestion = suggestion;
    r.request = request;
    r.state = RunState::queued;
    r.queued_at = now;
    by_experiment_[experiment_id].push_back(r.run_id);
    queue_.push_back(r.run_id);
    auto [it, inserted] = runs_.emplace(r.run_id, std::move(r));
    journal(it->second);
    return it->second;
}

std::vector<RunRecord> Scheduler::schedule(Timestamp now) {
    if (queue_.empty()) return {};
    PlacementProblem problem;
    problem.queue = queued();
    problem.experiment_order = experiment_order_;
    for (const auto& [id, bw] : bandwidth_) problem.slots[id] = bw - static_cast<int>(counts(id).live());
    std::vector<RunRecord> placed;
    for (const auto& p : place_queued(cluster_, problem)) {
        RunRecord& run = mutable_run(p.run_id);
        run.gpu_slots = cluster_.allocate(p.node_id, p.run_id, run.request);
        run.node_id = p.node_id;
        transition(run, RunState::scheduled, now);
        std::erase(queue_, p.run_id);
        journal(run);
        placed.push_back(run);
    }
    return placed;
}

AutoscaleDecision Scheduler::autoscale(Timestamp now) {
    std::vector<QueuedRun> eligible;
    std::map<std::string, int> slots;
    for (const auto& [id, bw] : bandwidth_) slots[id] = bw - static_cast<int>(counts(id).live());
    for (auto& q : queued()) {
        if (slots[q.experiment_id]-- > 0) eligible.push_back(std::move(q));
    }
    AutoscaleDecision d = autoscale_tick(cluster_, eligible, now, options_.idle_timeout_us);
    if (!options_.autoscale) {
        d.requests.clear();
        return d;
    }
    for (const auto& req : d.requests) {
        const auto* pool = cluster_.find_pool(req.pool);
        const int target = static_cast<int>(pool->nodes.size()) + req.delta;
        provider::Catalog single;
        single.add(pool->capacity);
        cluster_ = provider::scale_pool(std::move(cluster_), req.pool, target, single, now);
    }
    return d;
}

const RunRecord& Scheduler::mark_running(const std::string& run_id, Timestamp now) {
    RunRecord& run = mutable_run(run_id);
    transition(run, RunState::running, now);
    journal(run);
    return run;
}

const RunRecord& Scheduler::complete_run(const std::string& run_id, const Outcome& outcome, Timestamp now) {
    RunRecord& run = mutable_run(run_id);
    const RunState to = outcome.disposition == Disposition::succeeded ? RunState::succeeded
                        : outcome.disposition == Disposition::failed  ? RunState::failed
                                                                      : RunState::killed;
    if (to == RunState::succeeded && (!outcome.value || run.state != RunState::running)) {
        throw Error(ErrorKind::illegal_transition, "run " + run_id + " cannot succeed from " +
                                                       std::string(to_string(run.state)));
    }
    transition(run, to, now);
    std::erase(queue_, run_id);
    run.value = outcome.value;
    if (to != RunState::succeeded) run.exit = RunExit{outcome.exit_code, outcome.reason};
    else run.exit = RunExit{outcome.exit_code, {}};
    release(run, now);
    journal(run);

    if (store_) {
        const auto exp = store_->load_experiment(run.experiment_id);
        if (exp.state == store::ExperimentState::active) {
            auto obs = to == RunState::succeeded
                           ? optimizer::Observation::success(run.suggestion.suggestion_id, run.suggestion.sequence_index,
                                                             run.suggestion.assignment, *outcome.value, run.run_id)
                           : optimizer::Observation::failure(run.suggestion.suggestion_id, run.suggestion.sequence_index,
                                                             run.suggestion.assignment, run.run_id);
            obs.reported_at = now;
            store_->record_observation(run.experiment_id, obs);
        }
    }
    return run;
}

std::vector<RunRecord> Scheduler::kill_experiment_runs(const std::string& experiment_id, Timestamp now) {
    return kill_runs(experiment_id, "experiment stopped", now);
}

std::vector<RunRecord> Scheduler::kill_runs(const std::string& experiment_id, const std::string& reason,
                                            Timestamp now) {
    std::vector<RunRecord> killed;
    auto it = by_experiment_.find(experiment_id);
    if (it == by_experiment_.end()) return killed;
    for (const auto& run_id : it->second) {
        RunRecord& run = runs_.at(run_id);
        if (is_terminal(run.state)) continue;
        killed.push_back(run);
        transition(run, RunState::killed, now);
        run.exit = RunExit{std::nullopt, reason};
        std::erase(queue_, run_id);
        release(run, now);
        journal(run);
    }
    return killed;
}

std::vector<RunRecord> Scheduler::kill_all(const std::string& reason, Timestamp now) {
    std::vector<RunRecord> killed;
    for (const auto& id : experiment_order_) {
        for (auto& r : kill_runs(id, reason, now)) killed.push_back(std::move(r));
    }
    return killed;
}

const RunRecord& Scheduler::run(const std::string& run_id) const {
    const RunRecord* r = find_run(run_id);
    if (!r) throw Error(ErrorKind::not_found, "unknown run " + run_id);
    return *r;
}

const RunRecord* Scheduler::find_run(const std::string& run_id) const {
    auto it = runs_.find(run_id);
    return it == runs_.end() ? nullptr : &it->second;
}

RunRecord& Scheduler::mutable_run(const std::string& run_id) {
    auto it = runs_.find(run_id);
    if (it == runs_.end()) throw Error(ErrorKind::not_found, "unknown run " + run_id);
    return it->second;
}

std::vector<const RunRecord*> Scheduler::experiment_runs(const std::string& experiment_id) const {
    std::vector<const RunRecord*> out;
    auto it = by_experiment_.find(experiment_id);
    if (it == by_experiment_.end()) return out;
    for (const auto& id : it->second) out.push_back(&runs_.at(id));
    return out;
}

RunCounts Scheduler::counts(const std::string& experiment_id) const {
    RunCounts c;
    for (const RunRecord* r : experiment_runs(experiment_id)) {
        switch (r->state) {
            case RunState::queued: ++c.queued; break;
            case RunState::scheduled: ++c.scheduled; break;
            case RunState::running: ++c.running; break;
            case RunState::succeeded: ++c.succeeded; break;
            case RunState::failed: ++c.failed; break;
            case RunState::killed: ++c.killed; break;
        }
    }
    return c;
}

std::vector<QueuedRun> Scheduler::queued() const {
    std::vector<QueuedRun> out;
    for (const auto& id : queue_) {
        const RunRecord& r = runs_.at(id);
        out.push_back({r.run_id, r.experiment_id, r.request});
    }
    return out;
}

std::pair<int, int> Scheduler::experiment_allocation(const std::string& experiment_id) const {
    int cpus = 0, gpus = 0;
    for (const provider::Node* n : cluster_.nodes()) {
        for (const auto& [run_id, res] : n->resident) {
            if (runs_.at(run_id).experiment_id != experiment_id) continue;
            cpus += res.request.cpus;
            gpus += res.request.gpus;
        }
    }
    return {cpus, gpus};
}

void Scheduler::release(RunRecord& run, Timestamp now) {
    if (run.node_id) cluster_.release(*run.node_id, run.run_id, now);
}

void Scheduler::journal(const RunRecord& run) {
    if (!journal_out_.is_open()) return;
    journal_out_ << to_json(run).dump(-1, ' ', false, json::error_handler_t::replace) << '\n';
    journal_out_.flush();
}

std::vector<RunRecord> read_run_journal(const std::filesystem::path& file) {
    std::ifstream in(file);
    std::vector<RunRecord> out;
    std::map<std::string, std::size_t> position;
    std::string line;
    while (std::getline(in, line)) {
        if (in.eof()) break;  // no trailing newline: torn write
        if (line.empty()) continue;
        RunRecord r;
        try {
            r = run_from_json(json::parse(line));
        } catch (const std::exception&) {
            break;
        }
        auto [it, inserted] = position.emplace(r.run_id, out.size());
        if (inserted) out.push_back(std::move(r));
        else out[it->second] = std::move(r);
    }
    return out;
}

}  // namespace orchestrate::scheduler
