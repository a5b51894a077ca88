#include "orchestrate/cli/app.hpp"

#include <unistd.h>

#include <algorithm>
#include <thread>

#include <CLI11.hpp>

#include "orchestrate/cli/daemon.hpp"
#include "orchestrate/cli/render.hpp"
#include "orchestrate/controller/status.hpp"
#include "orchestrate/error.hpp"
#include "orchestrate/file_lock.hpp"
#include "orchestrate/yaml_json.hpp"

namespace orchestrate::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Session {
    CliEnv& env;
    store::StateRoot root;
    provider::Provider provider;

    Session(CliEnv& e, const fs::path& home)
        : env(e), root(home), provider(root, provider::Catalog::load(home / "catalog.yml")) {}

    bool color() const {
        if (env.color) return *env.color;
        return ::isatty(STDOUT_FILENO) && !std::getenv("NO_COLOR");
    }
};

std::string pick_cluster(Session& s, const std::string& flag, const std::optional<std::string>& from_config) {
    if (!flag.empty()) return flag;
    if (from_config) return *from_config;
    const auto names = s.root.cluster_names();
    if (names.size() == 1) return names.front();
    if (names.empty()) throw Error(ErrorKind::not_found, "no such cluster: create one with `orchestrate cluster create`");
    std::string list;
    for (const auto& n : names) list += (list.empty() ? "" : ", ") + n;
    throw Error(ErrorKind::invalid_argument, "several clusters exist (" + list + "); choose one with --cluster");
}

void cluster_create(Session& s, const std::string& file) {
    const auto config = provider::load_cluster_config(file, s.provider.catalog());
    s.env.out << render_cluster_created(s.provider.create_cluster(config));
}

void cluster_destroy(Session& s, const std::string& name) {
    const auto report = s.provider.destroy_cluster(
        name, [&](const provider::ClusterState& c) { return stop_controller(s.root, c); });
    s.env.out << render_cluster_destroyed(report);
}

void cluster_status(Session& s, const std::string& name) {
    const auto cluster = s.provider.load_cluster(name);
    if (auto client = find_controller(s.root, s.provider, name)) {
        s.env.out << render_cluster_status(client->cluster_status());
    } else {
        s.env.out << render_cluster_status(cluster_status_offline(cluster));
    }
}

void cluster_list(Session& s) {
    for (const auto& name : s.root.cluster_names()) {
        const auto c = s.provider.load_cluster(name);
        s.env.out << name << "  " << c.node_count() << " nodes, " << c.total_gpus() << " GPUs\n";
    }
}

void controller_stop(Session& s, const std::string& name) {
    const auto cluster = s.provider.load_cluster(name);
    if (!find_controller(s.root, s.provider, name)) {
        s.env.out << "no controller running for cluster " << name << "\n";
        return;
    }
    s.env.out << "controller stopped, killed " << stop_controller(s.root, cluster) << " runs\n";
}

void run_experiment(Session& s, const std::string& file, const std::string& cluster_flag, bool wait) {
    auto config = controller::load_experiment_config(file);
    const std::string cluster = pick_cluster(s, cluster_flag, config.cluster_name);
    s.provider.load_cluster(cluster);
    config.cluster_name = cluster;
    auto client = ensure_controller(s.root, s.provider, cluster, s.env.self_exe);
    const std::string id = client.create_experiment(controller::to_json(config));
    s.env.out << id << std::endl;
    if (!wait) return;
    for (;;) {
        const json status = client.experiment_status(id);
        if (status["state"] != "active") {
            const json& b = status["budget"];
            s.env.err << id << " " << status["state"].get<std::string>() << ": completed "
                      << b["completed"].get<int>() << "/" << b["total"].get<int>() << " ("
                      << b["failed"].get<int>() << " failed)" << std::endl;
            return;
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(200));
    }
}

json local_status(Session& s, const store::ExperimentRecord& record, bool history) {
    if (!s.root.has_cluster(record.cluster_name)) return controller::experiment_status(record, {}, true, history);
    std::vector<scheduler::RunRecord> runs;
    for (auto& r : scheduler::read_run_journal(s.root.cluster_dir(record.cluster_name) / "runs.jsonl")) {
        if (r.experiment_id == record.id) runs.push_back(std::move(r));
    }
    std::sort(runs.begin(), runs.end(), [](const auto& a, const auto& b) { return a.index < b.index; });
    return controller::experiment_status(record, runs, false, history);
}

void experiment_status(Session& s, const std::string& id, bool as_json) {
    const auto record = s.root.load_experiment(id);
    json status;
    std::optional<api::ApiClient> client;
    if (s.root.has_cluster(record.cluster_name)) client = find_controller(s.root, s.provider, record.cluster_name);
    status = client ? client->experiment_status(id, as_json) : local_status(s, record, as_json);
    s.env.out << (as_json ? status.dump(2) + "\n" : render_experiment_status(status));
}

void experiment_logs(Session& s, const std::string& id, bool follow, std::uint64_t since_seq) {
    const auto record = s.root.load_experiment(id);
    if (!s.root.logs_available(record.cluster_name)) {
        throw Error(ErrorKind::unavailable, "logs unavailable: cluster destroyed");
    }
    const bool color = s.color();
    auto print = [&](const store::LogRecord& r) {
        s.env.out << render_log_line(r, color);
        s.env.out.flush();
        return static_cast<bool>(s.env.out);
    };
    std::optional<api::ApiClient> client = find_controller(s.root, s.provider, record.cluster_name);
    if (!client && follow && record.state == store::ExperimentState::active) {
        client = ensure_controller(s.root, s.provider, record.cluster_name, s.env.self_exe);
    }
    if (client) {
        client->stream_logs(id, follow, since_seq, print);
        return;
    }
    auto records = s.root.read_logs(record.cluster_name, id);
    std::sort(records.begin(), records.end(), [](const auto& a, const auto& b) { return a.cursor < b.cursor; });
    for (const auto& r : records) {
        if (r.cursor >= since_seq && !print(r)) return;
    }
}

void experiment_delete(Session& s, const std::string& id) {
    auto record = s.root.load_experiment(id);
    std::size_t killed = 0;
    while (record.state == store::ExperimentState::active) {
        if (!s.root.has_cluster(record.cluster_name)) {
            s.root.close_experiment(id, store::ExperimentState::deleted);
            break;
        }
        if (auto client = find_controller(s.root, s.provider, record.cluster_name)) {
            killed = client->stop_experiment(id)["killed"].get<std::size_t>();
            break;
        }
        FileLock lock(s.root.cluster_dir(record.cluster_name) / "controller.lock", FileLock::Mode::try_once);
        if (lock.held()) {
            s.root.close_experiment(id, store::ExperimentState::deleted);
            break;
        }
        record = s.root.load_experiment(id);
    }
    s.env.out << "killed " << killed << " runs\n";
}

void controller_serve(Session& s, const ServeOptions& options) { serve(s.root, s.provider, options, s.env.out); }

}  // namespace

int run_cli(const std::vector<std::string>& args, CliEnv& env) {
    CLI::App app{"Hyperparameter tuning experiments on simulated clusters", "orchestrate"};
    app.require_subcommand(1);
    std::string home = store::StateRoot::default_path().string();
    app.add_option("--home", home, "State directory (default $ORCHESTRATE_HOME or ~/.orchestrate)");

    std::function<void(Session&)> action;

    auto* cluster = app.add_subcommand("cluster", "Create, inspect and destroy clusters");
    cluster->require_subcommand(1);
    std::string cluster_file, cluster_name;
    auto* create = cluster->add_subcommand("create", "Create a cluster from a configuration file");
    create->add_option("-f,--file", cluster_file, "Cluster configuration file")->required();
    create->callback([&] { action = [&](Session& s) { cluster_create(s, cluster_file); }; });
    auto* destroy = cluster->add_subcommand("destroy", "Destroy a cluster, its runs and its logs");
    destroy->add_option("-n,--name", cluster_name, "Cluster name")->required();
    destroy->callback([&] { action = [&](Session& s) { cluster_destroy(s, cluster_name); }; });
    auto* cstatus = cluster->add_subcommand("status", "Show nodes and allocation");
    cstatus->add_option("-n,--name", cluster_name, "Cluster name")->required();
    cstatus->callback([&] { action = [&](Session& s) { cluster_status(s, cluster_name); }; });
    auto* list = cluster->add_subcommand("list", "List clusters");
    list->callback([&] { action = [&](Session& s) { cluster_list(s); }; });

    auto* ctl = app.add_subcommand("controller", "Manage a cluster's controller");
    ctl->require_subcommand(1);
    ServeOptions serve_options;
    int grace_ms = static_cast<int>(serve_options.controller.grace.count());
    double idle_timeout_s = static_cast<double>(serve_options.controller.idle_timeout_us) / 1e6;
    auto* serve_cmd = ctl->add_subcommand("serve", "Run the controller in the foreground");
    serve_cmd->add_option("-n,--name", serve_options.cluster, "Cluster name")->required();
    serve_cmd->add_option("--port", serve_options.port, "Port to listen on (0: any)");
    serve_cmd->add_option("--grace-ms", grace_ms, "Time between SIGTERM and SIGKILL when killing runs");
    serve_cmd->add_option("--idle-timeout-s", idle_timeout_s, "Idle time before a node is removed");
    serve_cmd->callback([&] {
        serve_options.controller.grace = std::chrono::milliseconds(grace_ms);
        serve_options.controller.idle_timeout_us = static_cast<Timestamp>(idle_timeout_s * 1e6);
        action = [&](Session& s) { controller_serve(s, serve_options); };
    });
    auto* ctl_stop = ctl->add_subcommand("stop", "Stop the controller, killing its runs");
    ctl_stop->add_option("-n,--name", cluster_name, "Cluster name")->required();
    ctl_stop->callback([&] { action = [&](Session& s) { controller_stop(s, cluster_name); }; });

    std::string run_file, run_cluster;
    bool wait = false;
    auto* run = app.add_subcommand("run", "Start an experiment; prints its id");
    run->add_option("-f,--file", run_file, "Experiment configuration file")->required();
    run->add_option("--cluster", run_cluster, "Cluster to run on");
    run->add_flag("--wait", wait, "Block until the experiment is finished");
    run->callback([&] { action = [&](Session& s) { run_experiment(s, run_file, run_cluster, wait); }; });

    std::string experiment_id;
    bool as_json = false;
    auto* status = app.add_subcommand("status", "Show an experiment's progress");
    status->add_option("experiment_id", experiment_id, "Experiment id")->required();
    status->add_flag("--json", as_json, "Print the raw status document, with observation history");
    status->callback([&] { action = [&](Session& s) { experiment_status(s, experiment_id, as_json); }; });

    bool follow = false;
    std::uint64_t since_seq = 0;
    auto* logs = app.add_subcommand("logs", "Print an experiment's run output");
    logs->add_option("experiment_id", experiment_id, "Experiment id")->required();
    logs->add_flag("--follow", follow, "Keep streaming until the experiment is finished");
    logs->add_option("--since-seq", since_seq, "Skip lines before this cursor");
    logs->callback([&] { action = [&](Session& s) { experiment_logs(s, experiment_id, follow, since_seq); }; });

    auto* del = app.add_subcommand("delete", "Stop an experiment and kill its runs");
    del->add_option("experiment_id", experiment_id, "Experiment id")->required();
    del->callback([&] { action = [&](Session& s) { experiment_delete(s, experiment_id); }; });

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, env.out, env.err);
        return code == 0 ? 0 : 1;
    }

    try {
        Session session(env, home);
        action(session);
        return 0;
    } catch (const Error& e) {
        env.err << "error: " << e.what() << std::endl;
        return e.is_user_error() ? 1 : 2;
    } catch (const std::exception& e) {
        env.err << "internal error: " << e.what() << std::endl;
        return 2;
    }
}

}  // namespace orchestrate::cli
