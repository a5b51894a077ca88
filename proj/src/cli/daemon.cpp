#include "orchestrate/cli/daemon.hpp"

#include <fcntl.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <fstream>
#include <thread>

#include "orchestrate/api/server.hpp"
#include "orchestrate/error.hpp"
#include "orchestrate/file_lock.hpp"

extern char** environ;

namespace orchestrate::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr auto kStartupWait = std::chrono::seconds(15);

fs::path lock_path(const store::StateRoot& root, const std::string& cluster) {
    return root.cluster_dir(cluster) / "controller.lock";
}

bool controller_running(const store::StateRoot& root, const std::string& cluster) {
    if (!fs::exists(root.cluster_dir(cluster))) return false;
    FileLock probe(lock_path(root, cluster), FileLock::Mode::try_once);
    return !probe.held();
}

std::string tail_of(const fs::path& file, std::size_t max_lines = 5) {
    std::ifstream in(file);
    std::vector<std::string> lines;
    for (std::string line; std::getline(in, line);) {
        lines.push_back(line);
        if (lines.size() > max_lines) lines.erase(lines.begin());
    }
    std::string out;
    for (const auto& l : lines) out += (out.empty() ? "" : "; ") + l;
    return out;
}

pid_t spawn_detached(const fs::path& exe, const store::StateRoot& root, const std::string& cluster) {
    const fs::path log = root.cluster_dir(cluster) / "controller.log";
    posix_spawn_file_actions_t actions;
    posix_spawn_file_actions_init(&actions);
    posix_spawn_file_actions_addopen(&actions, 0, "/dev/null", O_RDONLY, 0);
    posix_spawn_file_actions_addopen(&actions, 1, log.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
    posix_spawn_file_actions_adddup2(&actions, 1, 2);
    posix_spawnattr_t attr;
    posix_spawnattr_init(&attr);
    sigset_t none;
    sigemptyset(&none);
    posix_spawnattr_setsigmask(&attr, &none);
    posix_spawnattr_setflags(&attr, POSIX_SPAWN_SETSID | POSIX_SPAWN_SETSIGMASK);

    std::vector<std::string> args = {exe.string(), "--home", root.path().string(), "controller", "serve",
                                     "-n",         cluster};
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    argv.push_back(nullptr);
    pid_t pid = -1;
    const int rc = posix_spawn(&pid, exe.c_str(), &actions, &attr, argv.data(), environ);
    posix_spawn_file_actions_destroy(&actions);
    posix_spawnattr_destroy(&attr);
    if (rc != 0) throw Error(ErrorKind::internal, "cannot start controller: " + std::string(std::strerror(rc)));
    return pid;
}

std::optional<api::ApiClient> reachable_endpoint(const provider::Provider& provider, const std::string& cluster) {
    const auto state = provider.load_cluster(cluster);
    if (!state.controller_endpoint) return std::nullopt;
    api::ApiClient client(*state.controller_endpoint);
    if (!client.reachable()) return std::nullopt;
    return client;
}

}  // namespace

void serve(store::StateRoot& root, provider::Provider& provider, const ServeOptions& options, std::ostream& log) {
    provider.load_cluster(options.cluster);
    FileLock lock(lock_path(root, options.cluster), FileLock::Mode::try_once);
    if (!lock.held()) {
        throw Error(ErrorKind::conflict, "controller already running for cluster '" + options.cluster + "'");
    }

    sigset_t stop_signals;
    sigemptyset(&stop_signals);
    sigaddset(&stop_signals, SIGTERM);
    sigaddset(&stop_signals, SIGINT);
    pthread_sigmask(SIG_BLOCK, &stop_signals, nullptr);
    ::signal(SIGPIPE, SIG_IGN);

    controller::Controller controller(root, provider, options.cluster, options.controller);
    controller.start();
    api::ApiServer server(controller, root);
    const std::string endpoint = server.start(options.port);
    controller.set_endpoint(endpoint, static_cast<int>(::getpid()));
    log << "controller for cluster " << options.cluster << " listening on " << endpoint << " (pid " << ::getpid()
        << ")" << std::endl;

    int signo = 0;
    sigwait(&stop_signals, &signo);
    log << "received signal " << signo << ", shutting down" << std::endl;
    server.stop();
    const std::size_t killed = controller.shutdown();
    log << "controller stopped, killed " << killed << " runs" << std::endl;
}

std::optional<api::ApiClient> find_controller(const store::StateRoot& root, const provider::Provider& provider,
                                              const std::string& cluster) {
    const auto deadline = std::chrono::steady_clock::now() + kStartupWait;
    while (controller_running(root, cluster)) {
        if (auto client = reachable_endpoint(provider, cluster)) return client;
        if (std::chrono::steady_clock::now() > deadline) {
            throw Error(ErrorKind::unavailable, "controller for cluster '" + cluster + "' is not responding");
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(20));
    }
    return std::nullopt;
}

api::ApiClient ensure_controller(const store::StateRoot& root, const provider::Provider& provider,
                                 const std::string& cluster, const fs::path& exe) {
    provider.load_cluster(cluster);
    for (int attempt = 0; attempt < 3; ++attempt) {
        if (auto client = find_controller(root, provider, cluster)) return *client;
        const pid_t pid = spawn_detached(exe, root, cluster);
        const auto deadline = std::chrono::steady_clock::now() + kStartupWait;
        bool exited = false;
        while (std::chrono::steady_clock::now() < deadline) {
            if (auto client = reachable_endpoint(provider, cluster)) return *client;
            int status = 0;
            if (!exited && ::waitpid(pid, &status, WNOHANG) == pid) exited = true;
            if (exited && !controller_running(root, cluster)) break;
            std::this_thread::sleep_for(std::chrono::milliseconds(20));
        }
        if (!exited) {
            throw Error(ErrorKind::internal, "controller for cluster '" + cluster + "' did not start: " +
                                                 tail_of(root.cluster_dir(cluster) / "controller.log"));
        }
    }
    throw Error(ErrorKind::internal, "controller for cluster '" + cluster +
                                         "' exited during startup: " +
                                         tail_of(root.cluster_dir(cluster) / "controller.log"));
}

std::size_t stop_controller(const store::StateRoot& root, const provider::ClusterState& cluster,
                            std::chrono::seconds timeout) {
    if (!controller_running(root, cluster.name)) return 0;
    const fs::path journal = root.cluster_dir(cluster.name) / "runs.jsonl";

    std::optional<int> pid = cluster.controller_pid;
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    while (!pid && std::chrono::steady_clock::now() < deadline) {
        std::this_thread::sleep_for(std::chrono::milliseconds(20));
        std::ifstream in(root.cluster_dir(cluster.name) / "cluster.json");
        const auto j = json::parse(in, nullptr, false);
        if (j.is_object() && j.contains("controller_pid") && j["controller_pid"].is_number_integer()) {
            pid = j["controller_pid"].get<int>();
        }
        if (!controller_running(root, cluster.name)) return 0;
    }
    if (!pid) throw Error(ErrorKind::unavailable, "controller of cluster '" + cluster.name + "' has no pid");

    std::error_code ec;
    const auto offset = fs::exists(journal, ec) ? fs::file_size(journal, ec) : 0;
    ::kill(*pid, SIGTERM);
    while (controller_running(root, cluster.name)) {
        if (std::chrono::steady_clock::now() > deadline) {
            throw Error(ErrorKind::unavailable,
                        "controller of cluster '" + cluster.name + "' did not stop (pid " + std::to_string(*pid) + ")");
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(20));
    }

    std::size_t killed = 0;
    std::ifstream in(journal, std::ios::binary);
    in.seekg(static_cast<std::streamoff>(offset));
    for (std::string line; std::getline(in, line);) {
        const auto j = json::parse(line, nullptr, false);
        if (!j.is_object() || j.value("state", "") != "killed" || !j["exit"].is_object()) continue;
        if (j["exit"].value("reason", "") == "controller shutdown") ++killed;
    }
    return killed;
}

}  // namespace orchestrate::cli
