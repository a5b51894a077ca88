#include "orchestrate/executor/execution.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cctype>
#include <cerrno>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "orchestrate/error.hpp"

extern char** environ;

namespace orchestrate::executor {

namespace fs = std::filesystem;
using nlohmann::json;
using Clock = std::chrono::steady_clock;

std::string join_gpu_slots(const std::vector<int>& slots) {
    std::string out;
    for (std::size_t i = 0; i < slots.size(); ++i) out += (i ? "," : "") + std::to_string(slots[i]);
    return out;
}

// --- outcome ---------------------------------------------------------------

namespace {

bool mentions_non_finite(const std::string& text) {
    std::string lower;
    for (char c : text) lower += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return lower.find("nan") != std::string::npos || lower.find("inf") != std::string::npos;
}

}  // namespace

Outcome collect_outcome(std::optional<int> exit_code, std::optional<int> signal, const fs::path& observation_file,
                        const std::optional<std::string>& killed_reason) {
    if (killed_reason) return Outcome::killed(*killed_reason);

    std::optional<json> doc;
    std::string text;
    bool present = false;
    if (std::ifstream in{observation_file}) {
        present = true;
        std::stringstream ss;
        ss << in.rdbuf();
        text = ss.str();
        try {
            doc = json::parse(text);
        } catch (const json::parse_error&) {
        }
    }
    if (doc && doc->is_object() && doc->contains("failed") && (*doc)["failed"].is_boolean() &&
        (*doc)["failed"].get<bool>()) {
        Outcome o = Outcome::failed("model reported failure", exit_code);
        return o;
    }
    if (signal) return Outcome::failed("terminated by signal " + std::to_string(*signal));
    if (exit_code && *exit_code != 0) return Outcome::failed("exit status " + std::to_string(*exit_code), exit_code);

    if (!present) return Outcome::failed("missing observation", 0);
    if (!doc) {
        return Outcome::failed(mentions_non_finite(text) ? "non-finite metric" : "missing observation", 0);
    }
    if (!doc->is_object() || !doc->contains("value")) return Outcome::failed("missing observation", 0);
    const json& v = (*doc)["value"];
    if (v.is_number()) {
        const double d = v.get<double>();
        if (!std::isfinite(d)) return Outcome::failed("non-finite metric", 0);
        Outcome o = Outcome::succeeded(d);
        return o;
    }
    if (v.is_string()) {
        char* end = nullptr;
        const std::string s = v.get<std::string>();
        const double d = std::strtod(s.c_str(), &end);
        if (end != s.c_str() && !std::isfinite(d)) return Outcome::failed("non-finite metric", 0);
    }
    return Outcome::failed("missing observation", 0);
}

// --- line splitting --------------------------------------------------------

void LineSplitter::feed(std::string_view bytes) {
    while (!bytes.empty()) {
        const auto nl = bytes.find('\n');
        const std::string_view chunk = bytes.substr(0, nl);
        if (!discarding_) {
            const std::size_t room = kMaxLineBytes - buf_.size();
            if (chunk.size() > room) {
                buf_.append(chunk.substr(0, room));
                buf_.append(kTruncatedMarker);
                emit_(std::move(buf_));
                buf_.clear();
                discarding_ = true;
            } else {
                buf_.append(chunk);
            }
        }
        if (nl == std::string_view::npos) return;
        if (!discarding_) emit_(std::move(buf_));
        buf_.clear();
        discarding_ = false;
        bytes.remove_prefix(nl + 1);
    }
}

void LineSplitter::finish() {
    if (!discarding_ && !buf_.empty()) emit_(std::move(buf_));
    buf_.clear();
    discarding_ = false;
}

// --- processes -------------------------------------------------------------

namespace {

struct SpawnResources {
    posix_spawn_file_actions_t actions;
    posix_spawnattr_t attr;
    SpawnResources() {
        posix_spawn_file_actions_init(&actions);
        posix_spawnattr_init(&attr);
    }
    ~SpawnResources() {
        posix_spawn_file_actions_destroy(&actions);
        posix_spawnattr_destroy(&attr);
    }
};

// True while any process other than the (exited, unreaped) leader in the
// group is not yet a zombie.
bool group_has_live_members(int pgid) {
    std::error_code ec;
    for (const auto& entry : fs::directory_iterator("/proc", ec)) {
        const std::string name = entry.path().filename().string();
        if (name.empty() || !std::isdigit(static_cast<unsigned char>(name[0])) || name == std::to_string(pgid)) continue;
        std::ifstream stat(entry.path() / "stat");
        std::string content;
        if (!std::getline(stat, content)) continue;
        const auto close = content.rfind(')');
        if (close == std::string::npos) continue;
        std::istringstream rest(content.substr(close + 2));
        char state = 0;
        long ppid = 0, group = 0;
        rest >> state >> ppid >> group;
        if (group == pgid && state != 'Z' && state != 'X') return true;
    }
    return false;
}

void close_fd(int& fd) {
    if (fd >= 0) ::close(fd);
    fd = -1;
}

}  // namespace

std::unique_ptr<ProcessHandle> ProcessHandle::launch(const LaunchContext& ctx, const RunSpec& spec,
                                                     ExecutionCallbacks callbacks, std::string& error) {
    std::unique_ptr<ProcessHandle> h(new ProcessHandle());
    h->callbacks_ = std::move(callbacks);

    std::error_code ec;
    fs::create_directories(ctx.scratch_dir, ec);
    const fs::path suggestion_file = ctx.scratch_dir / "suggestion.json";
    h->observation_file_ = ctx.scratch_dir / "observation.json";
    fs::remove(h->observation_file_, ec);
    {
        std::ofstream out(suggestion_file, std::ios::trunc);
        out << optimizer::assignment_to_json(ctx.assignment).dump() << '\n';
        if (!out) {
            error = "spawn error: cannot write suggestion file " + suggestion_file.string();
            return nullptr;
        }
    }

    std::map<std::string, std::string> env;
    for (char** e = environ; *e; ++e) {
        const std::string kv(*e);
        const auto eq = kv.find('=');
        if (eq != std::string::npos) env[kv.substr(0, eq)] = kv.substr(eq + 1);
    }
    for (const auto& [k, v] : spec.env) env[k] = v;
    env[kEnvExperimentId] = ctx.experiment_id;
    env[kEnvRunId] = ctx.run_id;
    env[kEnvSuggestionFile] = fs::absolute(suggestion_file).string();
    env[kEnvObservationFile] = fs::absolute(h->observation_file_).string();
    env[kEnvAssignedGpus] = join_gpu_slots(ctx.gpu_slots);
    std::vector<std::string> env_strings;
    for (const auto& [k, v] : env) env_strings.push_back(k + "=" + v);
    std::vector<char*> envp;
    for (auto& s : env_strings) envp.push_back(s.data());
    envp.push_back(nullptr);
    std::vector<std::string> args = spec.command;
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    argv.push_back(nullptr);

    int out_pipe[2], err_pipe[2];
    if (::pipe2(out_pipe, O_CLOEXEC) != 0) {
        error = std::string("spawn error: pipe: ") + std::strerror(errno);
        return nullptr;
    }
    if (::pipe2(err_pipe, O_CLOEXEC) != 0) {
        error = std::string("spawn error: pipe: ") + std::strerror(errno);
        ::close(out_pipe[0]);
        ::close(out_pipe[1]);
        return nullptr;
    }

    SpawnResources res;
    posix_spawn_file_actions_addopen(&res.actions, 0, "/dev/null", O_RDONLY, 0);
    posix_spawn_file_actions_adddup2(&res.actions, out_pipe[1], 1);
    posix_spawn_file_actions_adddup2(&res.actions, err_pipe[1], 2);
    if (!spec.workdir.empty()) posix_spawn_file_actions_addchdir_np(&res.actions, spec.workdir.c_str());
    sigset_t none, defaults;
    sigemptyset(&none);
    sigemptyset(&defaults);
    for (int sig : {SIGPIPE, SIGTERM, SIGINT, SIGHUP, SIGCHLD}) sigaddset(&defaults, sig);
    posix_spawnattr_setsigmask(&res.attr, &none);
    posix_spawnattr_setsigdefault(&res.attr, &defaults);
    posix_spawnattr_setpgroup(&res.attr, 0);
    posix_spawnattr_setflags(&res.attr, POSIX_SPAWN_SETPGROUP | POSIX_SPAWN_SETSIGMASK | POSIX_SPAWN_SETSIGDEF);

    pid_t pid = -1;
    const int rc = ::posix_spawnp(&pid, argv[0], &res.actions, &res.attr, argv.data(), envp.data());
    ::close(out_pipe[1]);
    ::close(err_pipe[1]);
    if (rc != 0) {
        ::close(out_pipe[0]);
        ::close(err_pipe[0]);
        error = "spawn error: " + spec.command.front() + ": " + std::strerror(rc);
        return nullptr;
    }
    h->pid_ = pid;
    h->out_fd_ = out_pipe[0];
    h->err_fd_ = err_pipe[0];
    h->started_ = Clock::now();
    if (spec.timeout) h->deadline_ = h->started_ + *spec.timeout;
    ProcessHandle* raw = h.get();
    h->out_reader_ = std::thread([raw] { raw->read_stream(raw->out_fd_, store::LogStream::stdout_stream); });
    h->err_reader_ = std::thread([raw] { raw->read_stream(raw->err_fd_, store::LogStream::stderr_stream); });
    h->supervisor_ = std::thread([raw] { raw->supervise(); });
    return h;
}

ProcessHandle::~ProcessHandle() {
    if (!finished()) kill("executor shutdown", std::chrono::milliseconds(0));
    join();
}

void ProcessHandle::kill(const std::string& reason, std::chrono::milliseconds grace) {
    std::lock_guard lock(mu_);
    if (kill_reason_ || done_) return;
    kill_reason_ = reason;
    hard_kill_at_ = Clock::now() + grace;
    ::killpg(pid_, SIGTERM);
    cv_.notify_all();
}

void ProcessHandle::join() {
    for (std::thread* t : {&supervisor_, &out_reader_, &err_reader_}) {
        if (t->joinable() && t->get_id() != std::this_thread::get_id()) t->join();
    }
}

bool ProcessHandle::finished() const {
    std::lock_guard lock(mu_);
    return done_;
}

void ProcessHandle::read_stream(int fd, store::LogStream stream) {
    LineSplitter splitter([&](std::string line) {
        if (callbacks_.on_line) callbacks_.on_line(stream, std::move(line));
    });
    char buf[65536];
    for (;;) {
        pollfd p{fd, POLLIN, 0};
        const int ready = ::poll(&p, 1, 50);
        if (ready < 0 && errno != EINTR) break;
        if (ready <= 0) {
            std::lock_guard lock(mu_);
            if (readers_deadline_ && Clock::now() >= *readers_deadline_) break;
            continue;
        }
        const ssize_t n = ::read(fd, buf, sizeof buf);
        if (n < 0 && errno == EINTR) continue;
        if (n <= 0) break;
        splitter.feed(std::string_view(buf, static_cast<std::size_t>(n)));
    }
    splitter.finish();
}

void ProcessHandle::supervise() {
    bool hard_killed = false;
    for (;;) {
        siginfo_t info{};
        // Detect exit without reaping, so the group id stays reserved until
        // the stragglers are killed below.
        if (::waitid(P_PID, static_cast<id_t>(pid_), &info, WEXITED | WNOHANG | WNOWAIT) == 0 && info.si_pid == pid_) {
            break;
        }
        std::unique_lock lock(mu_);
        const auto now = Clock::now();
        if (!kill_reason_ && deadline_ && now >= *deadline_) {
            kill_reason_ = "timeout";
            hard_kill_at_ = now + kDefaultGrace;
            ::killpg(pid_, SIGTERM);
        }
        if (kill_reason_ && !hard_killed && now >= hard_kill_at_) {
            ::killpg(pid_, SIGKILL);
            hard_killed = true;
        }
        cv_.wait_for(lock, std::chrono::milliseconds(5));
    }
    ::killpg(pid_, SIGKILL);
    // Let killed group members finish exiting (bounded: reparented zombies
    // stay group members until their new parent reaps them).
    for (int i = 0; i < 40 && group_has_live_members(pid_); ++i) std::this_thread::sleep_for(std::chrono::milliseconds(5));
    int status = 0;
    while (::waitpid(pid_, &status, 0) < 0 && errno == EINTR) {
    }
    const auto exited_at = Clock::now();

    // Readers see EOF once every writer is gone; stragglers that left the
    // group get a short deadline.
    {
        std::lock_guard lock(mu_);
        readers_deadline_ = Clock::now() + std::chrono::seconds(2);
    }
    out_reader_.join();
    err_reader_.join();
    close_fd(out_fd_);
    close_fd(err_fd_);

    std::optional<int> code, sig;
    if (WIFEXITED(status)) code = WEXITSTATUS(status);
    if (WIFSIGNALED(status)) sig = WTERMSIG(status);
    std::optional<std::string> killed;
    {
        std::lock_guard lock(mu_);
        killed = kill_reason_;
    }
    Outcome outcome = collect_outcome(code, sig, observation_file_, killed);
    outcome.duration = std::chrono::duration_cast<std::chrono::microseconds>(exited_at - started_);
    if (callbacks_.on_exit) callbacks_.on_exit(std::move(outcome));
    std::lock_guard lock(mu_);
    done_ = true;
}

// --- synthetic -------------------------------------------------------------

Outcome evaluate_synthetic(const SyntheticSpec& spec, const optimizer::Assignment& assignment) {
    const nlohmann::json params = spec.params.is_object() ? spec.params : nlohmann::json::object();
    const double center = params.value("center", 0.3);
    auto numeric = [](const optimizer::ParamValue& v) -> std::optional<double> {
        if (const double* d = std::get_if<double>(&v)) return *d;
        if (const std::int64_t* i = std::get_if<std::int64_t>(&v)) return static_cast<double>(*i);
        return std::nullopt;
    };
    auto negated_quadratic = [&](double c) {
        double sum = 0;
        for (const auto& [name, v] : assignment) {
            if (auto x = numeric(v)) sum += (*x - c) * (*x - c);
        }
        return -sum;
    };
    if (spec.objective == "sphere") return Outcome::succeeded(negated_quadratic(0.0));
    if (spec.objective == "step_failure") {
        const std::string param = params.at("parameter").get<std::string>();
        const double threshold = params.at("fail_if_below").get<double>();
        auto it = assignment.find(param);
        if (it != assignment.end()) {
            if (auto x = numeric(it->second); x && *x < threshold) {
                return Outcome::failed(param + " below " + json(threshold).dump(), 1);
            }
        }
        return Outcome::succeeded(negated_quadratic(center));
    }
    if (spec.objective == "negated_quadratic") return Outcome::succeeded(negated_quadratic(center));
    throw Error(ErrorKind::invalid_argument, "unknown objective '" + spec.objective + "'", "synthetic.objective");
}

SyntheticEngine::SyntheticEngine() : thread_([this] { loop(); }) {}

SyntheticEngine::~SyntheticEngine() {
    {
        std::lock_guard lock(mu_);
        stop_ = true;
    }
    cv_.notify_all();
    thread_.join();
}

void SyntheticEngine::launch(const LaunchContext& ctx, const SyntheticSpec& spec, ExecutionCallbacks callbacks) {
    auto job = std::make_shared<Job>();
    job->run_id = ctx.run_id;
    job->outcome = evaluate_synthetic(spec, ctx.assignment);
    job->outcome.duration = std::chrono::duration_cast<std::chrono::microseconds>(spec.duration);
    const long long lines = spec.params.is_object() ? spec.params.value("log_lines", 0LL) : 0LL;
    const std::string shown = optimizer::format_assignment(ctx.assignment);
    for (long long i = 0; i < lines; ++i) {
        job->lines.push_back("step " + std::to_string(i + 1) + "/" + std::to_string(lines) + " " + shown);
    }
    job->start = Clock::now();
    job->end = job->start + spec.duration;
    job->callbacks = std::move(callbacks);
    std::lock_guard lock(mu_);
    jobs_[job->run_id] = job;
    timers_.push({job->end, order_++, job->run_id});
    for (std::size_t i = 0; i < job->lines.size(); ++i) {
        const auto at = job->start + spec.duration * static_cast<long long>(i) / static_cast<long long>(job->lines.size());
        timers_.push({at, order_++, job->run_id});
    }
    cv_.notify_all();
}

void SyntheticEngine::kill(const std::string& run_id, const std::string& reason) {
    std::shared_ptr<Job> job;
    {
        std::lock_guard lock(mu_);
        auto it = jobs_.find(run_id);
        if (it == jobs_.end()) return;
        job = it->second;
        jobs_.erase(it);
    }
    Outcome o = Outcome::killed(reason);
    o.duration = std::chrono::duration_cast<std::chrono::microseconds>(Clock::now() - job->start);
    std::lock_guard cb(job->callback_mu);
    job->exited = true;
    if (job->callbacks.on_exit) job->callbacks.on_exit(std::move(o));
}

std::size_t SyntheticEngine::active() const {
    std::lock_guard lock(mu_);
    return jobs_.size();
}

void SyntheticEngine::loop() {
    std::unique_lock lock(mu_);
    while (!stop_) {
        if (timers_.empty()) {
            cv_.wait(lock);
            continue;
        }
        const Wakeup next = timers_.top();
        if (Clock::now() < next.at) {
            cv_.wait_until(lock, next.at);
            continue;
        }
        timers_.pop();
        auto it = jobs_.find(next.run_id);
        if (it == jobs_.end()) continue;  // killed
        std::shared_ptr<Job> job = it->second;
        const auto now = Clock::now();
        const bool finishing = now >= job->end;
        if (finishing) jobs_.erase(it);
        // Callbacks run unlocked so they may call back into the engine.
        lock.unlock();
        {
            std::lock_guard cb(job->callback_mu);
            const std::size_t n = job->lines.size();
            while (!job->exited && job->next_line < n &&
                   (finishing || job->start + (job->end - job->start) * static_cast<long long>(job->next_line) /
                                                     static_cast<long long>(n) <=
                                     now)) {
                if (job->callbacks.on_line) {
                    job->callbacks.on_line(store::LogStream::stdout_stream, job->lines[job->next_line]);
                }
                ++job->next_line;
            }
            if (finishing && !job->exited) {
                job->exited = true;
                if (job->callbacks.on_exit) job->callbacks.on_exit(job->outcome);
            }
        }
        lock.lock();
    }
}

// --- supervisor ------------------------------------------------------------

RunSupervisor::~RunSupervisor() {
    std::vector<std::string> ids;
    {
        std::lock_guard lock(mu_);
        for (const auto& [id, h] : processes_) ids.push_back(id);
        for (const auto& [id, b] : synthetic_runs_) ids.push_back(id);
    }
    for (const auto& id : ids) kill(id, "executor shutdown");
    wait_for(ids, grace_ * 2 + std::chrono::seconds(1));
    std::map<std::string, std::unique_ptr<ProcessHandle>> left;
    std::vector<std::unique_ptr<ProcessHandle>> reaped;
    {
        std::lock_guard lock(mu_);
        left.swap(processes_);
        reaped.swap(reaped_);
    }
}

std::optional<std::string> RunSupervisor::launch(const LaunchContext& ctx, const std::optional<RunSpec>& run,
                                                 const std::optional<SyntheticSpec>& synthetic,
                                                 ExecutionCallbacks callbacks) {
    {
        std::vector<std::unique_ptr<ProcessHandle>> reaped;
        {
            std::lock_guard lock(mu_);
            reaped.swap(reaped_);
        }
    }
    const std::string run_id = ctx.run_id;
    ExecutionCallbacks wrapped{std::move(callbacks.on_line), [this, run_id, on_exit = std::move(callbacks.on_exit)](
                                                                 Outcome o) {
                                   if (on_exit) on_exit(std::move(o));
                                   finished(run_id);
                               }};
    if (synthetic) {
        {
            std::lock_guard lock(mu_);
            synthetic_runs_[run_id] = true;
        }
        synthetic_.launch(ctx, *synthetic, std::move(wrapped));
        return std::nullopt;
    }
    if (!run) return "spawn error: no run specification";
    std::string error;
    std::lock_guard lock(mu_);
    auto handle = ProcessHandle::launch(ctx, *run, std::move(wrapped), error);
    if (!handle) return error;
    processes_[run_id] = std::move(handle);
    return std::nullopt;
}

void RunSupervisor::finished(const std::string& run_id) {
    std::lock_guard lock(mu_);
    if (auto it = processes_.find(run_id); it != processes_.end()) {
        reaped_.push_back(std::move(it->second));
        processes_.erase(it);
    }
    synthetic_runs_.erase(run_id);
    cv_.notify_all();
}

void RunSupervisor::kill(const std::string& run_id, const std::string& reason) {
    {
        std::lock_guard lock(mu_);
        if (auto it = processes_.find(run_id); it != processes_.end()) {
            it->second->kill(reason, grace_);
            return;
        }
        if (!synthetic_runs_.contains(run_id)) return;
    }
    synthetic_.kill(run_id, reason);
}

bool RunSupervisor::wait_for(const std::vector<std::string>& run_ids, std::chrono::milliseconds timeout) {
    std::unique_lock lock(mu_);
    return cv_.wait_for(lock, timeout, [&] {
        for (const auto& id : run_ids) {
            if (processes_.contains(id) || synthetic_runs_.contains(id)) return false;
        }
        return true;
    });
}

std::size_t RunSupervisor::active() const {
    std::lock_guard lock(mu_);
    return processes_.size() + synthetic_runs_.size();
}

}  // namespace orchestrate::executor
