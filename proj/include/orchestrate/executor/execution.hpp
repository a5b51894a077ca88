#pragma once

#include <chrono>
#include <condition_variable>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <queue>
#include <string>
#include <thread>
#include <vector>

#include "orchestrate/executor/run_spec.hpp"
#include "orchestrate/optimizer/space.hpp"
#include "orchestrate/store/records.hpp"

namespace orchestrate::executor {

inline constexpr std::size_t kMaxLineBytes = 1 << 20;
inline constexpr std::string_view kTruncatedMarker = " [line truncated]";
inline constexpr std::chrono::milliseconds kDefaultGrace{5000};

/// What a launched run needs to know about itself.
struct LaunchContext {
    std::string experiment_id;
    std::string run_id;
    optimizer::Assignment assignment;
    std::vector<int> gpu_slots;
    std::filesystem::path scratch_dir;  // holds the suggestion and observation files
};

/// Callbacks fire on executor threads. on_line is ordered within each
/// stream; on_exit fires exactly once, after the run's last on_line.
struct ExecutionCallbacks {
    std::function<void(store::LogStream, std::string)> on_line;
    std::function<void(Outcome)> on_exit;
};

/// Environment variables of the model protocol.
inline constexpr const char* kEnvExperimentId = "ORCHESTRATE_EXPERIMENT_ID";
inline constexpr const char* kEnvRunId = "ORCHESTRATE_RUN_ID";
inline constexpr const char* kEnvSuggestionFile = "ORCHESTRATE_SUGGESTION_FILE";
inline constexpr const char* kEnvObservationFile = "ORCHESTRATE_OBSERVATION_FILE";
inline constexpr const char* kEnvAssignedGpus = "ORCHESTRATE_ASSIGNED_GPUS";

std::string join_gpu_slots(const std::vector<int>& slots);

/// Reads the observation file after a normal exit and classifies the run.
/// `killed_reason` set means the executor killed the process.
Outcome collect_outcome(std::optional<int> exit_code, std::optional<int> signal,
                        const std::filesystem::path& observation_file,
                        const std::optional<std::string>& killed_reason);

/// Splits a byte stream into lines, truncating lines over kMaxLineBytes.
class LineSplitter {
public:
    explicit LineSplitter(std::function<void(std::string)> emit) : emit_(std::move(emit)) {}
    void feed(std::string_view bytes);
    void finish();  // flushes a final unterminated line

private:
    std::function<void(std::string)> emit_;
    std::string buf_;
    bool discarding_ = false;
};

/// One model process in its own process group, supervised by a thread that
/// enforces the timeout and kill requests. stdout/stderr are read by two
/// more threads.
class ProcessHandle {
public:
    /// Writes the suggestion file and spawns. Returns nullptr and sets
    /// `error` when the process cannot be started.
    static std::unique_ptr<ProcessHandle> launch(const LaunchContext& ctx, const RunSpec& spec,
                                                 ExecutionCallbacks callbacks, std::string& error);
    ~ProcessHandle();
    ProcessHandle(const ProcessHandle&) = delete;
    ProcessHandle& operator=(const ProcessHandle&) = delete;

    /// SIGTERM to the process group, SIGKILL after `grace`. Idempotent.
    void kill(const std::string& reason, std::chrono::milliseconds grace = kDefaultGrace);
    /// Blocks until on_exit has returned.
    void join();
    bool finished() const;
    int pid() const noexcept { return pid_; }

private:
    ProcessHandle() = default;
    void supervise();
    void read_stream(int fd, store::LogStream stream);

    int pid_ = -1;
    int out_fd_ = -1;
    int err_fd_ = -1;
    std::filesystem::path observation_file_;
    std::optional<std::chrono::steady_clock::time_point> deadline_;
    std::chrono::steady_clock::time_point started_;
    ExecutionCallbacks callbacks_;

    mutable std::mutex mu_;
    std::condition_variable cv_;
    std::optional<std::string> kill_reason_;
    std::chrono::steady_clock::time_point hard_kill_at_;
    bool done_ = false;
    std::optional<std::chrono::steady_clock::time_point> readers_deadline_;

    std::thread out_reader_, err_reader_, supervisor_;
};

/// Built-in objective evaluation. Pure.
Outcome evaluate_synthetic(const SyntheticSpec& spec, const optimizer::Assignment& assignment);

/// Runs synthetic evaluations on one timer thread: each run completes (and
/// emits its optional log lines) after its simulated duration.
class SyntheticEngine {
public:
    SyntheticEngine();
    ~SyntheticEngine();
    SyntheticEngine(const SyntheticEngine&) = delete;
    SyntheticEngine& operator=(const SyntheticEngine&) = delete;

    void launch(const LaunchContext& ctx, const SyntheticSpec& spec, ExecutionCallbacks callbacks);
    /// Completes the run as killed right away. No-op for unknown runs.
    void kill(const std::string& run_id, const std::string& reason);
    std::size_t active() const;

private:
    struct Job {
        std::string run_id;
        Outcome outcome;
        std::vector<std::string> lines;
        std::size_t next_line = 0;
        std::chrono::steady_clock::time_point start, end;
        ExecutionCallbacks callbacks;
        std::mutex callback_mu;
        bool exited = false;
    };
    using Clock = std::chrono::steady_clock;
    struct Wakeup {
        Clock::time_point at;
        std::uint64_t order;
        std::string run_id;
        bool operator>(const Wakeup& o) const { return std::tie(at, order) > std::tie(o.at, o.order); }
    };

    void loop();

    mutable std::mutex mu_;
    std::condition_variable cv_;
    std::map<std::string, std::shared_ptr<Job>> jobs_;
    std::priority_queue<Wakeup, std::vector<Wakeup>, std::greater<>> timers_;
    std::uint64_t order_ = 0;
    bool stop_ = false;
    std::thread thread_;
};

/// Dispatches runs to a process or the synthetic engine and tracks them by
/// run id. Thread-safe.
class RunSupervisor {
public:
    explicit RunSupervisor(std::chrono::milliseconds grace = kDefaultGrace) : grace_(grace) {}
    ~RunSupervisor();

    /// Returns an error reason ("spawn error: ...") if the run could not be
    /// started; no callbacks fire in that case.
    std::optional<std::string> launch(const LaunchContext& ctx, const std::optional<RunSpec>& run,
                                      const std::optional<SyntheticSpec>& synthetic, ExecutionCallbacks callbacks);
    void kill(const std::string& run_id, const std::string& reason);
    /// Waits until none of `run_ids` is executing, up to `timeout`. Returns
    /// true when all have finished.
    bool wait_for(const std::vector<std::string>& run_ids, std::chrono::milliseconds timeout);
    std::size_t active() const;
    std::chrono::milliseconds grace() const noexcept { return grace_; }

private:
    void finished(const std::string& run_id);

    std::chrono::milliseconds grace_;
    SyntheticEngine synthetic_;
    mutable std::mutex mu_;
    std::condition_variable cv_;
    std::map<std::string, std::unique_ptr<ProcessHandle>> processes_;
    std::map<std::string, bool> synthetic_runs_;
    std::vector<std::unique_ptr<ProcessHandle>> reaped_;
};

}  // namespace orchestrate::executor
