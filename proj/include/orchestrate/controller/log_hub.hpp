#pragma once

#include <chrono>
#include <condition_variable>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include "orchestrate/store/state_root.hpp"

namespace orchestrate::controller {

/// Per-experiment log channels of one cluster. Appends go to the store and
/// to an in-memory copy that followers read and wait on. Thread-safe.
class LogHub {
public:
    LogHub(store::StateRoot& store, std::string cluster) : store_(store), cluster_(std::move(cluster)) {}

    /// Assigns seq (per run and stream) and cursor (per experiment).
    store::LogRecord append(const std::string& experiment_id, const std::string& run_id, store::LogStream stream,
                            std::string line);

    /// Records with cursor >= `since`, oldest first, at most `max`.
    std::vector<store::LogRecord> since(const std::string& experiment_id, std::uint64_t since,
                                        std::size_t max = SIZE_MAX);

    /// Waits until a record with cursor >= `since` exists or the channel is
    /// closed. Returns false on timeout.
    bool wait(const std::string& experiment_id, std::uint64_t since, std::chrono::milliseconds timeout);

    /// No more records will arrive (experiment terminal and its runs drained).
    void close(const std::string& experiment_id);
    bool closed(const std::string& experiment_id);
    /// Reopens a channel (experiment resumed after a controller restart).
    void reopen(const std::string& experiment_id);

    void close_run(const std::string& experiment_id, const std::string& run_id);

private:
    struct Channel {
        bool loaded = false;
        bool closed = false;
        std::uint64_t next_cursor = 0;
        std::map<std::pair<std::string, store::LogStream>, std::uint64_t> next_seq;
        std::vector<store::LogRecord> records;  // ordered by cursor
    };
    Channel& channel(const std::string& experiment_id);  // requires mu_

    store::StateRoot& store_;
    std::string cluster_;
    std::mutex mu_;
    std::condition_variable cv_;
    std::map<std::string, Channel> channels_;
};

}  // namespace orchestrate::controller
