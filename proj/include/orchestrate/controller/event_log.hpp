#pragma once

#include <chrono>
#include <condition_variable>
#include <deque>
#include <mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "orchestrate/clock.hpp"

namespace orchestrate::controller {

/// A state change the dashboard can follow. `seq` is global and strictly
/// increasing, so per-run sequences increase too.
struct Event {
    std::uint64_t seq = 0;
    Timestamp at = 0;
    std::string type;  // experiment_created | experiment_state | run_state | observation
    std::string experiment_id;
    std::string run_id;
    nlohmann::json data;
};

nlohmann::json to_json(const Event& e);

/// In-memory, bounded, long-pollable event history. Thread-safe.
class EventLog {
public:
    explicit EventLog(std::size_t capacity = 100'000) : capacity_(capacity) {}

    std::uint64_t publish(std::string type, std::string experiment_id, std::string run_id, nlohmann::json data);
    /// Events with seq > `after`, oldest first.
    std::vector<Event> since(std::uint64_t after, std::size_t max = SIZE_MAX) const;
    /// Waits for an event with seq > `after`. Returns false on timeout.
    bool wait(std::uint64_t after, std::chrono::milliseconds timeout) const;
    std::uint64_t last_seq() const;
    /// Oldest seq still held (0 when empty); earlier events were dropped.
    std::uint64_t first_seq() const;

private:
    std::size_t capacity_;
    mutable std::mutex mu_;
    mutable std::condition_variable cv_;
    std::deque<Event> events_;
    std::uint64_t last_ = 0;
};

}  // namespace orchestrate::controller
