#include "orchestrate/controller/event_log.hpp"

#include <algorithm>

namespace orchestrate::controller {

nlohmann::json to_json(const Event& e) {
    return {{"seq", e.seq},          {"at", e.at},         {"type", e.type},
            {"experiment_id", e.experiment_id}, {"run_id", e.run_id}, {"data", e.data}};
}

std::uint64_t EventLog::publish(std::string type, std::string experiment_id, std::string run_id,
                                nlohmann::json data) {
    std::uint64_t seq;
    {
        std::lock_guard lock(mu_);
        seq = ++last_;
        events_.push_back({seq, now_us(), std::move(type), std::move(experiment_id), std::move(run_id), std::move(data)});
        while (events_.size() > capacity_) events_.pop_front();
    }
    cv_.notify_all();
    return seq;
}

std::vector<Event> EventLog::since(std::uint64_t after, std::size_t max) const {
    std::lock_guard lock(mu_);
    std::vector<Event> out;
    auto it = std::upper_bound(events_.begin(), events_.end(), after,
                               [](std::uint64_t s, const Event& e) { return s < e.seq; });
    for (; it != events_.end() && out.size() < max; ++it) out.push_back(*it);
    return out;
}

bool EventLog::wait(std::uint64_t after, std::chrono::milliseconds timeout) const {
    std::unique_lock lock(mu_);
    return cv_.wait_for(lock, timeout, [&] { return last_ > after; });
}

std::uint64_t EventLog::last_seq() const {
    std::lock_guard lock(mu_);
    return last_;
}

std::uint64_t EventLog::first_seq() const {
    std::lock_guard lock(mu_);
    return events_.empty() ? 0 : events_.front().seq;
}

}  // namespace orchestrate::controller
