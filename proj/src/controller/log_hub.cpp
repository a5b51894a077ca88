#include "orchestrate/controller/log_hub.hpp"

#include <algorithm>

namespace orchestrate::controller {

using store::LogRecord;

LogHub::Channel& LogHub::channel(const std::string& experiment_id) {
    Channel& ch = channels_[experiment_id];
    if (!ch.loaded) {
        ch.loaded = true;
        ch.records = store_.read_logs(cluster_, experiment_id);
        for (const auto& r : ch.records) {
            ch.next_cursor = std::max(ch.next_cursor, r.cursor + 1);
            auto& seq = ch.next_seq[{r.run_id, r.stream}];
            seq = std::max(seq, r.seq + 1);
        }
    }
    return ch;
}

LogRecord LogHub::append(const std::string& experiment_id, const std::string& run_id, store::LogStream stream,
                         std::string line) {
    LogRecord rec;
    {
        std::lock_guard lock(mu_);
        Channel& ch = channel(experiment_id);
        rec.experiment_id = experiment_id;
        rec.run_id = run_id;
        rec.stream = stream;
        rec.seq = ch.next_seq[{run_id, stream}]++;
        rec.cursor = ch.next_cursor++;
        rec.timestamp = now_us();
        rec.line = std::move(line);
        store_.append_log(cluster_, rec);
        ch.records.push_back(rec);
    }
    cv_.notify_all();
    return rec;
}

std::vector<LogRecord> LogHub::since(const std::string& experiment_id, std::uint64_t since, std::size_t max) {
    std::lock_guard lock(mu_);
    const Channel& ch = channel(experiment_id);
    auto it = std::lower_bound(ch.records.begin(), ch.records.end(), since,
                               [](const LogRecord& r, std::uint64_t c) { return r.cursor < c; });
    std::vector<LogRecord> out;
    for (; it != ch.records.end() && out.size() < max; ++it) out.push_back(*it);
    return out;
}

bool LogHub::wait(const std::string& experiment_id, std::uint64_t since, std::chrono::milliseconds timeout) {
    std::unique_lock lock(mu_);
    return cv_.wait_for(lock, timeout, [&] {
        const Channel& ch = channel(experiment_id);
        return ch.closed || ch.next_cursor > since;
    });
}

void LogHub::close(const std::string& experiment_id) {
    {
        std::lock_guard lock(mu_);
        channel(experiment_id).closed = true;
    }
    cv_.notify_all();
}

bool LogHub::closed(const std::string& experiment_id) {
    std::lock_guard lock(mu_);
    return channel(experiment_id).closed;
}

void LogHub::reopen(const std::string& experiment_id) {
    std::lock_guard lock(mu_);
    channel(experiment_id).closed = false;
}

void LogHub::close_run(const std::string& experiment_id, const std::string& run_id) {
    std::lock_guard lock(mu_);
    store_.close_run_logs(cluster_, experiment_id, run_id);
}

}  // namespace orchestrate::controller
