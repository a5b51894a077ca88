#include <cstdio>
#include <ctime>

#include "orchestrate/clock.hpp"
#include "orchestrate/error.hpp"

namespace orchestrate {

std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::invalid_argument: return "invalid_argument";
        case ErrorKind::not_found: return "not_found";
        case ErrorKind::conflict: return "conflict";
        case ErrorKind::quota_exceeded: return "quota_exceeded";
        case ErrorKind::unschedulable: return "unschedulable";
        case ErrorKind::illegal_transition: return "illegal_transition";
        case ErrorKind::unavailable: return "unavailable";
        case ErrorKind::internal: return "internal";
    }
    return "internal";
}

ErrorKind error_kind_from_string(std::string_view name) {
    for (auto k : {ErrorKind::invalid_argument, ErrorKind::not_found, ErrorKind::conflict, ErrorKind::quota_exceeded,
                   ErrorKind::unschedulable, ErrorKind::illegal_transition, ErrorKind::unavailable}) {
        if (to_string(k) == name) return k;
    }
    return ErrorKind::internal;
}

std::string format_timestamp(Timestamp ts) {
    const std::time_t secs = static_cast<std::time_t>(ts / 1'000'000);
    std::tm tm{};
    gmtime_r(&secs, &tm);
    char buf[64];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900, tm.tm_mon + 1,
                  tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec, static_cast<int>((ts / 1000) % 1000));
    return buf;
}

std::string format_duration_us(std::int64_t us) {
    char buf[32];
    if (us < 1'000'000) std::snprintf(buf, sizeof buf, "%lldms", static_cast<long long>(us / 1000));
    else std::snprintf(buf, sizeof buf, "%.2fs", static_cast<double>(us) / 1e6);
    return buf;
}

}  // namespace orchestrate
