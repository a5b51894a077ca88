#pragma once

#include <chrono>
#include <cstdint>
#include <string>

namespace orchestrate {

/// Wall-clock timestamp in microseconds since the Unix epoch. All persisted
/// timestamps use this representation.
using Timestamp = std::int64_t;

inline Timestamp now_us() {
    using namespace std::chrono;
    return duration_cast<microseconds>(system_clock::now().time_since_epoch()).count();
}

/// "2026-10-16T10:15:00.123Z"
std::string format_timestamp(Timestamp ts);

/// "1.25s", "340ms"
std::string format_duration_us(std::int64_t us);

}  // namespace orchestrate
