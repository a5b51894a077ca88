#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace orchestrate::optimizer {

/// Random stream keyed by (seed, index): the i-th suggestion of an experiment
/// draws from its own stream, so its value never depends on how many other
/// suggestions were issued or completed before it.
///
/// Built from std::seed_seq and std::mt19937_64, both of which are fully
/// specified by the standard; the float conversions below are done by hand
/// because the standard distributions are implementation-defined. Together
/// this makes suggestion sequences reproducible across toolchains.
class CounterRng {
public:
    CounterRng(std::uint64_t seed, std::uint64_t index) {
        std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                          static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
        engine_.seed(seq);
    }

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) {
        auto k = static_cast<std::uint64_t>(uniform() * static_cast<double>(n));
        return k < n ? k : n - 1;
    }

    /// Standard normal via Box-Muller (one draw consumes two uniforms).
    double normal() {
        const double u1 = 1.0 - uniform();  // (0, 1]
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace orchestrate::optimizer
