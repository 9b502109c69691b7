// Copyright Contributors to the snk Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>

namespace snk {

/// Counter-based generator: every draw is a pure function of (seed, keys,
/// counter), so results never depend on call order or thread schedule.
///
///   CounterRng rng(seed, {viewId, pixel, channel});
///   double x = rng.normal();
///   double w = rng.uniform();
class CounterRng {
public:
    CounterRng(std::uint64_t seed, std::initializer_list<std::uint64_t> keys) : mState(mix(seed)) {
        for (const auto key: keys) {
            mState = mix(mState ^ mix(key + 0x632be59bd9b4e019ULL));
        }
    }

    std::uint64_t
    next() {
        return mix(mState + 0x9e3779b97f4a7c15ULL * ++mCounter);
    }

    /// Uniform in [0, 1) with 53 random bits.
    double
    uniform() {
        return static_cast<double>(next() >> 11) * 0x1.0p-53;
    }

    /// Uniform in (0, 1]; safe to pass to log().
    double
    uniformOpen() {
        return (static_cast<double>(next() >> 11) + 1.0) * 0x1.0p-53;
    }

    /// Standard normal via Box-Muller. Consumes two draws per call.
    double
    normal() {
        const double r     = std::sqrt(-2.0 * std::log(uniformOpen()));
        const double theta = 2.0 * std::numbers::pi * uniform();
        return r * std::cos(theta);
    }

    /// Uniform integer in [0, bound) by rejection (unbiased).
    std::uint64_t
    below(std::uint64_t bound) {
        const std::uint64_t limit = bound == 0 ? 0 : (~std::uint64_t{0} - bound + 1) % bound;
        for (;;) {
            const auto v = next();
            if (v >= limit) {
                return v % bound;
            }
        }
    }

    static std::uint64_t
    mix(std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

private:
    std::uint64_t mState;
    std::uint64_t mCounter = 0;
};

} // namespace snk
