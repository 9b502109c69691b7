// Copyright Contributors to the snk Project
// SPDX-License-Identifier: Apache-2.0

#include "snk/common.h"

#include <algorithm>
#include <cstdlib>
#include <thread>
#include <vector>

namespace snk {

std::size_t
maxThreads() {
    static const std::size_t threads = [] {
        std::size_t hw = std::max(1u, std::thread::hardware_concurrency());
        if (const char *env = std::getenv("SNK_THREADS")) {
            const long requested = std::strtol(env, nullptr, 10);
            if (requested > 0) {
                return static_cast<std::size_t>(requested);
            }
        }
        return hw;
    }();
    return threads;
}

void
parallelFor(std::size_t count, const std::function<void(std::size_t)> &body) {
    const std::size_t threads = std::min(maxThreads(), count);
    if (threads <= 1) {
        for (std::size_t i = 0; i < count; ++i) {
            body(i);
        }
        return;
    }
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) {
        pool.emplace_back([&, t] {
            for (std::size_t i = t; i < count; i += threads) {
                body(i);
            }
        });
    }
}

} // namespace snk
