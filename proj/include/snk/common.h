// Copyright Contributors to the snk Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>

namespace snk {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// All recoverable failures in the library are reported with this type. The
/// message is the contract: callers (and the CLI) surface it verbatim.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised when an input is structurally valid but a statistical or
/// geometric verification does not hold.
class VerificationError : public Error {
public:
    using Error::Error;
};

inline void
check(bool condition, const std::string &message) {
    if (!condition) {
        throw Error(message);
    }
}

/// Worker parallelism cap. Reads SNK_THREADS once; falls back to the
/// hardware concurrency.
std::size_t maxThreads();

/// Runs body(i) for i in [0, count) over at most maxThreads() threads.
/// Iterations must write disjoint state; ordering is unspecified.
void parallelFor(std::size_t count, const std::function<void(std::size_t)> &body);

} // namespace snk
