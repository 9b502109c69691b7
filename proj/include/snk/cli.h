// Copyright Contributors to the snk Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace snk {

inline constexpr int kExitOk           = 0;
inline constexpr int kExitUsage        = 1;
inline constexpr int kExitRuntime      = 2;
inline constexpr int kExitVerification = 3;

/// Runs the command line `args` (program name excluded). Results go to
/// `out`, diagnostics and usage text to `err`.
int dispatch(const std::vector<std::string> &args, std::ostream &out, std::ostream &err);

} // namespace snk
