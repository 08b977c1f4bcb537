// Copyright 2026 The splitsim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <iosfwd>

namespace splitsim::cli {

/// Exit codes shared by every subcommand.
inline constexpr int kExitPass = 0;
inline constexpr int kExitFail = 1;
inline constexpr int kExitError = 2;

/// Entry point behind the `splitsim` binary. Streams are parameters so tests
/// can capture output.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace splitsim::cli
