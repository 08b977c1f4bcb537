// Copyright 2026 The splitsim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>

namespace splitsim {

// Simulated time is kept in integer nanoseconds so that latency identities
// (E2E = TTFT + sum of TBT gaps) hold exactly.
using SimTime = std::int64_t;

inline constexpr SimTime kNanosPerSecond = 1'000'000'000;
inline constexpr SimTime kNanosPerMilli = 1'000'000;

inline SimTime from_seconds(double s) { return std::llround(s * 1e9); }
inline SimTime from_millis(double ms) { return std::llround(ms * 1e6); }
inline double to_seconds(SimTime t) { return static_cast<double>(t) / 1e9; }
inline double to_millis(SimTime t) { return static_cast<double>(t) / 1e6; }

}  // namespace splitsim
