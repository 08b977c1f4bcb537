// Copyright 2026 The splitsim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <random>

namespace splitsim {

/// Seeded random source with a fully specified output sequence.
///
/// Raw bits come from std::mt19937_64, seeded through std::seed_seq with the
/// 32-bit halves of (seed, stream); both algorithms are fixed by the C++
/// standard. The real-valued transforms below are implemented here instead
/// of using <random> distributions, whose algorithms are implementation
/// defined:
///   uniform()         = (bits >> 11) * 2^-53, in [0, 1)
///   exponential(rate) = -log(1 - uniform()) / rate
///   standard_normal() = Box-Muller on two uniforms, caching the second value
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint64_t next_u64() { return engine_(); }
  double uniform();
  double exponential(double rate);
  double standard_normal();
  /// Uniform integer in [0, n) by rejection (no modulo bias).
  std::uint64_t below(std::uint64_t n);

 private:
  std::mt19937_64 engine_;
  std::optional<double> spare_normal_;
};

}  // namespace splitsim
