// Copyright 2026 The splitsim Authors
// SPDX-License-Identifier: Apache-2.0

#include "splitsim/rng.hpp"

#include <cmath>
#include <numbers>

#include "splitsim/error.hpp"

namespace splitsim {

Rng::Rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream),
                    static_cast<std::uint32_t>(stream >> 32)};
  engine_.seed(seq);
}

double Rng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::exponential(double rate) {
  if (!(rate > 0.0)) throw ValidationError("exponential rate must be positive");
  return -std::log1p(-uniform()) / rate;
}

double Rng::standard_normal() {
  if (spare_normal_) {
    double z = *spare_normal_;
    spare_normal_.reset();
    return z;
  }
  // 1 - u keeps the log argument in (0, 1].
  double u1 = 1.0 - uniform();
  double u2 = uniform();
  double r = std::sqrt(-2.0 * std::log(u1));
  double theta = 2.0 * std::numbers::pi * u2;
  spare_normal_ = r * std::sin(theta);
  return r * std::cos(theta);
}

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0) throw ValidationError("below(0)");
  std::uint64_t limit = -n % n;  // 2^64 mod n
  for (;;) {
    std::uint64_t x = engine_();
    if (x >= limit) return x % n;
  }
}

}  // namespace splitsim
