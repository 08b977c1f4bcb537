// Copyright 2026 The splitsim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace splitsim {

class Rng;

/// One inference job. Only sizes are known; prompt text is never modeled.
struct Request {
  std::uint64_t id = 0;
  double arrival_s = 0.0;
  std::int64_t prompt_tokens = 1;
  std::int64_t output_tokens = 1;

  bool operator==(const Request&) const = default;
};

/// Requests sorted by arrival. Ids equal the position in that order.
struct Trace {
  std::vector<Request> requests;
  double duration_s = 0.0;

  bool empty() const { return requests.empty(); }
  std::size_t size() const { return requests.size(); }
};

enum class DistributionKind { empirical, lognormal, bimodal_lognormal };

std::string_view to_string(DistributionKind kind);
DistributionKind parse_distribution_kind(std::string_view name);

/// (cumulative probability, token count) point of an empirical CDF table.
struct CdfPoint {
  double probability = 0.0;
  double tokens = 0.0;
};

/// Token-size distribution with a hard support clamp.
///
/// lognormal:         exp(mu + sigma * z)
/// bimodal_lognormal: first component (mu, sigma) with weight 1 - weight2,
///                    second component (mu2, sigma2) with weight weight2
/// empirical:         inverse of the piecewise-linear CDF in `cdf`
///
/// Samples are rounded to the nearest integer and then clamped to
/// [min_tokens, max_tokens]. Clamping is reported per sample, never hidden by
/// resampling.
struct SizeDistribution {
  DistributionKind kind = DistributionKind::lognormal;
  double mu = 0.0;
  double sigma = 1.0;
  double weight2 = 0.0;
  double mu2 = 0.0;
  double sigma2 = 1.0;
  std::int64_t min_tokens = 1;
  std::int64_t max_tokens = 1 << 20;
  std::vector<CdfPoint> cdf;

  struct Sample {
    std::int64_t tokens = 0;
    bool clamped = false;
  };

  void validate() const;
  Sample sample(Rng& rng) const;
};

/// Named prompt/output size pair.
struct WorkloadPreset {
  std::string name;
  SizeDistribution prompt;
  SizeDistribution output;
};

/// "coding" or "conversation"; throws ValidationError for anything else.
WorkloadPreset workload_preset(std::string_view name);

Trace parse_trace(std::istream& in);
Trace read_trace_file(const std::string& path);
void write_trace(std::ostream& out, const Trace& trace);

struct SynthesisResult {
  Trace trace;
  std::size_t clamped_prompt = 0;
  std::size_t clamped_output = 0;
};

/// Poisson arrivals at `rate` over [0, duration]; sizes drawn independently.
///
/// Arrival gaps, prompt sizes, and output sizes use three separate streams of
/// the same seed, so traces generated at different rates share the same size
/// sequence and their arrival times are exact rescalings of each other.
SynthesisResult synthesize_trace(const SizeDistribution& prompt_dist,
                                 const SizeDistribution& output_dist,
                                 double rate, double duration_s,
                                 std::uint64_t seed);

Trace generate_trace(const SizeDistribution& prompt_dist,
                     const SizeDistribution& output_dist, double rate,
                     double duration_s, std::uint64_t seed);

struct TraceStats {
  std::size_t count = 0;
  std::int64_t median_prompt = 0;
  std::int64_t p90_prompt = 0;
  std::int64_t median_output = 0;
  std::int64_t p90_output = 0;
  double mean_rate = 0.0;
};

/// Medians use the lower middle element; p90 is nearest-rank.
TraceStats trace_stats(const Trace& trace);

}  // namespace splitsim
