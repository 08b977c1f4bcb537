// Copyright 2026 The splitsim Authors
// SPDX-License-Identifier: Apache-2.0

#include "splitsim/trace.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

#include <fmt/format.h>

#include "csv_util.hpp"
#include "splitsim/error.hpp"
#include "splitsim/rng.hpp"

namespace splitsim {

namespace {

constexpr std::string_view kTraceHeader = "arrival_s,prompt_tokens,output_tokens";

enum Stream : std::uint64_t { kArrivalStream = 1, kPromptStream = 2, kOutputStream = 3 };

double lognormal_draw(Rng& rng, double mu, double sigma) {
  return std::exp(mu + sigma * rng.standard_normal());
}

double empirical_draw(Rng& rng, const std::vector<CdfPoint>& cdf) {
  double u = rng.uniform();
  if (u <= cdf.front().probability) return cdf.front().tokens;
  for (std::size_t i = 1; i < cdf.size(); ++i) {
    const CdfPoint& a = cdf[i - 1];
    const CdfPoint& b = cdf[i];
    if (u <= b.probability) {
      double span = b.probability - a.probability;
      if (span <= 0.0) return b.tokens;
      return a.tokens + (u - a.probability) / span * (b.tokens - a.tokens);
    }
  }
  return cdf.back().tokens;
}

}  // namespace

std::string_view to_string(DistributionKind kind) {
  switch (kind) {
    case DistributionKind::empirical: return "empirical";
    case DistributionKind::lognormal: return "lognormal";
    case DistributionKind::bimodal_lognormal: return "bimodal_lognormal";
  }
  return "?";
}

DistributionKind parse_distribution_kind(std::string_view name) {
  if (name == "empirical") return DistributionKind::empirical;
  if (name == "lognormal") return DistributionKind::lognormal;
  if (name == "bimodal_lognormal" || name == "bimodal-lognormal" || name == "bimodal")
    return DistributionKind::bimodal_lognormal;
  throw ValidationError(fmt::format("unknown distribution kind '{}'", name));
}

void SizeDistribution::validate() const {
  if (min_tokens < 1) throw ValidationError("distribution min_tokens must be >= 1");
  if (max_tokens < min_tokens)
    throw ValidationError("distribution max_tokens must be >= min_tokens");
  switch (kind) {
    case DistributionKind::lognormal:
      if (!(sigma > 0.0) || !std::isfinite(mu))
        throw ValidationError("lognormal needs finite mu and sigma > 0");
      break;
    case DistributionKind::bimodal_lognormal:
      if (!(sigma > 0.0) || !(sigma2 > 0.0) || !std::isfinite(mu) || !std::isfinite(mu2))
        throw ValidationError("bimodal lognormal needs finite mus and positive sigmas");
      if (!(weight2 >= 0.0 && weight2 <= 1.0))
        throw ValidationError("bimodal weight2 must be in [0, 1]");
      break;
    case DistributionKind::empirical:
      if (cdf.size() < 2) throw ValidationError("empirical CDF needs at least 2 points");
      for (std::size_t i = 0; i < cdf.size(); ++i) {
        if (cdf[i].probability < 0.0 || cdf[i].probability > 1.0)
          throw ValidationError("empirical CDF probability outside [0, 1]");
        if (i > 0 && cdf[i].probability < cdf[i - 1].probability)
          throw ValidationError("empirical CDF probabilities must not decrease");
        if (i > 0 && !(cdf[i].tokens > cdf[i - 1].tokens))
          throw ValidationError("empirical CDF quantiles must be strictly increasing");
      }
      break;
  }
}

SizeDistribution::Sample SizeDistribution::sample(Rng& rng) const {
  double raw = 0.0;
  switch (kind) {
    case DistributionKind::lognormal:
      raw = lognormal_draw(rng, mu, sigma);
      break;
    case DistributionKind::bimodal_lognormal:
      raw = rng.uniform() < weight2 ? lognormal_draw(rng, mu2, sigma2)
                                    : lognormal_draw(rng, mu, sigma);
      break;
    case DistributionKind::empirical:
      raw = empirical_draw(rng, cdf);
      break;
  }
  // Huge draws would overflow llround; they clamp to max anyway.
  double rounded = std::round(std::min(raw, 1e15));
  auto tokens = static_cast<std::int64_t>(rounded);
  Sample s;
  s.tokens = std::clamp(tokens, min_tokens, max_tokens);
  s.clamped = s.tokens != tokens;
  return s;
}

WorkloadPreset workload_preset(std::string_view name) {
  WorkloadPreset p;
  p.name = std::string(name);
  if (name == "coding") {
    // Long prompts, very short outputs (median 1500 / 13).
    p.prompt = {DistributionKind::lognormal, std::log(1500.0), 1.5, 0.0, 0.0, 1.0, 16, 32768, {}};
    p.output = {DistributionKind::lognormal, std::log(13.0), 1.1, 0.0, 0.0, 1.0, 1, 512, {}};
  } else if (name == "conversation") {
    // Medium prompts; outputs mix a short-answer mode with a long one whose
    // combined median sits near 129.
    p.prompt = {DistributionKind::lognormal, std::log(1020.0), 1.0, 0.0, 0.0, 1.0, 16, 4096, {}};
    p.output = {DistributionKind::bimodal_lognormal, std::log(24.0), 0.8, 0.6, 5.274285, 0.45,
                1, 2048, {}};
  } else {
    throw ValidationError(fmt::format("unknown workload preset '{}'", name));
  }
  return p;
}

Trace parse_trace(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  Trace trace;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view row = detail::trim(line);
    if (row.empty()) continue;
    if (!header_seen) {
      if (row != kTraceHeader)
        throw ParseError(line_no, fmt::format("expected header '{}'", kTraceHeader));
      header_seen = true;
      continue;
    }
    auto cols = detail::split(row);
    if (cols.size() != 3) throw ParseError(line_no, "expected 3 columns");
    auto arrival = detail::to_double(cols[0]);
    auto prompt = detail::to_int(cols[1]);
    auto output = detail::to_int(cols[2]);
    if (!arrival || !prompt || !output) throw ParseError(line_no, "malformed number");
    if (!std::isfinite(*arrival) || *arrival < 0.0)
      throw ValidationError(fmt::format("line {}: arrival must be >= 0", line_no));
    if (*prompt < 1 || *output < 1)
      throw ValidationError(fmt::format("line {}: token counts must be positive", line_no));
    trace.requests.push_back({0, *arrival, *prompt, *output});
  }
  if (!header_seen) throw ValidationError("empty trace");
  if (trace.requests.empty()) throw ValidationError("empty trace");
  std::stable_sort(trace.requests.begin(), trace.requests.end(),
                   [](const Request& a, const Request& b) { return a.arrival_s < b.arrival_s; });
  for (std::size_t i = 0; i < trace.requests.size(); ++i) trace.requests[i].id = i;
  trace.duration_s = trace.requests.back().arrival_s;
  return trace;
}

Trace read_trace_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError(fmt::format("cannot open trace '{}'", path));
  return parse_trace(in);
}

void write_trace(std::ostream& out, const Trace& trace) {
  out << kTraceHeader << '\n';
  for (const Request& r : trace.requests)
    out << fmt::format("{},{},{}\n", r.arrival_s, r.prompt_tokens, r.output_tokens);
}

SynthesisResult synthesize_trace(const SizeDistribution& prompt_dist,
                                 const SizeDistribution& output_dist, double rate,
                                 double duration_s, std::uint64_t seed) {
  if (!(rate >= 0.0) || !std::isfinite(rate)) throw ValidationError("rate must be >= 0");
  if (!(duration_s > 0.0) || !std::isfinite(duration_s))
    throw ValidationError("duration must be > 0");
  prompt_dist.validate();
  output_dist.validate();

  SynthesisResult result;
  result.trace.duration_s = duration_s;
  if (rate == 0.0) return result;

  Rng gaps(seed, kArrivalStream);
  Rng prompts(seed, kPromptStream);
  Rng outputs(seed, kOutputStream);
  // Unit-rate gaps scaled by 1/rate keep traces at different rates aligned.
  double unit_time = 0.0;
  for (;;) {
    unit_time += gaps.exponential(1.0);
    double t = unit_time / rate;
    if (t > duration_s) break;
    auto p = prompt_dist.sample(prompts);
    auto o = output_dist.sample(outputs);
    result.clamped_prompt += p.clamped;
    result.clamped_output += o.clamped;
    result.trace.requests.push_back({result.trace.requests.size(), t, p.tokens, o.tokens});
  }
  return result;
}

Trace generate_trace(const SizeDistribution& prompt_dist, const SizeDistribution& output_dist,
                     double rate, double duration_s, std::uint64_t seed) {
  return synthesize_trace(prompt_dist, output_dist, rate, duration_s, seed).trace;
}

TraceStats trace_stats(const Trace& trace) {
  if (trace.empty()) throw ValidationError("empty trace");
  std::vector<std::int64_t> prompts;
  std::vector<std::int64_t> outputs;
  prompts.reserve(trace.size());
  outputs.reserve(trace.size());
  for (const Request& r : trace.requests) {
    prompts.push_back(r.prompt_tokens);
    outputs.push_back(r.output_tokens);
  }
  std::sort(prompts.begin(), prompts.end());
  std::sort(outputs.begin(), outputs.end());
  std::size_t n = trace.size();
  std::size_t median = (n - 1) / 2;
  auto p90 = static_cast<std::size_t>(std::ceil(0.9 * static_cast<double>(n) - 1e-9));
  p90 = std::clamp<std::size_t>(p90, 1, n) - 1;

  TraceStats s;
  s.count = n;
  s.median_prompt = prompts[median];
  s.p90_prompt = prompts[p90];
  s.median_output = outputs[median];
  s.p90_output = outputs[p90];
  double span = trace.duration_s > 0.0 ? trace.duration_s : trace.requests.back().arrival_s;
  s.mean_rate = span > 0.0 ? static_cast<double>(n) / span : 0.0;
  return s;
}

}  // namespace splitsim
