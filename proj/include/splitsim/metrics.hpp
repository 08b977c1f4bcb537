// Copyright 2026 The splitsim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "splitsim/machine.hpp"
#include "splitsim/perfmodel.hpp"
#include "splitsim/sim_time.hpp"
#include "splitsim/trace.hpp"
#include "splitsim/transfer.hpp"

namespace splitsim {

struct RequestRecord {
  std::uint64_t id = 0;
  SimTime arrival = 0;
  std::int64_t prompt_tokens = 0;
  std::int64_t output_tokens = 0;
  /// One entry per output token; the first is the first token.
  std::vector<SimTime> emissions;
  SimTime completion = -1;
  MachineId prompt_machine = 0;
  MachineId token_machine = 0;
  double transfer_visible_ms = 0.0;
  int preempt_count = 0;

  bool finished() const { return completion >= 0; }
  SimTime first_token_time() const { return emissions.front(); }
  SimTime ttft() const { return emissions.front() - arrival; }
  SimTime e2e() const { return completion - arrival; }
};

/// Nearest rank: the value at index ceil(p * n) - 1 of the sorted samples.
double percentile(std::span<const double> samples, double p);
/// Same, for samples already sorted ascending.
double percentile_sorted(std::span<const double> sorted, double p);

enum class SloMetric { ttft, tbt, e2e };

std::string_view to_string(SloMetric metric);

inline constexpr std::array<double, 3> kSloPercentiles = {0.5, 0.9, 0.99};

struct SloTable {
  /// [metric][percentile] in SloMetric and kSloPercentiles order.
  std::array<std::array<double, 3>, 3> multipliers = {{
      {2.0, 3.0, 6.0},
      {1.25, 1.5, 5.0},
      {1.25, 1.5, 5.0},
  }};

  double multiplier(SloMetric metric, std::size_t percentile_index) const {
    return multipliers[static_cast<std::size_t>(metric)][percentile_index];
  }
  void validate() const;
};

struct ReferenceLatencies {
  double ttft_ms = 0.0;
  double tbt_ms = 0.0;
  double e2e_ms = 0.0;
};

/// Unbatched, uncontended latencies on the reference model.
ReferenceLatencies reference_latencies(const Request& request,
                                       const PerfModel& reference);

enum class TbtMode { pooled, per_request_mean };

std::string_view to_string(TbtMode mode);
TbtMode parse_tbt_mode(std::string_view name);

/// Per-request slowdowns against the reference. TBT ratios are either one
/// per inter-token gap (pooled) or one per request (mean gap).
struct SloRatios {
  std::vector<double> ttft;
  std::vector<double> tbt;
  std::vector<double> e2e;
};

struct SloVerdict {
  SloMetric metric = SloMetric::ttft;
  double percentile = 0.5;
  double observed = 0.0;
  double multiplier = 1.0;
  bool pass = false;
};

struct SloResult {
  std::vector<SloVerdict> verdicts;
  bool pass = false;
};

/// A metric with no samples passes vacuously (observed = 0).
SloResult check_slo(const SloRatios& ratios, const SloTable& slo);

struct LatencySummary {
  std::size_t count = 0;
  double p50 = 0.0;
  double p90 = 0.0;
  double p99 = 0.0;
  double mean = 0.0;
};

LatencySummary summarize_latencies(std::span<const double> samples);

struct MetricsOptions {
  TbtMode tbt_mode = TbtMode::pooled;
  /// Requests arriving in the first or last trim_s seconds of the trace are
  /// excluded from percentiles and SLO checks.
  double trim_s = 0.0;
};

struct MachineReport {
  MachineId id = 0;
  MachineType type = MachineType::A100;
  Pool home = Pool::prompt;
  double busy_s = 0.0;
  double utilization = 0.0;
  std::uint64_t iterations = 0;
  std::map<std::int64_t, SimTime> batched_tokens;
};

struct MetricsReport {
  std::size_t requests = 0;
  std::size_t completed = 0;
  std::size_t measured = 0;  ///< after trimming
  double makespan_s = 0.0;
  double throughput_rps = 0.0;
  LatencySummary ttft_ms;
  LatencySummary tbt_ms;
  LatencySummary e2e_ms;
  SloRatios ratios;
  SloResult slo;
  std::vector<MachineReport> machines;
};

MetricsReport build_report(std::span<const RequestRecord> records,
                           std::vector<MachineReport> machines,
                           const Trace& trace, const PerfModel& reference,
                           const SloTable& slo, const MetricsOptions& options);

void write_requests_csv(std::ostream& out,
                        std::span<const RequestRecord> records);
/// request_id,token_index,tbt_ms; token_index 1 is the second token.
void write_tbt_csv(std::ostream& out, std::span<const RequestRecord> records);
/// metric,percentile,observed_ratio,multiplier,result; nine rows.
void write_summary_csv(std::ostream& out, const SloResult& slo,
                       std::string_view header_comment = {});

/// Rebuilds records from write_requests_csv and write_tbt_csv output. Sizes
/// and arrivals come from `trace`; requests absent from the CSV stay
/// unfinished.
std::vector<RequestRecord> read_run_records(std::istream& requests,
                                            std::istream& tbt,
                                            const Trace& trace);

}  // namespace splitsim
