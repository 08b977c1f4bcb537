// Copyright 2026 The splitsim Authors
// SPDX-License-Identifier: Apache-2.0

#include "splitsim/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <istream>
#include <ostream>
#include <string>

#include <fmt/format.h>

#include "csv_util.hpp"
#include "splitsim/error.hpp"

namespace splitsim {

double percentile_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw ValidationError("percentile of an empty sample");
  if (!(p > 0.0 && p <= 1.0)) throw ValidationError("percentile fraction must be in (0, 1]");
  double n = static_cast<double>(sorted.size());
  double rank = p * n;
  // 0.07 * 100 is 7.000000000000001 in binary; snap near-integers first.
  double nearest = std::round(rank);
  if (std::abs(rank - nearest) < 1e-9 * std::max(1.0, rank)) rank = nearest;
  auto index = static_cast<std::size_t>(std::ceil(rank));
  index = std::clamp<std::size_t>(index, 1, sorted.size()) - 1;
  return sorted[index];
}

double percentile(std::span<const double> samples, double p) {
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  return percentile_sorted(sorted, p);
}

std::string_view to_string(SloMetric metric) {
  switch (metric) {
    case SloMetric::ttft: return "ttft";
    case SloMetric::tbt: return "tbt";
    case SloMetric::e2e: return "e2e";
  }
  return "?";
}

void SloTable::validate() const {
  for (const auto& row : multipliers)
    for (double m : row)
      if (!(m >= 1.0)) throw ValidationError("SLO multipliers must be >= 1");
}

ReferenceLatencies reference_latencies(const Request& request, const PerfModel& reference) {
  ReferenceLatencies r;
  r.ttft_ms = prompt_time(reference, request.prompt_tokens);
  r.tbt_ms = token_iter_time(reference, 1);
  r.e2e_ms = r.ttft_ms + static_cast<double>(request.output_tokens - 1) * r.tbt_ms;
  return r;
}

std::string_view to_string(TbtMode mode) {
  return mode == TbtMode::pooled ? "pooled" : "per_request_mean";
}

TbtMode parse_tbt_mode(std::string_view name) {
  if (name == "pooled") return TbtMode::pooled;
  if (name == "per_request_mean" || name == "per-request-mean") return TbtMode::per_request_mean;
  throw ConfigError(fmt::format("unknown TBT mode '{}'", name));
}

SloResult check_slo(const SloRatios& ratios, const SloTable& slo) {
  SloResult result;
  result.pass = true;
  const std::vector<double>* series[] = {&ratios.ttft, &ratios.tbt, &ratios.e2e};
  for (std::size_t m = 0; m < 3; ++m) {
    std::vector<double> sorted = *series[m];
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t k = 0; k < kSloPercentiles.size(); ++k) {
      SloVerdict v;
      v.metric = static_cast<SloMetric>(m);
      v.percentile = kSloPercentiles[k];
      v.multiplier = slo.multipliers[m][k];
      v.observed = sorted.empty() ? 0.0 : percentile_sorted(sorted, v.percentile);
      v.pass = v.observed <= v.multiplier;
      result.pass = result.pass && v.pass;
      result.verdicts.push_back(v);
    }
  }
  return result;
}

LatencySummary summarize_latencies(std::span<const double> samples) {
  LatencySummary s;
  s.count = samples.size();
  if (samples.empty()) return s;
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  s.p50 = percentile_sorted(sorted, 0.5);
  s.p90 = percentile_sorted(sorted, 0.9);
  s.p99 = percentile_sorted(sorted, 0.99);
  s.mean = std::accumulate(sorted.begin(), sorted.end(), 0.0) / static_cast<double>(sorted.size());
  return s;
}

MetricsReport build_report(std::span<const RequestRecord> records,
                           std::vector<MachineReport> machines, const Trace& trace,
                           const PerfModel& reference, const SloTable& slo,
                           const MetricsOptions& options) {
  slo.validate();
  if (options.trim_s < 0.0) throw ValidationError("trim must be non-negative");
  if (records.size() != trace.size()) throw ValidationError("records do not match the trace");

  MetricsReport report;
  report.requests = records.size();
  report.machines = std::move(machines);
  std::vector<double> ttft, tbt, e2e;
  SimTime last = 0;
  SimTime lo = from_seconds(options.trim_s);
  SimTime hi = from_seconds(trace.duration_s - options.trim_s);
  for (std::size_t i = 0; i < records.size(); ++i) {
    const RequestRecord& r = records[i];
    if (!r.finished()) continue;
    ++report.completed;
    last = std::max(last, r.completion);
    if (options.trim_s > 0.0 && (r.arrival < lo || r.arrival > hi)) continue;
    ++report.measured;

    ReferenceLatencies ref = reference_latencies(trace.requests[i], reference);
    double ttft_ms = to_millis(r.ttft());
    double e2e_ms = to_millis(r.e2e());
    ttft.push_back(ttft_ms);
    e2e.push_back(e2e_ms);
    report.ratios.ttft.push_back(ttft_ms / ref.ttft_ms);
    report.ratios.e2e.push_back(e2e_ms / ref.e2e_ms);
    double gap_sum = 0.0;
    for (std::size_t k = 1; k < r.emissions.size(); ++k) {
      double gap = to_millis(r.emissions[k] - r.emissions[k - 1]);
      tbt.push_back(gap);
      gap_sum += gap;
      if (options.tbt_mode == TbtMode::pooled) report.ratios.tbt.push_back(gap / ref.tbt_ms);
    }
    if (options.tbt_mode == TbtMode::per_request_mean && r.emissions.size() > 1)
      report.ratios.tbt.push_back(gap_sum / static_cast<double>(r.emissions.size() - 1) /
                                  ref.tbt_ms);
  }
  report.makespan_s = to_seconds(last);
  report.throughput_rps =
      report.makespan_s > 0.0 ? static_cast<double>(report.completed) / report.makespan_s : 0.0;
  report.ttft_ms = summarize_latencies(ttft);
  report.tbt_ms = summarize_latencies(tbt);
  report.e2e_ms = summarize_latencies(e2e);
  report.slo = check_slo(report.ratios, slo);
  return report;
}

void write_requests_csv(std::ostream& out, std::span<const RequestRecord> records) {
  out << "request_id,arrival_s,ttft_ms,e2e_ms,prompt_machine,token_machine,"
         "transfer_visible_ms,preempt_count\n";
  for (const RequestRecord& r : records) {
    if (!r.finished()) continue;
    out << fmt::format("{},{:.9f},{:.6f},{:.6f},{},{},{:.6f},{}\n", r.id, to_seconds(r.arrival),
                       to_millis(r.ttft()), to_millis(r.e2e()), r.prompt_machine, r.token_machine,
                       r.transfer_visible_ms, r.preempt_count);
  }
}

void write_tbt_csv(std::ostream& out, std::span<const RequestRecord> records) {
  out << "request_id,token_index,tbt_ms\n";
  for (const RequestRecord& r : records)
    for (std::size_t k = 1; k < r.emissions.size(); ++k)
      out << fmt::format("{},{},{:.6f}\n", r.id, k, to_millis(r.emissions[k] - r.emissions[k - 1]));
}

void write_summary_csv(std::ostream& out, const SloResult& slo, std::string_view header_comment) {
  std::size_t start = 0;
  while (start < header_comment.size()) {
    std::size_t end = header_comment.find('\n', start);
    if (end == std::string_view::npos) end = header_comment.size();
    out << "# " << header_comment.substr(start, end - start) << '\n';
    start = end + 1;
  }
  out << "metric,percentile,observed_ratio,multiplier,result\n";
  for (const SloVerdict& v : slo.verdicts)
    out << fmt::format("{},p{},{:.6f},{},{}\n", to_string(v.metric),
                       static_cast<int>(std::lround(v.percentile * 100)), v.observed, v.multiplier,
                       v.pass ? "pass" : "fail");
}

namespace {

std::vector<std::string_view> expect_row(std::string_view line, std::size_t line_no,
                                         std::size_t columns) {
  auto cells = detail::split(line);
  if (cells.size() != columns)
    throw ParseError(line_no, fmt::format("expected {} columns, got {}", columns, cells.size()));
  return cells;
}

std::int64_t int_cell(std::string_view cell, std::size_t line_no) {
  auto v = detail::to_int(cell);
  if (!v) throw ParseError(line_no, fmt::format("'{}' is not an integer", cell));
  return *v;
}

double double_cell(std::string_view cell, std::size_t line_no) {
  auto v = detail::to_double(cell);
  if (!v) throw ParseError(line_no, fmt::format("'{}' is not a number", cell));
  return *v;
}

}  // namespace

std::vector<RequestRecord> read_run_records(std::istream& requests, std::istream& tbt,
                                            const Trace& trace) {
  std::vector<RequestRecord> records(trace.size());
  for (std::size_t i = 0; i < trace.size(); ++i) {
    const Request& req = trace.requests[i];
    records[i].id = req.id;
    records[i].arrival = from_seconds(req.arrival_s);
    records[i].prompt_tokens = req.prompt_tokens;
    records[i].output_tokens = req.output_tokens;
  }
  auto lookup = [&](std::int64_t id, std::size_t line_no) -> RequestRecord& {
    if (id < 0 || static_cast<std::size_t>(id) >= records.size())
      throw ParseError(line_no, fmt::format("request {} is not in the trace", id));
    return records[static_cast<std::size_t>(id)];
  };

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(requests, line)) {
    if (++line_no == 1 || detail::trim(line).empty()) continue;
    auto c = expect_row(line, line_no, 8);
    RequestRecord& r = lookup(int_cell(c[0], line_no), line_no);
    r.completion = r.arrival + from_millis(double_cell(c[3], line_no));
    r.prompt_machine = static_cast<MachineId>(int_cell(c[4], line_no));
    r.token_machine = static_cast<MachineId>(int_cell(c[5], line_no));
    r.transfer_visible_ms = double_cell(c[6], line_no);
    r.preempt_count = static_cast<int>(int_cell(c[7], line_no));
    r.emissions.assign(1, r.arrival + from_millis(double_cell(c[2], line_no)));
  }

  line_no = 0;
  while (std::getline(tbt, line)) {
    if (++line_no == 1 || detail::trim(line).empty()) continue;
    auto c = expect_row(line, line_no, 3);
    RequestRecord& r = lookup(int_cell(c[0], line_no), line_no);
    std::int64_t index = int_cell(c[1], line_no);
    if (r.emissions.empty() || index != static_cast<std::int64_t>(r.emissions.size()))
      throw ParseError(line_no, fmt::format("gap {} of request {} is out of order", index, r.id));
    r.emissions.push_back(r.emissions.back() + from_millis(double_cell(c[2], line_no)));
  }
  return records;
}

}  // namespace splitsim
