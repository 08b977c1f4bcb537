// Copyright 2026 The splitsim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "splitsim/cluster.hpp"
#include "splitsim/metrics.hpp"
#include "splitsim/perfmodel.hpp"
#include "splitsim/trace.hpp"

namespace splitsim {

enum class EventKind {
  request_arrival,
  iteration_complete,
  transfer_complete,
  pool_maintenance,
};

std::string_view to_string(EventKind kind);

/// Events run in (time, seq) order. Arrivals take seq 0..n-1 in trace order;
/// everything else is numbered from n upward as it is scheduled.
struct Event {
  SimTime time = 0;
  std::uint64_t seq = 0;
  EventKind kind = EventKind::request_arrival;
  std::uint64_t id = 0;  ///< request index or machine id

  friend bool operator>(const Event& a, const Event& b) {
    return a.time != b.time ? a.time > b.time : a.seq > b.seq;
  }
};

// Journal entries give tests a structured view of what happened, in
// processing order.
struct RouteEntry {
  SimTime time = 0;
  std::uint64_t request = 0;
  std::int64_t prompt_tokens = 0;
  MachineId prompt_machine = 0;
  MachineId token_machine = 0;
};

struct PhaseEntry {
  enum class Kind { prompt_done, request_done };
  Kind kind = Kind::prompt_done;
  SimTime time = 0;
  std::uint64_t request = 0;
  MachineId machine = 0;
};

struct PoolEntry {
  bool role_change = false;  ///< home role flip rather than pool move
  SimTime time = 0;
  MachineId machine = 0;
  Pool from = Pool::prompt;
  Pool to = Pool::prompt;
};

struct BatchEntry {
  SimTime time = 0;
  MachineId machine = 0;
  Pool pool = Pool::prompt;
  BatchKind kind = BatchKind::token_only;
  std::vector<std::uint64_t> prompt_requests;
  std::vector<std::uint64_t> token_requests;
  std::vector<std::uint64_t> preempted;
  std::int64_t prompt_tokens = 0;
  SimTime duration = 0;
  std::int64_t memory_used = 0;
  std::int64_t memory_capacity = 0;
  std::size_t resident_tokens = 0;
};

using JournalEntry = std::variant<RouteEntry, PhaseEntry, PoolEntry, BatchEntry>;

struct EngineOptions {
  /// Abort if the clock passes trace duration + this.
  double horizon_slack_s = 600.0;
  bool record_event_log = false;
  bool record_journal = false;
  /// Verify memory, pool and batch invariants after every event.
  bool check_invariants = true;
};

struct SimulationResult {
  std::vector<RequestRecord> records;
  std::vector<RoutingDecision> routes;
  std::vector<MachineReport> machines;
  /// `time_s,seq,kind,payload` lines without the header.
  std::vector<std::string> event_log;
  std::vector<JournalEntry> journal;
  SimTime end_time = 0;
  std::uint64_t events = 0;
  std::uint64_t transfers = 0;
};

/// Runs the trace to completion. Throws ConfigError when a machine type has
/// no model and SimulationError when the horizon is exceeded.
SimulationResult simulate(const ClusterConfig& config,
                          const std::map<MachineType, PerfModel>& models,
                          const Trace& trace,
                          const EngineOptions& options = {});

void write_event_log(std::ostream& out, const SimulationResult& result);

struct RunOutput {
  SimulationResult sim;
  MetricsReport report;
};

/// simulate() followed by build_report() against the reference model.
RunOutput run(const ClusterConfig& config,
              const std::map<MachineType, PerfModel>& models,
              const Trace& trace, const PerfModel& reference,
              const SloTable& slo = {}, const MetricsOptions& metrics = {},
              const EngineOptions& options = {});

}  // namespace splitsim
