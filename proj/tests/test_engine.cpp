// Copyright 2026 The splitsim Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <optional>
#include <sstream>

#include "splitsim/calibration.hpp"
#include "splitsim/engine.hpp"
#include "splitsim/error.hpp"
#include "support.hpp"

namespace splitsim {
namespace {

using testing::random_cluster;
using testing::random_trace;

const std::map<MachineType, PerfModel>& models() {
  static const auto m = calibrated_models("llama2-70b");
  return m;
}

Trace single(std::int64_t prompt, std::int64_t output) {
  Trace t;
  t.requests.push_back({0, 0.0, prompt, output});
  t.duration_s = 1.0;
  return t;
}

EngineOptions journaled() {
  EngineOptions o;
  o.record_journal = true;
  o.record_event_log = true;
  return o;
}

TEST(Engine, SingleRequestOnBaseline) {
  // Unbatched and uncontended: prompt time, then one token iteration per
  // remaining output token.
  SimulationResult r = simulate(make_cluster_config(Design::baseline_a100, 1, 0), models(),
                                single(1500, 13));
  ASSERT_EQ(r.records.size(), 1u);
  const RequestRecord& rec = r.records[0];
  EXPECT_EQ(rec.ttft(), from_millis(185));
  EXPECT_EQ(rec.e2e(), from_millis(185 + 12 * 52));
  EXPECT_EQ(rec.emissions.size(), 13u);
  EXPECT_EQ(r.transfers, 0u);
}

TEST(Engine, SplitPairAddsVisibleTransfer) {
  SimulationResult r = simulate(make_cluster_config(Design::splitwise_hh, 1, 1), models(),
                                single(1500, 13));
  const RequestRecord& rec = r.records[0];
  // 1500 tokens of KV at 2,621,440 B/token over 400 Gb/s, overlapped with
  // a 95 ms prompt spread across 80 layers.
  double raw_ms = 1500.0 * 2621440.0 * 8.0 / 400e9 * 1e3;
  double visible = std::min(raw_ms, std::max(5.0, raw_ms - 95.0 * (1.0 - 1.0 / 80)));
  EXPECT_DOUBLE_EQ(rec.transfer_visible_ms, visible);
  EXPECT_EQ(rec.ttft(), from_millis(95));
  EXPECT_EQ(rec.emissions[1] - rec.emissions[0], from_millis(visible) + from_millis(31));
  EXPECT_EQ(rec.e2e(), from_millis(95) + from_millis(visible) + 12 * from_millis(31));
  EXPECT_EQ(rec.prompt_machine, 0u);
  EXPECT_EQ(rec.token_machine, 1u);
  EXPECT_EQ(r.transfers, 1u);
}

TEST(Engine, SingleOutputTokenFinishesAtPrompt) {
  SimulationResult r = simulate(make_cluster_config(Design::splitwise_ha, 1, 1), models(),
                                single(700, 1));
  const RequestRecord& rec = r.records[0];
  EXPECT_EQ(rec.e2e(), rec.ttft());
  EXPECT_EQ(r.transfers, 0u);
}

TEST(Engine, EmptyTrace) {
  Trace t;
  t.duration_s = 10;
  SimulationResult r = simulate(make_cluster_config(Design::splitwise_hh, 2, 2), models(), t);
  EXPECT_TRUE(r.records.empty());
  EXPECT_EQ(r.events, 0u);
  EXPECT_EQ(r.end_time, 0);
}

TEST(Engine, HorizonExceeded) {
  EngineOptions o;
  o.horizon_slack_s = 0.5;
  Trace t = random_trace(3, 300, 200.0);
  EXPECT_THROW(simulate(make_cluster_config(Design::baseline_a100, 1, 0), models(), t, o),
               SimulationError);
}

TEST(Engine, MissingModel) {
  std::map<MachineType, PerfModel> partial = {{MachineType::A100, models().at(MachineType::A100)}};
  EXPECT_THROW(simulate(make_cluster_config(Design::splitwise_ha, 1, 1), partial, single(10, 2)),
               ConfigError);
}

TEST(Engine, Deterministic) {
  Trace t = random_trace(11, 400, 30.0);
  ClusterConfig c = make_cluster_config(Design::splitwise_ha, 2, 2);
  SimulationResult a = simulate(c, models(), t, journaled());
  SimulationResult b = simulate(c, models(), t, journaled());
  EXPECT_EQ(a.event_log, b.event_log);
  std::ostringstream sa, sb;
  write_requests_csv(sa, a.records);
  write_requests_csv(sb, b.records);
  EXPECT_EQ(sa.str(), sb.str());
}

TEST(Engine, EventLogFormat) {
  SimulationResult r = simulate(make_cluster_config(Design::splitwise_hh, 1, 1), models(),
                                single(1500, 3), journaled());
  ASSERT_FALSE(r.event_log.empty());
  EXPECT_EQ(r.event_log.size(), r.events);
  EXPECT_EQ(r.event_log[0].rfind("0.000000000,0,request_arrival,", 0), 0u) << r.event_log[0];
  std::ostringstream out;
  write_event_log(out, r);
  EXPECT_EQ(out.str().substr(0, out.str().find('\n')), "time_s,seq,kind,payload");
}

TEST(Engine, RoutingMatchesReplay) {
  Rng rng(2026, 1);
  int mixed_runs = 0;
  for (int i = 0; i < 40; ++i) {
    ClusterConfig c = random_cluster(rng, 5);
    c.repurpose_window_s = std::numeric_limits<double>::infinity();
    double rate = 2.0 + 30.0 * rng.uniform();
    Trace t = random_trace(100 + i, 150, rate, 8192, 40);
    SimulationResult r = simulate(c, models(), t, journaled());
    EXPECT_EQ(testing::replay_routing(c, r.journal, t.requests), std::nullopt);
    bool mixed = std::any_of(r.journal.begin(), r.journal.end(), [](const JournalEntry& e) {
      auto* q = std::get_if<PoolEntry>(&e);
      return q && q->to == Pool::mixed;
    });
    mixed_runs += mixed && !is_baseline(c.design);
  }
  // The matrix must exercise overflow into the mixed pool.
  EXPECT_GT(mixed_runs, 0);
}

void check_records(const SimulationResult& r, const Trace& t, const ClusterConfig& c) {
  ASSERT_EQ(r.records.size(), t.requests.size());
  for (const RequestRecord& rec : r.records) {
    SCOPED_TRACE("request " + std::to_string(rec.id));
    ASSERT_TRUE(rec.finished());
    // Every output token is emitted exactly once, in order.
    ASSERT_EQ(rec.emissions.size(), static_cast<std::size_t>(rec.output_tokens));
    EXPECT_TRUE(std::is_sorted(rec.emissions.begin(), rec.emissions.end()));
    EXPECT_EQ(rec.completion, rec.emissions.back());
    SimTime sum = 0;
    for (std::size_t k = 1; k < rec.emissions.size(); ++k) sum += rec.emissions[k] - rec.emissions[k - 1];
    EXPECT_EQ(rec.e2e(), rec.ttft() + sum);
    // No prompt finishes faster than running alone.
    bool prompt_home = is_baseline(c.design) || static_cast<int>(rec.prompt_machine) < c.prompt_machines;
    const PerfModel& pm = models().at(prompt_home ? prompt_machine_type(c.design)
                                                  : token_machine_type(c.design));
    EXPECT_GE(rec.ttft(), from_millis(prompt_time(pm, rec.prompt_tokens)));
    // A remote second token waits for the transfer.
    if (rec.output_tokens > 1 && rec.prompt_machine != rec.token_machine) {
      EXPECT_GE(rec.emissions[1] - rec.emissions[0], from_millis(rec.transfer_visible_ms));
    }
    EXPECT_LE(rec.preempt_count, c.scheduler.max_preemptions);
  }
  for (const MachineReport& m : r.machines) {
    EXPECT_GE(m.utilization, 0.0);
    EXPECT_LE(m.utilization, 1.0 + 1e-12);
  }
}

TEST(Engine, InvariantsOverRandomMatrix) {
  Rng rng(77, 1);
  for (int i = 0; i < 40; ++i) {
    ClusterConfig c = random_cluster(rng, 6);
    if (rng.uniform() < 0.5) c.repurpose_window_s = 2.0;
    double rate = 1.0 + 40.0 * rng.uniform();
    Trace t = random_trace(500 + i, 200, rate, 8192, 80);
    SCOPED_TRACE(std::string(to_string(c.design)) + " rate " + std::to_string(rate));
    SimulationResult r = simulate(c, models(), t, journaled());
    check_records(r, t, c);
    // Each remote multi-token request is transferred exactly once.
    std::uint64_t remote = 0;
    for (const RequestRecord& rec : r.records)
      remote += rec.output_tokens > 1 && rec.prompt_machine != rec.token_machine;
    EXPECT_EQ(r.transfers, remote);
    for (const JournalEntry& e : r.journal)
      if (auto* b = std::get_if<BatchEntry>(&e)) {
        EXPECT_LE(b->memory_used, b->memory_capacity);
      }
  }
}

TEST(Engine, BaselineNeverTransfers) {
  Trace t = random_trace(9, 300, 20.0);
  for (Design d : {Design::baseline_a100, Design::baseline_h100}) {
    SimulationResult r = simulate(make_cluster_config(d, 3, 0), models(), t);
    EXPECT_EQ(r.transfers, 0u);
    for (const RequestRecord& rec : r.records) {
      EXPECT_EQ(rec.prompt_machine, rec.token_machine);
      EXPECT_EQ(rec.transfer_visible_ms, 0.0);
    }
  }
}

TEST(Engine, RepurposingFlipsUnderSkew) {
  // Prompt-heavy load on a token-heavy cluster keeps token machines mixed.
  Trace t = random_trace(4, 600, 40.0, 8192, 2);
  ClusterConfig c = make_cluster_config(Design::splitwise_aa, 1, 5);
  c.repurpose_window_s = 1.0;
  SimulationResult r = simulate(c, models(), t, journaled());
  // Flipped machines can later flip back once the token pool runs dry, but
  // the first flips must move token machines into the prompt pool.
  std::vector<const PoolEntry*> flips;
  for (const JournalEntry& e : r.journal)
    if (auto* q = std::get_if<PoolEntry>(&e); q && q->role_change) flips.push_back(q);
  ASSERT_FALSE(flips.empty());
  EXPECT_EQ(flips.front()->from, Pool::token);
  EXPECT_EQ(flips.front()->to, Pool::prompt);
  EXPECT_GE(flips.front()->machine, 1u);
  EXPECT_EQ(testing::replay_routing(c, r.journal, t.requests), std::nullopt);
  check_records(r, t, c);
}

TEST(Engine, RunBuildsReport) {
  Trace t = random_trace(5, 100, 5.0);
  RunOutput out = run(make_cluster_config(Design::splitwise_hh, 2, 2), models(), t,
                      models().at(MachineType::A100));
  EXPECT_EQ(out.report.requests, 100u);
  EXPECT_EQ(out.report.completed, 100u);
  EXPECT_EQ(out.report.slo.verdicts.size(), 9u);
  EXPECT_EQ(out.report.machines.size(), 4u);
}

}  // namespace
}  // namespace splitsim
