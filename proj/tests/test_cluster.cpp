// Copyright 2026 The splitsim Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <limits>

#include "splitsim/calibration.hpp"
#include "splitsim/cluster.hpp"
#include "splitsim/error.hpp"

namespace splitsim {
namespace {

const std::map<MachineType, PerfModel>& models() {
  static const auto m = calibrated_models("llama2-70b");
  return m;
}

Task prompt_task(std::uint64_t id, std::int64_t prompt, std::int64_t output = 10) {
  Task t;
  t.request = id;
  t.kind = TaskKind::prompt_phase;
  t.tokens = prompt;
  t.prompt_tokens = prompt;
  t.output_tokens = output;
  return t;
}

Request request(std::uint64_t id, std::int64_t prompt = 100, std::int64_t output = 10) {
  return {id, 0.0, prompt, output};
}

TEST(Design, NamesAndTypes) {
  EXPECT_EQ(all_designs().size(), 6u);
  EXPECT_EQ(parse_design("Splitwise-HH"), Design::splitwise_hh);
  EXPECT_EQ(parse_design("splitwise_hhcap"), Design::splitwise_hhcap);
  EXPECT_EQ(parse_design("BASELINE-A100"), Design::baseline_a100);
  EXPECT_THROW(parse_design("splitwise-xx"), ConfigError);
  for (Design d : all_designs()) EXPECT_EQ(parse_design(to_string(d)), d);
  EXPECT_EQ(prompt_machine_type(Design::splitwise_ha), MachineType::H100);
  EXPECT_EQ(token_machine_type(Design::splitwise_ha), MachineType::A100);
  EXPECT_EQ(token_machine_type(Design::splitwise_hhcap), MachineType::H100cap);
  EXPECT_TRUE(is_baseline(Design::baseline_h100));
  EXPECT_FALSE(is_baseline(Design::splitwise_aa));
}

TEST(ClusterConfig, Validation) {
  EXPECT_THROW(make_cluster_config(Design::baseline_a100, 2, 1).validate(), ConfigError);
  EXPECT_THROW(make_cluster_config(Design::baseline_a100, 0, 0).validate(), ConfigError);
  EXPECT_THROW(make_cluster_config(Design::splitwise_hh, 0, 0).validate(), ConfigError);
  EXPECT_NO_THROW(make_cluster_config(Design::splitwise_hh, 0, 2).validate());
  ClusterConfig c = make_cluster_config(Design::splitwise_hh, 1, 1);
  c.repurpose_fraction = 0;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Cluster, MissingModelNamesType) {
  std::map<MachineType, PerfModel> only_a100 = {{MachineType::A100, models().at(MachineType::A100)}};
  try {
    Cluster c(make_cluster_config(Design::splitwise_hh, 1, 1), only_a100);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("H100"), std::string::npos);
  }
}

TEST(Cluster, InitialPools) {
  Cluster c(make_cluster_config(Design::splitwise_hh, 2, 3), models());
  EXPECT_EQ(c.pool_members(Pool::prompt), (std::vector<MachineId>{0, 1}));
  EXPECT_EQ(c.pool_members(Pool::token), (std::vector<MachineId>{2, 3, 4}));
  EXPECT_TRUE(c.pool_members(Pool::mixed).empty());
  Cluster b(make_cluster_config(Design::baseline_a100, 3, 0), models());
  EXPECT_EQ(b.pool_members(Pool::mixed).size(), 3u);
}

TEST(Route, ShortestQueueWins) {
  Cluster c(make_cluster_config(Design::splitwise_hh, 2, 1), models());
  c.enqueue(0, prompt_task(100, 3000), 0);
  c.enqueue(1, prompt_task(101, 500), 0);
  RoutingDecision d = c.route(request(1), 0);
  EXPECT_EQ(d.prompt_machine, 1u);
  EXPECT_EQ(d.token_machine, 2u);
  EXPECT_EQ(d.decided_at, 0);
}

TEST(Route, TiesGoToLowestId) {
  Cluster c(make_cluster_config(Design::splitwise_hh, 2, 2), models());
  RoutingDecision d = c.route(request(1), 0);
  EXPECT_EQ(d.prompt_machine, 0u);
  EXPECT_EQ(d.token_machine, 2u);
  // Machine 0 now has 100 pending prompt tokens and machine 2 one expected
  // token task.
  d = c.route(request(2), 0);
  EXPECT_EQ(d.prompt_machine, 1u);
  EXPECT_EQ(d.token_machine, 3u);
}

TEST(Route, SaturatedPromptPoolOverflowsToTokenMachine) {
  Cluster c(make_cluster_config(Design::splitwise_hh, 2, 2), models());
  c.enqueue(0, prompt_task(100, 5000), 0);
  c.enqueue(1, prompt_task(101, 5000), 0);
  c.enqueue(3, prompt_task(102, 10), 0);  // machine 3 becomes mixed
  c.take_transitions();
  ASSERT_EQ(c.machine(3).current_pool(), Pool::mixed);
  // The mixed machine is checked before the opposite pool.
  RoutingDecision d = c.route(request(1), from_seconds(1));
  EXPECT_EQ(d.prompt_machine, 3u);

  Cluster e(make_cluster_config(Design::splitwise_hh, 2, 2), models());
  e.enqueue(0, prompt_task(100, 5000), 0);
  e.enqueue(1, prompt_task(101, 5000), 0);
  d = e.route(request(1), from_seconds(1));
  EXPECT_EQ(d.prompt_machine, 2u);
  EXPECT_EQ(e.machine(2).current_pool(), Pool::mixed);
  auto transitions = e.take_transitions();
  ASSERT_EQ(transitions.size(), 1u);
  EXPECT_EQ(transitions[0].machine, 2u);
  EXPECT_EQ(transitions[0].from, Pool::token);
  EXPECT_EQ(transitions[0].to, Pool::mixed);
  EXPECT_EQ(transitions[0].time, from_seconds(1));
}

TEST(Route, EverythingSaturatedPrefersHomeAndMixed) {
  Cluster c(make_cluster_config(Design::splitwise_hh, 1, 1), models());
  c.enqueue(0, prompt_task(100, 9000), 0);
  // The token machine is idle but above-threshold checks pass only for it;
  // push it over the threshold too.
  c.enqueue(1, prompt_task(101, 8000), 0);
  c.take_transitions();
  RoutingDecision d = c.route(request(1), 0);
  // Machine 1 is mixed (8000) and machine 0 is home (9000); both saturated.
  EXPECT_EQ(d.prompt_machine, 1u);
}

TEST(Route, BaselineUsesOneMachine) {
  Cluster c(make_cluster_config(Design::baseline_h100, 3, 0), models());
  for (std::uint64_t i = 0; i < 6; ++i) {
    RoutingDecision d = c.route(request(i, 100 * (i + 1)), 0);
    EXPECT_EQ(d.prompt_machine, d.token_machine);
  }
  EXPECT_EQ(c.pool_members(Pool::mixed).size(), 3u);
}

TEST(Route, StaleViewLagsBehindQueues) {
  ClusterConfig cfg = make_cluster_config(Design::splitwise_hh, 2, 1);
  cfg.status_staleness_s = 10;
  Cluster c(cfg, models());
  EXPECT_EQ(c.observed_pending_tokens(0, 0), 0);
  c.enqueue(0, prompt_task(100, 3000), 0);
  EXPECT_EQ(c.observed_pending_tokens(0, from_seconds(5)), 0);
  EXPECT_EQ(c.observed_pending_tokens(0, from_seconds(10)), 3000);
}

TEST(PendingTokens, PromptTokensMoveToTokenMachine) {
  Cluster c(make_cluster_config(Design::splitwise_hh, 1, 1), models());
  c.route(request(1, 1500, 5), 0);
  EXPECT_EQ(c.machine(0).pending_tokens(), 1500);
  EXPECT_EQ(c.machine(1).pending_tokens(), 1);
  const Batch* b = c.machine(0).form_batch(0, {});
  c.machine(0).complete_iteration(b->duration);
  EXPECT_EQ(c.machine(0).pending_tokens(), 0);
  EXPECT_EQ(c.machine(1).pending_tokens(), 1);
}

TEST(UpdatePools, ReturnsHomeWhenOppositeWorkDrains) {
  Cluster c(make_cluster_config(Design::splitwise_hh, 1, 1), models());
  c.enqueue(1, prompt_task(7, 100, 1), 0);
  EXPECT_EQ(c.machine(1).current_pool(), Pool::mixed);
  const Batch* b = c.machine(1).form_batch(0, {});
  c.update_pools(0);
  EXPECT_EQ(c.machine(1).current_pool(), Pool::mixed);  // still running the prompt
  SimTime done = b->duration;
  c.machine(1).complete_iteration(done);
  c.update_pools(done);
  EXPECT_EQ(c.machine(1).current_pool(), Pool::token);
  auto t = c.take_transitions();
  ASSERT_EQ(t.size(), 2u);
  EXPECT_EQ(t[1].from, Pool::mixed);
  EXPECT_EQ(t[1].to, Pool::token);
  EXPECT_EQ(t[1].time, done);
  EXPECT_NO_THROW(c.check_pools());
}

TEST(Repurpose, FlipsLongMixedMachines) {
  ClusterConfig cfg = make_cluster_config(Design::splitwise_hh, 1, 2);
  cfg.repurpose_window_s = 100;
  Cluster c(cfg, models());
  // Machine 1 is mixed from t=20 s to the end of the window: 80%.
  c.enqueue(1, prompt_task(5, 100), from_seconds(20));
  // Machine 2 is mixed for exactly half the window: not strictly above.
  c.enqueue(2, prompt_task(6, 100), from_seconds(50));
  auto changes = c.repurpose(from_seconds(100));
  ASSERT_EQ(changes.size(), 1u);
  EXPECT_EQ(changes[0].machine, 1u);
  EXPECT_EQ(changes[0].from, Pool::token);
  EXPECT_EQ(changes[0].to, Pool::prompt);
  EXPECT_EQ(c.machine(1).home_role(), Pool::prompt);
  // Its queued prompt is now home work.
  EXPECT_EQ(c.machine(1).current_pool(), Pool::prompt);
  EXPECT_EQ(c.machine(0).home_role(), Pool::prompt);
  EXPECT_EQ(c.machine(2).home_role(), Pool::token);
  EXPECT_NO_THROW(c.check_pools());
}

TEST(Repurpose, DisabledOrBaselineNeverFlips) {
  ClusterConfig cfg = make_cluster_config(Design::splitwise_hh, 1, 1);
  cfg.repurpose_window_s = std::numeric_limits<double>::infinity();
  Cluster c(cfg, models());
  c.enqueue(1, prompt_task(5, 100), 0);
  EXPECT_TRUE(c.repurpose(from_seconds(1000)).empty());
  Cluster b(make_cluster_config(Design::baseline_a100, 2, 0), models());
  EXPECT_TRUE(b.repurpose(from_seconds(1000)).empty());
}

TEST(Repurpose, NeverMixedUnchanged) {
  Cluster c(make_cluster_config(Design::splitwise_aa, 2, 2), models());
  EXPECT_TRUE(c.repurpose(from_seconds(300)).empty());
}

TEST(Cluster, LinksFollowMachineTypes) {
  Cluster ha(make_cluster_config(Design::splitwise_ha, 1, 1), models());
  EXPECT_EQ(ha.link(0, 1).bandwidth_bps, 200e9);
  Cluster hh(make_cluster_config(Design::splitwise_hh, 1, 1), models());
  EXPECT_EQ(hh.link(0, 1).bandwidth_bps, 400e9);
  ClusterConfig custom = make_cluster_config(Design::splitwise_hh, 1, 1);
  TransferConfig t;
  t.bandwidth_bps = 1e9;
  custom.transfer = t;
  Cluster cc(custom, models());
  EXPECT_EQ(cc.link(0, 1).bandwidth_bps, 1e9);
}

}  // namespace
}  // namespace splitsim
