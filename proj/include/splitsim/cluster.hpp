// Copyright 2026 The splitsim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "splitsim/calibration.hpp"
#include "splitsim/machine.hpp"
#include "splitsim/perfmodel.hpp"
#include "splitsim/sim_time.hpp"
#include "splitsim/trace.hpp"
#include "splitsim/transfer.hpp"

namespace splitsim {

enum class Design {
  baseline_a100,
  baseline_h100,
  splitwise_aa,
  splitwise_hh,
  splitwise_hhcap,
  splitwise_ha,
};

std::string_view to_string(Design design);
/// Case-insensitive; accepts "Splitwise-HH", "splitwise-hh", "splitwise_hh".
Design parse_design(std::string_view name);
std::vector<Design> all_designs();
bool is_baseline(Design design);
MachineType prompt_machine_type(Design design);
MachineType token_machine_type(Design design);

struct ClusterConfig {
  Design design = Design::splitwise_hh;
  /// Baseline designs use prompt_machines as the machine count and require
  /// token_machines == 0.
  int prompt_machines = 1;
  int token_machines = 1;
  std::string llm = "llama2-70b";
  SchedulerConfig scheduler;
  /// Replaces the per-type-pair default link when set.
  std::optional<TransferConfig> transfer;
  double repurpose_window_s = 300.0;  ///< infinity disables repurposing
  double repurpose_fraction = 0.5;
  /// Routing sees pending-token counts at most this old. 0 = exact.
  double status_staleness_s = 0.0;

  int total_machines() const { return prompt_machines + token_machines; }
  bool repurposing_enabled() const {
    return repurpose_window_s < std::numeric_limits<double>::infinity();
  }
  void validate() const;
};

ClusterConfig make_cluster_config(Design design, int prompt_machines,
                                  int token_machines,
                                  std::string llm = "llama2-70b");

struct RoutingDecision {
  std::uint64_t request = 0;
  MachineId prompt_machine = 0;
  MachineId token_machine = 0;
  SimTime decided_at = 0;
};

struct PoolTransition {
  SimTime time = 0;
  MachineId machine = 0;
  Pool from = Pool::prompt;
  Pool to = Pool::prompt;
};

struct RoleChange {
  SimTime time = 0;
  MachineId machine = 0;
  Pool from = Pool::prompt;
  Pool to = Pool::token;
};

/// Machines, pools and the routing policy.
///
/// Pool membership is each machine's current_pool, so the pools always
/// partition the machine set. Machine ids 0..P-1 start as prompt machines and
/// P..P+T-1 as token machines; baseline machines all live in the mixed pool.
class Cluster {
 public:
  Cluster(ClusterConfig config,
          const std::map<MachineType, PerfModel>& models);

  Cluster(const Cluster&) = delete;
  Cluster& operator=(const Cluster&) = delete;

  const ClusterConfig& config() const { return config_; }
  std::size_t size() const { return machines_.size(); }
  Machine& machine(MachineId id) { return machines_.at(id); }
  const Machine& machine(MachineId id) const { return machines_.at(id); }
  std::vector<MachineId> pool_members(Pool pool) const;

  /// JSQ on pending tokens, lowest id on ties. Each role searches its home
  /// pool, then the mixed pool, then the opposite pool, taking the first
  /// whose least-loaded machine is within queue_threshold_tokens; when all
  /// are saturated the least-loaded machine overall wins. Both machines are
  /// chosen from the same snapshot. Enqueues the prompt task and registers
  /// the token task as expected.
  RoutingDecision route(const Request& request, SimTime now);

  /// Pending tokens as the router sees them at `now`.
  std::int64_t observed_pending_tokens(MachineId id, SimTime now);

  void enqueue(MachineId id, Task task, SimTime now);

  /// Returns idle mixed machines without opposite-kind work to their home
  /// pool.
  void update_pools(SimTime now);

  /// Flips the home role of every disaggregated machine whose mixed-pool
  /// residency over the trailing window exceeds repurpose_fraction.
  std::vector<RoleChange> repurpose(SimTime now);

  /// Pool transitions since the previous call, in order.
  std::vector<PoolTransition> take_transitions();

  const TransferConfig& link(MachineId from, MachineId to) const;

  /// Throws InternalError if a machine's pool disagrees with its tasks.
  void check_pools() const;

 private:
  void set_pool(Machine& m, Pool pool, SimTime now);
  void note_pool_change(Machine& m, Pool before, SimTime now);
  MachineId choose(Pool home, const std::vector<std::int64_t>& load) const;

  ClusterConfig config_;
  std::map<MachineType, PerfModel> models_;
  std::vector<Machine> machines_;
  std::map<std::pair<MachineType, MachineType>, TransferConfig> links_;
  std::vector<PoolTransition> transitions_;

  std::vector<std::int64_t> stale_view_;
  SimTime stale_view_time_ = std::numeric_limits<SimTime>::min();
};

}  // namespace splitsim
