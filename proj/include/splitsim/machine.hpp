// Copyright 2026 The splitsim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "splitsim/calibration.hpp"
#include "splitsim/perfmodel.hpp"
#include "splitsim/sim_time.hpp"

namespace splitsim {

using MachineId = std::uint32_t;

/// Pool membership. Baseline machines have `mixed` as their home.
enum class Pool { prompt, token, mixed };

std::string_view to_string(Pool pool);

enum class TaskKind { prompt_phase, token_phase };

std::string_view to_string(TaskKind kind);

enum class MixingRule { sum, max };

std::string_view to_string(MixingRule rule);
MixingRule parse_mixing_rule(std::string_view name);

struct SchedulerConfig {
  std::int64_t prompt_token_cap = 2048;
  int max_preemptions = 4;
  double aging_rate = 1.0;  ///< priority units per second of waiting
  std::int64_t queue_threshold_tokens = 4096;
  MixingRule mixing_rule = MixingRule::sum;

  void validate() const;
};

struct Task {
  std::uint64_t request = 0;
  TaskKind kind = TaskKind::prompt_phase;
  /// Prompt size for prompt tasks; context length so far for token tasks.
  std::int64_t tokens = 0;
  std::int64_t prompt_tokens = 0;
  std::int64_t output_tokens = 0;
  std::int64_t emitted = 0;
  SimTime enqueue_time = 0;
  int preempt_count = 0;
  double age_priority = 0.0;
  /// Prompt task whose token phase continues on the same machine.
  bool local_token_phase = false;

  std::int64_t reserved_bytes = 0;
  bool ran_last_iteration = false;
};

/// Added to the aged priority of a task that reached max_preemptions. Larger
/// than aging_rate times any representable horizon, so such a task always
/// outranks every aged task.
inline constexpr double kNonPreemptableBonus = 1e15;

/// aging_rate * seconds waited on this machine, plus kNonPreemptableBonus once
/// the task can no longer be preempted.
double aging_priority(const Task& task, SimTime now,
                      const SchedulerConfig& config);

enum class BatchKind { prompt_only, token_only, mixed };

std::string_view to_string(BatchKind kind);

struct Batch {
  BatchKind kind = BatchKind::token_only;
  std::vector<std::uint64_t> prompt_requests;
  std::vector<std::uint64_t> token_requests;
  std::int64_t prompt_tokens = 0;
  double prompt_ms = 0.0;  ///< prompt component of the iteration
  double iteration_ms = 0.0;
  SimTime start = 0;
  SimTime duration = 0;
  /// Resident token tasks left out of this iteration.
  std::vector<std::uint64_t> preempted;

  std::int64_t active_tokens() const {
    return prompt_tokens + static_cast<std::int64_t>(token_requests.size());
  }
};

/// Outcome of one finished iteration for one request.
struct MachineEvent {
  enum class Kind { prompt_finished, token_emitted, request_finished };
  Kind kind = Kind::token_emitted;
  std::uint64_t request = 0;
  std::int64_t context = 0;
  /// For prompt_finished: the token phase stays on this machine.
  bool local = false;
  /// For request_finished: times the token phase was preempted here.
  int preempt_count = 0;
};

struct MachineStats {
  SimTime busy = 0;
  std::uint64_t iterations = 0;
  std::uint64_t prompt_iterations = 0;
  std::uint64_t mixed_iterations = 0;
  /// Time spent per active-token bucket; key is the bucket's upper bound
  /// (1, 2, 4, ...), weighted by iteration duration.
  std::map<std::int64_t, SimTime> batched_tokens;
};

/// Machine-level scheduler state for one server.
///
/// Token tasks hold memory for their final context (prompt + output) from
/// admission until they finish. Preemption pauses compute only; it never
/// frees memory. Prompts whose KV-cache ships elsewhere hold kv(prompt) until
/// release_outgoing() is called for them.
class Machine {
 public:
  Machine(MachineId id, const MachineSpec& spec, const PerfModel& model,
          Pool home);

  MachineId id() const { return id_; }
  MachineType type() const { return spec_.machine_type; }
  const MachineSpec& spec() const { return spec_; }
  const PerfModel& model() const { return *model_; }

  Pool home_role() const { return home_; }
  Pool current_pool() const { return pool_; }
  void set_home_role(Pool home) { home_ = home; }
  /// Moves the machine between pools and tracks mixed-pool residency.
  void set_pool(Pool pool, SimTime now);

  /// Appends a task FIFO. A task of the opposite kind to the home role moves
  /// the machine into the mixed pool. Duplicates throw InternalError.
  void enqueue(Task task, SimTime now);
  /// Registers a token phase routed here whose KV-cache has not arrived yet.
  void expect_token_task(std::uint64_t request, SimTime now);
  void cancel_expected(std::uint64_t request);

  /// Builds the next iteration's batch and marks it running. Returns nullptr
  /// when nothing is admissible.
  const Batch* form_batch(SimTime now, const SchedulerConfig& config);
  /// Finishes the running batch: prompts emit their first token, token tasks
  /// emit one token, finished requests release memory.
  std::vector<MachineEvent> complete_iteration(SimTime now);
  void release_outgoing(std::uint64_t request);

  bool busy() const { return running_.has_value(); }
  const Batch* running() const { return running_ ? &*running_ : nullptr; }

  /// Queued plus running prompt tokens, plus one per token task that is
  /// expected, queued, resident, or running.
  std::int64_t pending_tokens() const;
  std::int64_t memory_used() const { return memory_used_; }
  std::int64_t memory_capacity() const { return model_->memory_capacity; }

  bool has_prompt_work() const;
  bool has_token_work() const;
  /// Work of the kind this machine's home role does not normally run.
  bool has_opposite_work() const;
  bool idle() const;

  std::size_t queued_prompts() const { return queued_prompt_count_; }
  std::size_t queued_tokens() const {
    return pending_.size() - queued_prompt_count_;
  }
  std::size_t resident_tokens() const { return resident_.size(); }
  std::size_t expected_tokens() const { return expected_.size(); }
  std::size_t parked_tokens() const;
  std::int64_t preempt_count(std::uint64_t request) const;

  /// Time spent in the mixed pool within [from, to].
  SimTime mixed_residency(SimTime from, SimTime to) const;
  void reset_residency(SimTime now);
  void forget_residency_before(SimTime t);

  const MachineStats& stats() const { return stats_; }

 private:
  bool fits(std::int64_t bytes) const {
    return memory_used_ + bytes <= memory_capacity();
  }
  std::int64_t token_reservation(const Task& task) const;
  std::int64_t prompt_reservation(const Task& task) const;
  void admit_tokens();
  void select_prompts(std::int64_t budget, Batch& batch);
  void finalize(Batch& batch, const SchedulerConfig& config);
  void reserve(std::int64_t bytes);
  void release(std::int64_t bytes);

  MachineId id_;
  MachineSpec spec_;
  const PerfModel* model_;
  Pool home_;
  Pool pool_;

  std::deque<Task> pending_;
  std::size_t queued_prompt_count_ = 0;
  std::int64_t queued_prompt_tokens_ = 0;
  std::vector<Task> running_prompts_;
  std::int64_t running_prompt_tokens_ = 0;
  std::vector<Task> resident_;
  std::unordered_set<std::uint64_t> expected_;
  std::unordered_set<std::uint64_t> present_;  // prompt and token tasks
  std::unordered_map<std::uint64_t, std::int64_t> outgoing_;
  std::optional<Batch> running_;
  std::int64_t memory_used_ = 0;

  std::vector<std::pair<SimTime, SimTime>> mixed_intervals_;
  std::optional<SimTime> mixed_since_;

  MachineStats stats_;
};

}  // namespace splitsim
