// Copyright 2026 The splitsim Authors
// SPDX-License-Identifier: Apache-2.0

#include "splitsim/machine.hpp"

#include <algorithm>
#include <bit>
#include <numeric>

#include <fmt/format.h>

#include "splitsim/error.hpp"

namespace splitsim {

std::string_view to_string(Pool pool) {
  switch (pool) {
    case Pool::prompt: return "prompt";
    case Pool::token: return "token";
    case Pool::mixed: return "mixed";
  }
  return "?";
}

std::string_view to_string(TaskKind kind) {
  return kind == TaskKind::prompt_phase ? "prompt" : "token";
}

std::string_view to_string(MixingRule rule) { return rule == MixingRule::sum ? "sum" : "max"; }

MixingRule parse_mixing_rule(std::string_view name) {
  if (name == "sum") return MixingRule::sum;
  if (name == "max") return MixingRule::max;
  throw ConfigError(fmt::format("unknown mixing rule '{}' (expected sum or max)", name));
}

std::string_view to_string(BatchKind kind) {
  switch (kind) {
    case BatchKind::prompt_only: return "prompt_only";
    case BatchKind::token_only: return "token_only";
    case BatchKind::mixed: return "mixed";
  }
  return "?";
}

void SchedulerConfig::validate() const {
  if (prompt_token_cap < 1) throw ConfigError("prompt_token_cap must be positive");
  if (max_preemptions < 1) throw ConfigError("max_preemptions must be positive");
  if (!(aging_rate > 0.0)) throw ConfigError("aging_rate must be positive");
  if (queue_threshold_tokens < 1) throw ConfigError("queue_threshold_tokens must be positive");
}

double aging_priority(const Task& task, SimTime now, const SchedulerConfig& config) {
  double p = config.aging_rate * to_seconds(now - task.enqueue_time);
  if (task.preempt_count >= config.max_preemptions) p += kNonPreemptableBonus;
  return p;
}

Machine::Machine(MachineId id, const MachineSpec& spec, const PerfModel& model, Pool home)
    : id_(id), spec_(spec), model_(&model), home_(home), pool_(home) {
  memory_used_ = model.weight_memory;
  if (home == Pool::mixed) mixed_since_ = 0;
}

void Machine::set_pool(Pool pool, SimTime now) {
  if (pool == pool_) return;
  if (pool_ == Pool::mixed && mixed_since_) {
    mixed_intervals_.emplace_back(*mixed_since_, now);
    mixed_since_.reset();
  }
  if (pool == Pool::mixed) mixed_since_ = now;
  pool_ = pool;
}

void Machine::enqueue(Task task, SimTime now) {
  if (!present_.insert(task.request).second)
    throw InternalError(fmt::format("request {} already queued on machine {}", task.request, id_));
  task.enqueue_time = now;
  if (task.kind == TaskKind::token_phase) {
    expected_.erase(task.request);
  } else {
    ++queued_prompt_count_;
    queued_prompt_tokens_ += task.tokens;
  }
  bool opposite = (home_ == Pool::prompt && task.kind == TaskKind::token_phase) ||
                  (home_ == Pool::token && task.kind == TaskKind::prompt_phase);
  pending_.push_back(std::move(task));
  if (opposite) set_pool(Pool::mixed, now);
}

void Machine::expect_token_task(std::uint64_t request, SimTime now) {
  expected_.insert(request);
  if (home_ == Pool::prompt) set_pool(Pool::mixed, now);
}

void Machine::cancel_expected(std::uint64_t request) { expected_.erase(request); }

std::int64_t Machine::token_reservation(const Task& task) const {
  return kv_cache_bytes(*model_, task.prompt_tokens + task.output_tokens);
}

std::int64_t Machine::prompt_reservation(const Task& task) const {
  return task.local_token_phase ? token_reservation(task)
                                : kv_cache_bytes(*model_, task.prompt_tokens);
}

void Machine::reserve(std::int64_t bytes) {
  memory_used_ += bytes;
  if (memory_used_ > memory_capacity())
    throw InternalError(fmt::format("machine {} over memory capacity", id_));
}

void Machine::release(std::int64_t bytes) {
  memory_used_ -= bytes;
  if (memory_used_ < model_->weight_memory)
    throw InternalError(fmt::format("machine {} released more memory than reserved", id_));
}

// Strict FCFS among token tasks: stop at the first one that does not fit.
void Machine::admit_tokens() {
  for (auto it = pending_.begin(); it != pending_.end();) {
    if (it->kind != TaskKind::token_phase) {
      ++it;
      continue;
    }
    std::int64_t bytes = token_reservation(*it);
    if (static_cast<std::int64_t>(resident_.size()) >= model_->max_token_batch || !fits(bytes))
      return;
    reserve(bytes);
    Task t = std::move(*it);
    it = pending_.erase(it);
    t.reserved_bytes = bytes;
    t.preempt_count = 0;
    t.ran_last_iteration = false;
    resident_.push_back(std::move(t));
  }
}

// Strict FCFS among prompt tasks. The first prompt is admitted whatever its
// size; later ones only while the batch stays within `budget`.
void Machine::select_prompts(std::int64_t budget, Batch& batch) {
  std::size_t local_in_batch = 0;
  for (auto it = pending_.begin(); it != pending_.end();) {
    if (it->kind != TaskKind::prompt_phase) {
      ++it;
      continue;
    }
    if (batch.prompt_tokens > 0 && batch.prompt_tokens + it->tokens > budget) return;
    std::int64_t bytes = prompt_reservation(*it);
    if (!fits(bytes)) return;
    if (it->local_token_phase &&
        static_cast<std::int64_t>(resident_.size() + local_in_batch) >= model_->max_token_batch)
      return;
    reserve(bytes);
    Task t = std::move(*it);
    it = pending_.erase(it);
    t.reserved_bytes = bytes;
    local_in_batch += t.local_token_phase;
    --queued_prompt_count_;
    queued_prompt_tokens_ -= t.tokens;
    running_prompt_tokens_ += t.tokens;
    batch.prompt_tokens += t.tokens;
    batch.prompt_requests.push_back(t.request);
    running_prompts_.push_back(std::move(t));
  }
}

const Batch* Machine::form_batch(SimTime now, const SchedulerConfig& config) {
  if (running_) throw InternalError(fmt::format("machine {} is mid-iteration", id_));
  Batch batch;
  batch.start = now;

  switch (pool_) {
    case Pool::prompt:
      if (queued_tokens() > 0 || !resident_.empty())
        throw InternalError(fmt::format("prompt-pool machine {} holds token tasks", id_));
      select_prompts(config.prompt_token_cap, batch);
      break;
    case Pool::token:
      if (queued_prompt_count_ > 0)
        throw InternalError(fmt::format("token-pool machine {} holds prompt tasks", id_));
      admit_tokens();
      for (Task& t : resident_) {
        t.ran_last_iteration = true;
        batch.token_requests.push_back(t.request);
      }
      break;
    case Pool::mixed: {
      admit_tokens();
      std::int64_t forced = 0;
      for (Task& t : resident_) {
        t.age_priority = aging_priority(t, now, config);
        forced += t.preempt_count >= config.max_preemptions;
      }
      select_prompts(config.prompt_token_cap - forced, batch);
      std::int64_t room = std::max<std::int64_t>(0, config.prompt_token_cap - batch.prompt_tokens);
      auto slots = static_cast<std::size_t>(
          std::max(forced, std::min(model_->max_token_batch, room)));

      std::vector<std::size_t> order(resident_.size());
      std::iota(order.begin(), order.end(), 0);
      // Highest priority runs first; among equals the largest context is the
      // first victim.
      std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const Task& x = resident_[a];
        const Task& y = resident_[b];
        if (x.age_priority != y.age_priority) return x.age_priority > y.age_priority;
        if (x.tokens != y.tokens) return x.tokens < y.tokens;
        return x.request < y.request;
      });
      for (std::size_t k = 0; k < order.size(); ++k) {
        Task& t = resident_[order[k]];
        bool chosen = k < slots;
        if (chosen) {
          batch.token_requests.push_back(t.request);
        } else {
          // Every skipped iteration counts, so a task waits at most
          // max_preemptions iterations before it is forced in.
          t.preempt_count = std::min(t.preempt_count + 1, config.max_preemptions);
          batch.preempted.push_back(t.request);
        }
        t.ran_last_iteration = chosen;
      }
      break;
    }
  }

  if (batch.prompt_requests.empty() && batch.token_requests.empty()) return nullptr;
  finalize(batch, config);
  running_ = std::move(batch);
  return &*running_;
}

void Machine::finalize(Batch& batch, const SchedulerConfig& config) {
  bool prompts = !batch.prompt_requests.empty();
  bool tokens = !batch.token_requests.empty();
  double token_ms = 0.0;
  if (prompts) batch.prompt_ms = prompt_time(*model_, batch.prompt_tokens);
  if (tokens)
    token_ms = token_iter_time(*model_, static_cast<std::int64_t>(batch.token_requests.size()));
  if (prompts && tokens) {
    batch.kind = BatchKind::mixed;
    batch.iteration_ms = config.mixing_rule == MixingRule::sum ? batch.prompt_ms + token_ms
                                                               : std::max(batch.prompt_ms, token_ms);
  } else if (prompts) {
    batch.kind = BatchKind::prompt_only;
    batch.iteration_ms = batch.prompt_ms;
  } else {
    batch.kind = BatchKind::token_only;
    batch.iteration_ms = token_ms;
  }
  batch.duration = std::max<SimTime>(1, from_millis(batch.iteration_ms));
}

std::vector<MachineEvent> Machine::complete_iteration(SimTime now) {
  if (!running_) throw InternalError(fmt::format("machine {} has no running batch", id_));
  Batch batch = std::move(*running_);
  running_.reset();

  stats_.busy += batch.duration;
  ++stats_.iterations;
  stats_.prompt_iterations += batch.kind == BatchKind::prompt_only;
  stats_.mixed_iterations += batch.kind == BatchKind::mixed;
  stats_.batched_tokens[static_cast<std::int64_t>(
      std::bit_ceil(static_cast<std::uint64_t>(batch.active_tokens())))] += batch.duration;

  std::vector<MachineEvent> events;
  std::vector<Task> prompts = std::move(running_prompts_);
  running_prompts_.clear();
  running_prompt_tokens_ = 0;
  for (Task& t : prompts) {
    t.emitted = 1;
    events.push_back({MachineEvent::Kind::prompt_finished, t.request, t.prompt_tokens,
                      t.local_token_phase, 0});
    if (t.output_tokens == 1) {
      release(t.reserved_bytes);
      present_.erase(t.request);
      expected_.erase(t.request);
      events.push_back({MachineEvent::Kind::request_finished, t.request, t.prompt_tokens, false, 0});
    } else if (t.local_token_phase) {
      expected_.erase(t.request);
      t.kind = TaskKind::token_phase;
      t.tokens = t.prompt_tokens + 1;
      t.enqueue_time = now;
      t.preempt_count = 0;
      t.ran_last_iteration = false;
      resident_.push_back(std::move(t));
    } else {
      outgoing_.emplace(t.request, t.reserved_bytes);
      present_.erase(t.request);
    }
  }

  std::vector<MachineEvent> finished;
  std::erase_if(resident_, [&](Task& t) {
    if (!t.ran_last_iteration || t.emitted == 0) return false;
    ++t.emitted;
    ++t.tokens;
    events.push_back({MachineEvent::Kind::token_emitted, t.request, t.tokens, false, 0});
    if (t.emitted < t.output_tokens) return false;
    release(t.reserved_bytes);
    present_.erase(t.request);
    events.push_back(
        {MachineEvent::Kind::request_finished, t.request, t.tokens, false, t.preempt_count});
    return true;
  });
  return events;
}

void Machine::release_outgoing(std::uint64_t request) {
  auto it = outgoing_.find(request);
  if (it == outgoing_.end())
    throw InternalError(fmt::format("no outgoing KV-cache for request {} on machine {}", request, id_));
  release(it->second);
  outgoing_.erase(it);
}

std::int64_t Machine::pending_tokens() const {
  return queued_prompt_tokens_ + running_prompt_tokens_ +
         static_cast<std::int64_t>(queued_tokens() + resident_.size() + expected_.size());
}

bool Machine::has_prompt_work() const {
  return queued_prompt_count_ > 0 || !running_prompts_.empty();
}

bool Machine::has_token_work() const {
  return queued_tokens() > 0 || !resident_.empty() || !expected_.empty();
}

bool Machine::has_opposite_work() const {
  switch (home_) {
    case Pool::prompt: return has_token_work();
    case Pool::token: return has_prompt_work();
    case Pool::mixed: return false;
  }
  return false;
}

bool Machine::idle() const {
  return !running_ && pending_.empty() && resident_.empty() && expected_.empty() &&
         running_prompts_.empty();
}

std::size_t Machine::parked_tokens() const {
  return static_cast<std::size_t>(std::count_if(
      resident_.begin(), resident_.end(), [](const Task& t) { return !t.ran_last_iteration; }));
}

std::int64_t Machine::preempt_count(std::uint64_t request) const {
  for (const Task& t : resident_)
    if (t.request == request) return t.preempt_count;
  return -1;
}

SimTime Machine::mixed_residency(SimTime from, SimTime to) const {
  SimTime total = 0;
  auto overlap = [&](SimTime a, SimTime b) {
    SimTime lo = std::max(a, from), hi = std::min(b, to);
    return hi > lo ? hi - lo : SimTime{0};
  };
  for (const auto& [a, b] : mixed_intervals_) total += overlap(a, b);
  if (mixed_since_) total += overlap(*mixed_since_, to);
  return total;
}

void Machine::reset_residency(SimTime now) {
  mixed_intervals_.clear();
  if (mixed_since_) mixed_since_ = now;
}

void Machine::forget_residency_before(SimTime t) {
  std::erase_if(mixed_intervals_, [t](const auto& iv) { return iv.second <= t; });
}

}  // namespace splitsim
