// Copyright 2026 The splitsim Authors
// SPDX-License-Identifier: Apache-2.0

#include "splitsim/cluster.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include <fmt/format.h>

#include "splitsim/error.hpp"

namespace splitsim {

namespace {

Pool opposite(Pool p) { return p == Pool::prompt ? Pool::token : Pool::prompt; }

}  // namespace

std::string_view to_string(Design design) {
  switch (design) {
    case Design::baseline_a100: return "Baseline-A100";
    case Design::baseline_h100: return "Baseline-H100";
    case Design::splitwise_aa: return "Splitwise-AA";
    case Design::splitwise_hh: return "Splitwise-HH";
    case Design::splitwise_hhcap: return "Splitwise-HHcap";
    case Design::splitwise_ha: return "Splitwise-HA";
  }
  return "?";
}

std::vector<Design> all_designs() {
  return {Design::baseline_a100, Design::baseline_h100, Design::splitwise_aa,
          Design::splitwise_hh,  Design::splitwise_hhcap, Design::splitwise_ha};
}

Design parse_design(std::string_view name) {
  auto normalize = [](std::string_view s) {
    std::string out;
    for (char c : s) {
      char lc = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
      out.push_back(lc == '_' ? '-' : lc);
    }
    return out;
  };
  std::string wanted = normalize(name);
  for (Design d : all_designs())
    if (normalize(to_string(d)) == wanted) return d;
  throw ConfigError(fmt::format("unknown design '{}'", name));
}

bool is_baseline(Design design) {
  return design == Design::baseline_a100 || design == Design::baseline_h100;
}

MachineType prompt_machine_type(Design design) {
  switch (design) {
    case Design::baseline_a100:
    case Design::splitwise_aa: return MachineType::A100;
    default: return MachineType::H100;
  }
}

MachineType token_machine_type(Design design) {
  switch (design) {
    case Design::baseline_a100:
    case Design::splitwise_aa:
    case Design::splitwise_ha: return MachineType::A100;
    case Design::splitwise_hhcap: return MachineType::H100cap;
    default: return MachineType::H100;
  }
}

void ClusterConfig::validate() const {
  scheduler.validate();
  if (is_baseline(design)) {
    if (prompt_machines < 1 || token_machines != 0)
      throw ConfigError(fmt::format("{} takes one machine count >= 1", to_string(design)));
  } else if (prompt_machines < 0 || token_machines < 0 || total_machines() < 1) {
    throw ConfigError("machine counts must be >= 0 with at least one machine");
  }
  if (!(repurpose_window_s > 0.0)) throw ConfigError("repurpose window must be positive");
  if (!(repurpose_fraction > 0.0 && repurpose_fraction <= 1.0))
    throw ConfigError("repurpose fraction must be in (0, 1]");
  if (!(status_staleness_s >= 0.0)) throw ConfigError("status staleness must be >= 0");
  if (transfer) transfer->validate();
}

ClusterConfig make_cluster_config(Design design, int prompt_machines, int token_machines,
                                  std::string llm) {
  ClusterConfig c;
  c.design = design;
  c.prompt_machines = prompt_machines;
  c.token_machines = token_machines;
  c.llm = std::move(llm);
  return c;
}

Cluster::Cluster(ClusterConfig config, const std::map<MachineType, PerfModel>& models)
    : config_(std::move(config)) {
  config_.validate();
  const LlmSpec& llm = llm_spec(config_.llm);
  MachineType ptype = prompt_machine_type(config_.design);
  MachineType ttype = token_machine_type(config_.design);
  for (MachineType t : {ptype, ttype}) {
    auto it = models.find(t);
    if (it == models.end())
      throw ConfigError(fmt::format("no performance model for machine type {}", to_string(t)));
    if (it->second.llm != config_.llm)
      throw ConfigError(fmt::format("model for {} is for LLM '{}', cluster runs '{}'",
                                    to_string(t), it->second.llm, config_.llm));
    models_.emplace(t, it->second);
  }
  bool baseline = is_baseline(config_.design);
  machines_.reserve(static_cast<std::size_t>(config_.total_machines()));
  for (int i = 0; i < config_.prompt_machines; ++i)
    machines_.emplace_back(static_cast<MachineId>(i), machine_spec(ptype), models_.at(ptype),
                           baseline ? Pool::mixed : Pool::prompt);
  for (int i = 0; i < config_.token_machines; ++i)
    machines_.emplace_back(static_cast<MachineId>(config_.prompt_machines + i),
                           machine_spec(ttype), models_.at(ttype), Pool::token);
  for (MachineType a : {ptype, ttype})
    for (MachineType b : {ptype, ttype})
      links_[{a, b}] = config_.transfer ? *config_.transfer : default_link(a, b, llm.num_layers);
  stale_view_.assign(machines_.size(), 0);
}

std::vector<MachineId> Cluster::pool_members(Pool pool) const {
  std::vector<MachineId> out;
  for (const Machine& m : machines_)
    if (m.current_pool() == pool) out.push_back(m.id());
  return out;
}

std::int64_t Cluster::observed_pending_tokens(MachineId id, SimTime now) {
  if (config_.status_staleness_s <= 0.0) return machines_.at(id).pending_tokens();
  SimTime staleness = from_seconds(config_.status_staleness_s);
  if (stale_view_time_ == std::numeric_limits<SimTime>::min() || now - stale_view_time_ >= staleness) {
    for (const Machine& m : machines_) stale_view_[m.id()] = m.pending_tokens();
    stale_view_time_ = now;
  }
  return stale_view_[id];
}

MachineId Cluster::choose(Pool home, const std::vector<std::int64_t>& load) const {
  auto argmin = [&](auto&& eligible) {
    std::optional<MachineId> best;
    for (const Machine& m : machines_)
      if (eligible(m) && (!best || load[m.id()] < load[*best])) best = m.id();
    return best;
  };
  std::vector<Pool> order;
  if (home != Pool::mixed) order.push_back(home);
  order.push_back(Pool::mixed);
  if (home != Pool::mixed) order.push_back(opposite(home));
  for (Pool p : order) {
    auto best = argmin([p](const Machine& m) { return m.current_pool() == p; });
    if (best && load[*best] <= config_.scheduler.queue_threshold_tokens) return *best;
  }
  // Everything is saturated: stay out of the opposite pool if possible.
  auto best = argmin([home](const Machine& m) {
    return m.current_pool() == home || m.current_pool() == Pool::mixed;
  });
  if (!best) best = argmin([](const Machine&) { return true; });
  if (!best) throw ConfigError("cluster has no machines");
  return *best;
}

RoutingDecision Cluster::route(const Request& request, SimTime now) {
  if (machines_.empty()) throw ConfigError("cluster has no machines");
  std::vector<std::int64_t> load(machines_.size());
  for (const Machine& m : machines_) load[m.id()] = observed_pending_tokens(m.id(), now);

  bool baseline = is_baseline(config_.design);
  MachineId pm = choose(baseline ? Pool::mixed : Pool::prompt, load);
  MachineId tm = baseline ? pm : choose(Pool::token, load);

  Task task;
  task.request = request.id;
  task.kind = TaskKind::prompt_phase;
  task.tokens = request.prompt_tokens;
  task.prompt_tokens = request.prompt_tokens;
  task.output_tokens = request.output_tokens;
  task.local_token_phase = pm == tm;
  enqueue(pm, task, now);

  Machine& token_machine = machines_.at(tm);
  Pool before = token_machine.current_pool();
  token_machine.expect_token_task(request.id, now);
  note_pool_change(token_machine, before, now);

  if (config_.status_staleness_s > 0.0) {
    stale_view_[pm] += request.prompt_tokens;
    stale_view_[tm] += 1;
  }
  return {request.id, pm, tm, now};
}

void Cluster::enqueue(MachineId id, Task task, SimTime now) {
  Machine& m = machines_.at(id);
  Pool before = m.current_pool();
  m.enqueue(std::move(task), now);
  note_pool_change(m, before, now);
}

void Cluster::set_pool(Machine& m, Pool pool, SimTime now) {
  Pool before = m.current_pool();
  m.set_pool(pool, now);
  note_pool_change(m, before, now);
}

void Cluster::note_pool_change(Machine& m, Pool before, SimTime now) {
  if (m.current_pool() != before) transitions_.push_back({now, m.id(), before, m.current_pool()});
}

void Cluster::update_pools(SimTime now) {
  for (Machine& m : machines_)
    if (m.current_pool() == Pool::mixed && m.home_role() != Pool::mixed && !m.busy() &&
        !m.has_opposite_work())
      set_pool(m, m.home_role(), now);
}

std::vector<RoleChange> Cluster::repurpose(SimTime now) {
  std::vector<RoleChange> changes;
  if (is_baseline(config_.design) || !config_.repurposing_enabled()) return changes;
  SimTime window = from_seconds(config_.repurpose_window_s);
  SimTime from = now - window;
  for (Machine& m : machines_) {
    if (m.home_role() == Pool::mixed) continue;
    double fraction = static_cast<double>(m.mixed_residency(from, now)) / static_cast<double>(window);
    m.forget_residency_before(from);
    if (fraction <= config_.repurpose_fraction) continue;
    Pool old_home = m.home_role();
    Pool new_home = opposite(old_home);
    m.set_home_role(new_home);
    // Queues stay intact; a busy machine leaves the mixed pool only at its
    // next iteration boundary.
    set_pool(m, m.has_opposite_work() || m.busy() ? Pool::mixed : new_home, now);
    m.reset_residency(now);
    changes.push_back({now, m.id(), old_home, new_home});
  }
  return changes;
}

std::vector<PoolTransition> Cluster::take_transitions() {
  std::vector<PoolTransition> out;
  out.swap(transitions_);
  return out;
}

const TransferConfig& Cluster::link(MachineId from, MachineId to) const {
  return links_.at({machines_.at(from).type(), machines_.at(to).type()});
}

void Cluster::check_pools() const {
  for (const Machine& m : machines_) {
    Pool p = m.current_pool();
    bool bad = false;
    if (m.home_role() == Pool::mixed) bad = p != Pool::mixed;
    else if (p == Pool::prompt) bad = m.home_role() != Pool::prompt || m.has_token_work();
    else if (p == Pool::token) bad = m.home_role() != Pool::token || m.has_prompt_work();
    else bad = !m.busy() && !m.has_opposite_work();
    if (bad)
      throw InternalError(fmt::format("machine {} in {} pool disagrees with its home role {} or tasks",
                                      m.id(), to_string(p), to_string(m.home_role())));
  }
}

}  // namespace splitsim
