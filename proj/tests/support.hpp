// Copyright 2026 The splitsim Authors
// SPDX-License-Identifier: Apache-2.0

// Fixtures shared by the unit tests and the acceptance binary.

#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "splitsim/cluster.hpp"
#include "splitsim/engine.hpp"
#include "splitsim/perfmodel.hpp"
#include "splitsim/rng.hpp"
#include "splitsim/trace.hpp"

namespace splitsim::testing {

/// Ground truth for fitting tests: a bent prompt curve and a flat-then-rising
/// token curve.
inline PiecewiseLinear truth_prompt_curve() {
  return PiecewiseLinear({64, 512, 2048, 8192}, {40, 90, 210, 900});
}
inline PiecewiseLinear truth_token_curve() {
  return PiecewiseLinear({1, 16, 64}, {30, 33, 60});
}

/// Samples of the ground truth at every 64th prompt size and every batch size
/// in 1..64, each time scaled by (1 + noise * z), z standard normal.
inline std::vector<ProfileSample> synthetic_profile(std::uint64_t seed, double noise,
                                                    MachineType type = MachineType::H100,
                                                    const std::string& llm = "llama2-70b") {
  Rng rng(seed, 99);
  PiecewiseLinear prompt = truth_prompt_curve(), token = truth_token_curve();
  std::vector<ProfileSample> out;
  for (std::int64_t x = 64; x <= 8192; x += 64)
    out.push_back({type, llm, x, 0, prompt(static_cast<double>(x)) * (1 + noise * rng.standard_normal()), 0});
  for (std::int64_t b = 1; b <= 64; ++b)
    out.push_back({type, llm, 0, b, token(static_cast<double>(b)) * (1 + noise * rng.standard_normal()), 0});
  return out;
}

/// Small random trace: Poisson arrivals, log-uniform prompt sizes in
/// [16, max_prompt], output sizes uniform in [1, max_output].
inline Trace random_trace(std::uint64_t seed, std::size_t count, double rate,
                          std::int64_t max_prompt = 4096, std::int64_t max_output = 64) {
  Rng rng(seed, 7);
  Trace t;
  double now = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    now += rng.exponential(rate);
    double lp = std::log(16.0) + rng.uniform() * (std::log(static_cast<double>(max_prompt)) - std::log(16.0));
    auto prompt = static_cast<std::int64_t>(std::exp(lp));
    auto output = 1 + static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(max_output)));
    t.requests.push_back({i, now, prompt, output});
  }
  t.duration_s = now;
  return t;
}

/// Random small cluster of any design with 2..max_machines machines.
inline ClusterConfig random_cluster(Rng& rng, int max_machines = 4) {
  std::vector<Design> designs = all_designs();
  Design d = designs[rng.below(designs.size())];
  int total = 2 + static_cast<int>(rng.below(static_cast<std::uint64_t>(max_machines - 1)));
  if (is_baseline(d)) return make_cluster_config(d, total, 0);
  int prompt = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(total - 1)));
  return make_cluster_config(d, prompt, total - prompt);
}

/// Replays routing from a run journal with an independent implementation of
/// the rule: least pending tokens in the home pool, then the mixed pool, then
/// the opposite pool, skipping pools whose best machine is over the
/// threshold, lowest id on ties. Pending tokens are rebuilt from the journal
/// alone. Returns a description of the first mismatch.
inline std::optional<std::string> replay_routing(const ClusterConfig& c,
                                                 const std::vector<JournalEntry>& journal,
                                                 const std::vector<Request>& requests) {
  bool baseline = is_baseline(c.design);
  std::vector<Pool> pool;
  for (int i = 0; i < c.total_machines(); ++i)
    pool.push_back(baseline ? Pool::mixed : (i < c.prompt_machines ? Pool::prompt : Pool::token));
  std::vector<std::int64_t> load(pool.size(), 0);

  auto best_in = [&](auto pred) {
    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < pool.size(); ++i)
      if (pred(pool[i]) && (!best || load[i] < load[*best])) best = i;
    return best;
  };
  auto pick = [&](Pool home) {
    std::vector<Pool> order = {Pool::mixed};
    if (home != Pool::mixed) order = {home, Pool::mixed, home == Pool::prompt ? Pool::token : Pool::prompt};
    for (Pool p : order) {
      auto b = best_in([p](Pool q) { return q == p; });
      if (b && load[*b] <= c.scheduler.queue_threshold_tokens) return static_cast<MachineId>(*b);
    }
    auto b = best_in([home](Pool q) { return q == home || q == Pool::mixed; });
    if (!b) b = best_in([](Pool) { return true; });
    return static_cast<MachineId>(*b);
  };

  std::map<std::uint64_t, std::pair<MachineId, MachineId>> where;
  for (const JournalEntry& e : journal) {
    if (const auto* r = std::get_if<RouteEntry>(&e)) {
      MachineId pm = pick(baseline ? Pool::mixed : Pool::prompt);
      MachineId tm = baseline ? pm : pick(Pool::token);
      if (r->prompt_machine != pm || r->token_machine != tm)
        return "request " + std::to_string(r->request) + " routed to (" +
               std::to_string(r->prompt_machine) + ", " + std::to_string(r->token_machine) +
               "), expected (" + std::to_string(pm) + ", " + std::to_string(tm) + ")";
      load[pm] += r->prompt_tokens;
      load[tm] += 1;
      where[r->request] = {pm, tm};
    } else if (const auto* p = std::get_if<PhaseEntry>(&e)) {
      auto [pm, tm] = where.at(p->request);
      if (p->kind == PhaseEntry::Kind::prompt_done)
        load[pm] -= requests[p->request].prompt_tokens;
      else
        load[tm] -= 1;
    } else if (const auto* q = std::get_if<PoolEntry>(&e)) {
      if (q->role_change) continue;
      if (pool[q->machine] != q->from)
        return "machine " + std::to_string(q->machine) + " left a pool it was not in";
      pool[q->machine] = q->to;
    }
  }
  for (std::size_t i = 0; i < load.size(); ++i)
    if (load[i] != 0) return "machine " + std::to_string(i) + " ends with pending tokens";
  return std::nullopt;
}

}  // namespace splitsim::testing
