// Copyright 2026 The splitsim Authors
// SPDX-License-Identifier: Apache-2.0

#include "splitsim/provisioner.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <ostream>
#include <set>
#include <thread>

#include <fmt/format.h>

#include "splitsim/engine.hpp"
#include "splitsim/error.hpp"

namespace splitsim {

namespace {

constexpr double kBudgetSlack = 1e-9;
constexpr int kDefaultMaxCount = 40;
constexpr int kCoarseStride = 4;

using Key = std::pair<int, int>;

// Strictly better by the objective, then fewer machines, cost, power.
bool better(const DesignPoint& a, const DesignPoint& b, Objective objective) {
  switch (objective) {
    case Objective::max_throughput: {
      double ra = a.max_rps.value_or(0.0), rb = b.max_rps.value_or(0.0);
      if (ra != rb) return ra > rb;
      break;
    }
    case Objective::min_cost:
      if (a.cost != b.cost) return a.cost < b.cost;
      break;
    case Objective::min_power:
      if (a.power != b.power) return a.power < b.power;
      break;
  }
  if (a.machines() != b.machines()) return a.machines() < b.machines();
  if (a.cost != b.cost) return a.cost < b.cost;
  return a.power < b.power;
}

class Searcher {
 public:
  explicit Searcher(const SearchSpec& spec) : spec_(spec) {}

  SearchResult run() {
    validate();
    std::vector<Key> grid = candidates();
    SearchResult result;
    if (grid.empty()) {
      result.infeasible_reason = fmt::format("{} {} admits no {} configuration in the count ranges",
                                             to_string(spec_.constraint), spec_.budget,
                                             to_string(spec_.design));
      return result;
    }
    bool target = spec_.constraint == Constraint::throughput_target;
    if (target && spec_.grid == GridMode::frontier) {
      staircase();
    } else if (spec_.grid == GridMode::coarse_to_fine) {
      coarse_to_fine(grid);
    } else {
      evaluate(grid);
    }

    for (auto& [key, point] : evaluated_) result.evaluated.push_back(point);
    std::vector<DesignPoint> passing;
    for (const DesignPoint& p : result.evaluated)
      if (p.slo_pass) passing.push_back(p);
    result.pareto = pareto_front(passing);
    for (const DesignPoint& p : passing)
      if (!result.optimum || better(p, *result.optimum, spec_.objective)) result.optimum = p;
    result.feasible = result.optimum.has_value();
    if (!result.feasible) {
      result.infeasible_reason =
          target ? fmt::format("no evaluated {} configuration sustains the {} rps throughput target",
                               to_string(spec_.design), spec_.budget)
                 : fmt::format("no {} configuration within the {} of {} passes the SLOs at any load",
                               to_string(spec_.design), to_string(spec_.constraint), spec_.budget);
    }
    return result;
  }

 private:
  void validate() {
    if (!(spec_.budget > 0.0)) throw ValidationError("search budget must be positive");
    if (spec_.workers < 1) throw ValidationError("workers must be >= 1");
    if (spec_.min_prompt < 0 || spec_.min_token < 0)
      throw ValidationError("count ranges must be non-negative");
  }

  bool within_budget(int p, int t) const {
    if (spec_.constraint == Constraint::throughput_target) return true;
    CostPower cp = cluster_cost_power(spec_.design, p, t);
    double used = spec_.constraint == Constraint::power_budget ? cp.power : cp.cost;
    return used <= spec_.budget + kBudgetSlack;
  }

  int implied_max(Role role) const {
    if (spec_.constraint == Constraint::throughput_target) return kDefaultMaxCount;
    CostPower cp = machine_cost_power(spec_.design, role);
    double rate = spec_.constraint == Constraint::power_budget ? cp.power : cp.cost;
    return static_cast<int>(std::floor(spec_.budget / rate + kBudgetSlack));
  }

  std::vector<Key> candidates() {
    bool baseline = is_baseline(spec_.design);
    pmin_ = std::max(spec_.min_prompt, 1);
    pmax_ = spec_.max_prompt > 0 ? spec_.max_prompt : implied_max(Role::prompt);
    tmin_ = baseline ? 0 : spec_.min_token;
    tmax_ = baseline ? 0 : (spec_.max_token > 0 ? spec_.max_token : implied_max(Role::token));
    std::vector<Key> grid;
    for (int p = pmin_; p <= pmax_; ++p)
      for (int t = tmin_; t <= tmax_; ++t)
        if (p + t >= 1 && within_budget(p, t)) grid.emplace_back(p, t);
    // Under a budget, more machines never lower throughput, so only points
    // that cannot grow by one machine are worth simulating.
    if (spec_.constraint != Constraint::throughput_target &&
        spec_.objective == Objective::max_throughput) {
      std::set<Key> in(grid.begin(), grid.end());
      std::erase_if(grid, [&](const Key& k) {
        bool grow_p = k.first < pmax_ && in.count({k.first + 1, k.second});
        bool grow_t = !baseline && k.second < tmax_ && in.count({k.first, k.second + 1});
        return grow_p || grow_t;
      });
    }
    return grid;
  }

  DesignPoint evaluate_one(const Key& k) const {
    DesignPoint point = make_point(spec_.design, k.first, k.second);
    if (spec_.constraint == Constraint::throughput_target &&
        spec_.objective != Objective::max_throughput) {
      point.slo_pass = passes_at(spec_.design, k.first, k.second, spec_.budget, spec_.eval);
    } else {
      point.max_rps = max_throughput(spec_.design, k.first, k.second, spec_.eval, spec_.sweep);
      point.slo_pass = spec_.constraint == Constraint::throughput_target
                           ? *point.max_rps >= spec_.budget
                           : *point.max_rps > 0.0;
    }
    return point;
  }

  // Evaluates missing keys on the worker pool; results are stored by key so
  // the merge order never depends on scheduling.
  void evaluate(const std::vector<Key>& keys) {
    std::vector<Key> todo;
    for (const Key& k : keys)
      if (!evaluated_.count(k)) todo.push_back(k);
    std::vector<DesignPoint> out(todo.size());
    std::vector<std::exception_ptr> errors(todo.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      for (std::size_t i = next++; i < todo.size(); i = next++) {
        try {
          out[i] = evaluate_one(todo[i]);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    };
    std::size_t n = std::min<std::size_t>(static_cast<std::size_t>(spec_.workers), todo.size());
    if (n <= 1) {
      worker();
    } else {
      std::vector<std::thread> pool;
      for (std::size_t i = 0; i < n; ++i) pool.emplace_back(worker);
      for (std::thread& t : pool) t.join();
    }
    for (std::size_t i = 0; i < todo.size(); ++i) {
      if (errors[i]) std::rethrow_exception(errors[i]);
      evaluated_.emplace(todo[i], out[i]);
    }
  }

  const DesignPoint* best_so_far() const {
    const DesignPoint* best = nullptr;
    for (const auto& [k, p] : evaluated_)
      if (p.slo_pass && (!best || better(p, *best, spec_.objective))) best = &p;
    return best;
  }

  void coarse_to_fine(const std::vector<Key>& grid) {
    auto on_stride = [&](int v, int lo, int hi) {
      return (v - lo) % kCoarseStride == 0 || v == hi;
    };
    // Budget lines are 1-D; stride along them instead of over the box.
    bool line = spec_.constraint != Constraint::throughput_target &&
                spec_.objective == Objective::max_throughput;
    std::vector<Key> coarse;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const Key& k = grid[i];
      bool keep = line ? (i % kCoarseStride == 0 || i + 1 == grid.size())
                       : on_stride(k.first, pmin_, pmax_) && on_stride(k.second, tmin_, tmax_);
      if (keep) coarse.push_back(k);
    }
    evaluate(coarse);
    const DesignPoint* best = best_so_far();
    if (!best) return;
    Key centre{best->prompt_count, best->token_count};
    std::vector<Key> fine;
    if (line) {
      auto it = std::find(grid.begin(), grid.end(), centre);
      auto idx = static_cast<std::ptrdiff_t>(it - grid.begin());
      for (std::ptrdiff_t i = std::max<std::ptrdiff_t>(0, idx - kCoarseStride);
           i <= std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(grid.size()) - 1, idx + kCoarseStride); ++i)
        fine.push_back(grid[static_cast<std::size_t>(i)]);
    } else {
      for (const Key& k : grid)
        if (std::abs(k.first - centre.first) < kCoarseStride &&
            std::abs(k.second - centre.second) < kCoarseStride)
          fine.push_back(k);
    }
    evaluate(fine);
  }

  // Walks the lower edge of the passing region, assuming more machines of
  // either role never turn a pass into a failure.
  void staircase() {
    int p = pmax_, t = tmin_;
    while (p >= pmin_ && t <= tmax_) {
      Key k{p, t};
      evaluate({k});
      if (evaluated_.at(k).slo_pass) --p;
      else ++t;
    }
  }

  const SearchSpec& spec_;
  std::map<Key, DesignPoint> evaluated_;
  int pmin_ = 0, pmax_ = 0, tmin_ = 0, tmax_ = 0;
};

std::map<MachineType, PerfModel> eval_models(const Evaluation& eval) {
  std::map<MachineType, PerfModel> models;
  for (MachineType t : {MachineType::A100, MachineType::H100, MachineType::H100cap})
    models.emplace(t, calibrated_model(eval.llm, t, eval.h100cap_prompt_factor));
  return models;
}

}  // namespace

CostPower machine_cost_power(Design design, Role role) {
  constexpr CostPower a100{1.0, 1.0};
  constexpr CostPower h100_prompt{2.35, 1.75};
  switch (design) {
    case Design::baseline_a100:
    case Design::splitwise_aa: return a100;
    case Design::baseline_h100: return h100_prompt;
    case Design::splitwise_hh: return role == Role::prompt ? h100_prompt : CostPower{2.5, 1.75};
    case Design::splitwise_hhcap: return role == Role::prompt ? h100_prompt : CostPower{2.5, 1.23};
    case Design::splitwise_ha: return role == Role::prompt ? h100_prompt : a100;
  }
  throw ConfigError("unknown design");
}

CostPower cluster_cost_power(Design design, int prompt_count, int token_count) {
  if (prompt_count < 0 || token_count < 0) throw ValidationError("counts must be non-negative");
  if (is_baseline(design) && token_count != 0)
    throw ValidationError("baseline designs take a single machine count");
  CostPower p = machine_cost_power(design, Role::prompt);
  CostPower t = machine_cost_power(design, Role::token);
  return {prompt_count * p.cost + token_count * t.cost, prompt_count * p.power + token_count * t.power};
}

std::string_view to_string(Objective objective) {
  switch (objective) {
    case Objective::max_throughput: return "max_throughput";
    case Objective::min_cost: return "min_cost";
    case Objective::min_power: return "min_power";
  }
  return "?";
}

std::string_view to_string(Constraint constraint) {
  switch (constraint) {
    case Constraint::power_budget: return "power_budget";
    case Constraint::cost_budget: return "cost_budget";
    case Constraint::throughput_target: return "throughput_target";
  }
  return "?";
}

Objective parse_objective(std::string_view name) {
  for (Objective o : {Objective::max_throughput, Objective::min_cost, Objective::min_power})
    if (to_string(o) == name) return o;
  throw ConfigError(fmt::format("unknown objective '{}'", name));
}

Constraint parse_constraint(std::string_view name) {
  for (Constraint c : {Constraint::power_budget, Constraint::cost_budget, Constraint::throughput_target})
    if (to_string(c) == name) return c;
  throw ConfigError(fmt::format("unknown constraint '{}'", name));
}

std::string_view to_string(GridMode mode) {
  switch (mode) {
    case GridMode::exhaustive: return "exhaustive";
    case GridMode::coarse_to_fine: return "coarse_to_fine";
    case GridMode::frontier: return "frontier";
  }
  return "?";
}

GridMode parse_grid_mode(std::string_view name) {
  for (GridMode g : {GridMode::exhaustive, GridMode::coarse_to_fine, GridMode::frontier})
    if (to_string(g) == name) return g;
  throw ConfigError(fmt::format("unknown grid mode '{}'", name));
}

bool passes_at(Design design, int prompt_count, int token_count, double rps, const Evaluation& eval) {
  if (!(rps >= 0.0)) throw ValidationError("rate must be non-negative");
  if (eval.seeds.empty()) throw ValidationError("evaluation needs at least one seed");
  auto models = eval_models(eval);
  ClusterConfig cfg = make_cluster_config(design, prompt_count, token_count, eval.llm);
  cfg.scheduler = eval.scheduler;
  cfg.repurpose_window_s = eval.repurpose_window_s;
  EngineOptions options;
  options.check_invariants = false;
  for (std::uint64_t seed : eval.seeds) {
    Trace trace = generate_trace(eval.prompt, eval.output, rps, eval.duration_s, seed);
    try {
      RunOutput out = run(cfg, models, trace, models.at(MachineType::A100), eval.slo, eval.metrics, options);
      if (!out.report.slo.pass) return false;
    } catch (const SimulationError&) {
      return false;
    }
  }
  return true;
}

double max_throughput(Design design, int prompt_count, int token_count, const Evaluation& eval,
                      const SweepOptions& sweep) {
  if (!(sweep.start_rps > 0.0) || !(sweep.growth > 1.0) || !(sweep.resolution > 0.0))
    throw ValidationError("invalid sweep options");
  auto pass = [&](double r) { return passes_at(design, prompt_count, token_count, r, eval); };
  double good = 0.0, bad = 0.0;
  double r = sweep.start_rps;
  if (pass(r)) {
    good = r;
    for (int step = 0; step < sweep.max_steps; ++step) {
      double next = good * sweep.growth;
      if (!pass(next)) {
        bad = next;
        break;
      }
      good = next;
    }
    if (bad == 0.0) return good;
  } else {
    bad = r;
    for (int i = 0; i < sweep.max_halvings && good == 0.0; ++i) {
      r /= 2.0;
      if (pass(r)) good = r;
      else bad = r;
    }
    if (good == 0.0) return 0.0;
  }
  while (bad > good * (1.0 + sweep.resolution)) {
    double mid = 0.5 * (good + bad);
    if (pass(mid)) good = mid;
    else bad = mid;
  }
  return good;
}

DesignPoint make_point(Design design, int prompt_count, int token_count) {
  CostPower cp = cluster_cost_power(design, prompt_count, token_count);
  DesignPoint p;
  p.design = design;
  p.prompt_count = prompt_count;
  p.token_count = token_count;
  p.cost = cp.cost;
  p.power = cp.power;
  return p;
}

int baseline_count_within(Design design, Constraint constraint, double budget) {
  if (!is_baseline(design)) throw ValidationError("not a baseline design");
  if (constraint == Constraint::throughput_target)
    throw ValidationError("a throughput target does not bound the machine count");
  if (!(budget >= 0.0)) throw ValidationError("budget must be non-negative");
  CostPower cp = machine_cost_power(design, Role::prompt);
  double rate = constraint == Constraint::power_budget ? cp.power : cp.cost;
  return static_cast<int>(std::floor(budget / rate + kBudgetSlack));
}

SearchResult search(const SearchSpec& spec) { return Searcher(spec).run(); }

std::vector<DesignPoint> pareto_front(std::span<const DesignPoint> points) {
  auto dominates = [](const DesignPoint& a, const DesignPoint& b) {
    bool rates = a.max_rps.has_value() && b.max_rps.has_value();
    double ra = rates ? *a.max_rps : 0.0, rb = rates ? *b.max_rps : 0.0;
    bool no_worse = ra >= rb && a.cost <= b.cost && a.power <= b.power;
    bool better = ra > rb || a.cost < b.cost || a.power < b.power;
    return no_worse && better;
  };
  std::vector<DesignPoint> front;
  for (const DesignPoint& p : points) {
    bool dominated = std::any_of(points.begin(), points.end(),
                                 [&](const DesignPoint& q) { return dominates(q, p); });
    if (!dominated) front.push_back(p);
  }
  return front;
}

RelativeReport summarize(const DesignPoint& point, const DesignPoint& baseline) {
  double base_rps = baseline.max_rps.value_or(0.0);
  if (base_rps <= 0.0 || baseline.cost <= 0.0 || baseline.power <= 0.0 || baseline.machines() <= 0)
    throw ValidationError("baseline point has a zero metric");
  return {point.max_rps.value_or(0.0) / base_rps, point.cost / baseline.cost,
          point.power / baseline.power,
          static_cast<double>(point.machines()) / static_cast<double>(baseline.machines())};
}

void write_points_csv(std::ostream& out, std::span<const DesignPoint> points) {
  out << "design,prompt_count,token_count,max_rps,cost,power,slo_pass\n";
  for (const DesignPoint& p : points)
    out << fmt::format("{},{},{},{},{:.2f},{:.2f},{}\n", to_string(p.design), p.prompt_count,
                       p.token_count, p.max_rps ? fmt::format("{:.4f}", *p.max_rps) : "",
                       p.cost, p.power, p.slo_pass ? "true" : "false");
}

}  // namespace splitsim
