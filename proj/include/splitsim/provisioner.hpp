// Copyright 2026 The splitsim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "splitsim/cluster.hpp"
#include "splitsim/metrics.hpp"
#include "splitsim/trace.hpp"

namespace splitsim {

enum class Role { prompt, token };

struct CostPower {
  double cost = 0.0;
  double power = 0.0;
};

/// Provisioned cost and power of one machine, normalized to a DGX-A100.
CostPower machine_cost_power(Design design, Role role);
/// Counts for baseline designs go in prompt_count; token_count must be 0.
CostPower cluster_cost_power(Design design, int prompt_count, int token_count);

enum class Objective { max_throughput, min_cost, min_power };
enum class Constraint { power_budget, cost_budget, throughput_target };

std::string_view to_string(Objective objective);
std::string_view to_string(Constraint constraint);
Objective parse_objective(std::string_view name);
Constraint parse_constraint(std::string_view name);

/// Everything needed to judge one cluster at one load.
struct Evaluation {
  std::string llm = "llama2-70b";
  SizeDistribution prompt;
  SizeDistribution output;
  double duration_s = 120.0;
  std::vector<std::uint64_t> seeds = {1, 2, 3};
  SloTable slo;
  MetricsOptions metrics;
  SchedulerConfig scheduler;
  double repurpose_window_s = 300.0;
  double h100cap_prompt_factor = kDefaultH100CapPromptFactor;
};

/// Passes iff the SLOs hold for every seed. A run that exceeds the
/// simulation horizon counts as a failure.
bool passes_at(Design design, int prompt_count, int token_count, double rps,
               const Evaluation& eval);

struct SweepOptions {
  double start_rps = 1.0;
  double growth = 1.5;
  double resolution = 0.02;  ///< relative bisection stopping width
  int max_halvings = 6;
  int max_steps = 60;
};

/// Largest passing rate found by a geometric ramp then bisection; 0 if even
/// the smallest probed rate fails.
double max_throughput(Design design, int prompt_count, int token_count,
                      const Evaluation& eval, const SweepOptions& sweep = {});

struct DesignPoint {
  Design design = Design::baseline_a100;
  int prompt_count = 0;
  int token_count = 0;
  std::optional<double> max_rps;  ///< unset when only the target was checked
  double cost = 0.0;
  double power = 0.0;
  bool slo_pass = false;

  int machines() const { return prompt_count + token_count; }
};

DesignPoint make_point(Design design, int prompt_count, int token_count);

enum class GridMode {
  exhaustive,
  coarse_to_fine,  ///< stride 4, then stride 1 around the coarse optimum
  frontier,        ///< staircase walk of the passing region's lower edge
};

std::string_view to_string(GridMode mode);
GridMode parse_grid_mode(std::string_view name);

struct SearchSpec {
  Design design = Design::splitwise_hh;
  Objective objective = Objective::max_throughput;
  Constraint constraint = Constraint::power_budget;
  /// Power or cost units, or requests per second for throughput_target.
  double budget = 0.0;
  int min_prompt = 1;
  int max_prompt = 0;  ///< 0: implied by the budget, else 40
  int min_token = 1;
  int max_token = 0;
  GridMode grid = GridMode::coarse_to_fine;
  int workers = 1;
  Evaluation eval;
  SweepOptions sweep;
};

struct SearchResult {
  bool feasible = false;
  std::string infeasible_reason;
  std::optional<DesignPoint> optimum;
  std::vector<DesignPoint> evaluated;  ///< grid order
  std::vector<DesignPoint> pareto;
};

/// Largest baseline machine count within a power or cost budget.
int baseline_count_within(Design design, Constraint constraint, double budget);

SearchResult search(const SearchSpec& spec);

/// Points not dominated in (max_rps up, cost down, power down). Points
/// without max_rps are compared on cost and power only.
std::vector<DesignPoint> pareto_front(std::span<const DesignPoint> points);

struct RelativeReport {
  double throughput = 0.0;
  double cost = 0.0;
  double power = 0.0;
  double machines = 0.0;
};

/// Ratios of `point` to `baseline`. Throws ValidationError on a zero
/// baseline metric.
RelativeReport summarize(const DesignPoint& point, const DesignPoint& baseline);

void write_points_csv(std::ostream& out, std::span<const DesignPoint> points);

}  // namespace splitsim
