// Copyright 2026 The splitsim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace splitsim {

enum class MachineType { A100, H100, H100cap };

std::string_view to_string(MachineType type);
MachineType parse_machine_type(std::string_view name);

enum class Phase { prompt, token };

std::string_view to_string(Phase phase);

/// One profiled iteration. Prompt samples set batch_prompt_tokens, token
/// samples set batch_token_count; never both.
struct ProfileSample {
  MachineType machine_type = MachineType::A100;
  std::string llm;
  std::int64_t batch_prompt_tokens = 0;
  std::int64_t batch_token_count = 0;
  double time_ms = 0.0;
  std::int64_t memory_bytes = 0;

  Phase phase() const {
    return batch_prompt_tokens > 0 ? Phase::prompt : Phase::token;
  }
  void validate() const;
};

/// Continuous piecewise-linear function over strictly increasing knots.
/// Beyond the last knot the final slope continues; below the first knot the
/// first slope continues, floored at a small positive value.
class PiecewiseLinear {
 public:
  PiecewiseLinear() = default;
  PiecewiseLinear(std::vector<double> xs, std::vector<double> ys);

  double operator()(double x) const;

  std::span<const double> xs() const { return xs_; }
  std::span<const double> ys() const { return ys_; }
  std::size_t size() const { return xs_.size(); }
  bool empty() const { return xs_.empty(); }

 private:
  std::vector<double> xs_;
  std::vector<double> ys_;
};

struct CurvePoint {
  double x = 0.0;
  double y = 0.0;
};

struct CurveFit {
  PiecewiseLinear curve;
  /// Largest |curve(x) - y| over the input points.
  double max_abs_residual = 0.0;
};

/// Builds a monotone non-decreasing piecewise-linear curve from noisy points.
///
/// 1. Duplicate abscissas are replaced by their mean.
/// 2. Pool-adjacent-violators makes the values non-decreasing.
/// 3. While there are more knots than `knot_budget`, the interior knot whose
///    removal adds the least squared error over the covered points is dropped.
CurveFit fit_curve(std::span<const CurvePoint> points, std::size_t knot_budget);

/// Predictors for one (machine type, LLM) pair.
struct PerfModel {
  std::string llm;
  MachineType machine_type = MachineType::A100;
  PiecewiseLinear prompt_knots;  ///< total batch prompt tokens -> ms
  PiecewiseLinear token_knots;   ///< token batch size -> ms per iteration
  std::int64_t kv_bytes_per_token = 0;
  std::int64_t weight_memory = 0;
  std::int64_t memory_capacity = 0;
  std::int64_t max_token_batch = 0;
  double prompt_fit_error_ms = 0.0;
  double token_fit_error_ms = 0.0;

  void validate() const;
};

double prompt_time(const PerfModel& model, std::int64_t total_prompt_tokens);
double token_iter_time(const PerfModel& model, std::int64_t batch_size);
std::int64_t kv_cache_bytes(const PerfModel& model,
                            std::int64_t context_tokens);
std::int64_t memory_in_use(const PerfModel& model,
                           std::span<const std::int64_t> active_contexts);

struct FitOptions {
  std::size_t knot_budget = 16;
  // Memory parameters. Zero means: infer from the samples when possible,
  // otherwise use the LLM / machine defaults from the calibration tables.
  std::int64_t kv_bytes_per_token = 0;
  std::int64_t weight_memory = 0;
  std::int64_t memory_capacity = 0;
  std::int64_t max_token_batch = 0;
};

/// Fits one model; every sample must share a machine type and LLM.
PerfModel fit_piecewise_linear(std::span<const ProfileSample> samples,
                               const FitOptions& options = {});

using ModelKey = std::pair<MachineType, std::string>;

std::map<ModelKey, PerfModel> fit_models(
    std::span<const ProfileSample> samples, const FitOptions& options = {});

struct HoldoutReport {
  std::size_t train_count = 0;
  std::size_t test_count = 0;
  double train_mape = 0.0;  ///< percent
  double test_mape = 0.0;   ///< percent
};

/// Shuffles with `seed`, fits on the first `train_fraction`, reports mean
/// absolute percentage error of time predictions on both splits. The split is
/// stratified per phase so each side has prompt and token samples.
HoldoutReport evaluate_holdout(std::span<const ProfileSample> samples,
                               const FitOptions& options, std::uint64_t seed,
                               double train_fraction = 0.8);

/// Profile CSV:
/// machine_type,llm,phase,prompt_tokens,batch_size,time_ms,memory_bytes
std::vector<ProfileSample> parse_profile(std::istream& in);
std::vector<ProfileSample> read_profile_file(const std::string& path);
void write_profile(std::ostream& out, std::span<const ProfileSample> samples);

/// Plain-text knot listing; round-trips through parse_model.
void write_model(std::ostream& out, const PerfModel& model);
PerfModel parse_model(std::istream& in);

}  // namespace splitsim
