// Copyright 2026 The splitsim Authors
// SPDX-License-Identifier: Apache-2.0

#include "splitsim/perfmodel.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>

#include <fmt/format.h>

#include "csv_util.hpp"
#include "splitsim/calibration.hpp"
#include "splitsim/error.hpp"
#include "splitsim/rng.hpp"

namespace splitsim {

namespace {

constexpr std::string_view kProfileHeader =
    "machine_type,llm,phase,prompt_tokens,batch_size,time_ms,memory_bytes";

// Smallest slope used when extrapolating below the first knot.
constexpr double kMinSlope = 1e-9;

struct Weighted {
  double x;
  double mean;
  double weight;
};

std::vector<Weighted> dedup(std::span<const CurvePoint> points) {
  std::vector<CurvePoint> sorted(points.begin(), points.end());
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const CurvePoint& a, const CurvePoint& b) { return a.x < b.x; });
  std::vector<Weighted> out;
  for (const CurvePoint& p : sorted) {
    if (!out.empty() && out.back().x == p.x) {
      Weighted& w = out.back();
      w.mean = (w.mean * w.weight + p.y) / (w.weight + 1.0);
      w.weight += 1.0;
    } else {
      out.push_back({p.x, p.y, 1.0});
    }
  }
  return out;
}

// Weighted pool-adjacent-violators; returns non-decreasing fitted values.
std::vector<double> isotonic(const std::vector<Weighted>& pts) {
  struct Block {
    double value;
    double weight;
    std::size_t count;
  };
  std::vector<Block> blocks;
  for (const Weighted& p : pts) {
    blocks.push_back({p.mean, p.weight, 1});
    while (blocks.size() > 1 && blocks[blocks.size() - 2].value > blocks.back().value) {
      Block b = blocks.back();
      blocks.pop_back();
      Block& a = blocks.back();
      a.value = (a.value * a.weight + b.value * b.weight) / (a.weight + b.weight);
      a.weight += b.weight;
      a.count += b.count;
    }
  }
  std::vector<double> fitted;
  fitted.reserve(pts.size());
  for (const Block& b : blocks) fitted.insert(fitted.end(), b.count, b.value);
  return fitted;
}

double check_positive_int(std::int64_t v, std::string_view what) {
  if (v < 1) throw ValidationError(fmt::format("{} must be >= 1", what));
  return static_cast<double>(v);
}

}  // namespace

std::string_view to_string(MachineType type) {
  switch (type) {
    case MachineType::A100: return "A100";
    case MachineType::H100: return "H100";
    case MachineType::H100cap: return "H100cap";
  }
  return "?";
}

MachineType parse_machine_type(std::string_view name) {
  std::string lower;
  for (char c : name) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  if (lower == "a100") return MachineType::A100;
  if (lower == "h100") return MachineType::H100;
  if (lower == "h100cap" || lower == "h100-cap" || lower == "h100_cap") return MachineType::H100cap;
  throw ValidationError(fmt::format("unknown machine type '{}'", name));
}

std::string_view to_string(Phase phase) {
  return phase == Phase::prompt ? "prompt" : "token";
}

void ProfileSample::validate() const {
  if ((batch_prompt_tokens > 0) == (batch_token_count > 0))
    throw ValidationError("profile sample needs exactly one of prompt tokens or batch size");
  if (batch_prompt_tokens < 0 || batch_token_count < 0)
    throw ValidationError("profile sample counts must be non-negative");
  if (!(time_ms > 0.0) || !std::isfinite(time_ms))
    throw ValidationError("profile sample time must be positive");
  if (memory_bytes < 0) throw ValidationError("profile sample memory must be non-negative");
}

PiecewiseLinear::PiecewiseLinear(std::vector<double> xs, std::vector<double> ys)
    : xs_(std::move(xs)), ys_(std::move(ys)) {
  if (xs_.size() != ys_.size()) throw ValidationError("knot vectors differ in length");
  if (xs_.empty()) throw ValidationError("piecewise-linear curve needs knots");
  for (std::size_t i = 1; i < xs_.size(); ++i)
    if (!(xs_[i] > xs_[i - 1])) throw InternalError("knot abscissas must strictly increase");
}

double PiecewiseLinear::operator()(double x) const {
  if (xs_.empty()) throw InternalError("evaluating an empty curve");
  std::size_t n = xs_.size();
  if (n == 1) return ys_[0];
  if (x <= xs_[0]) {
    double slope = std::max((ys_[1] - ys_[0]) / (xs_[1] - xs_[0]), kMinSlope);
    // Keep far extrapolation strictly positive and non-decreasing.
    return std::max(ys_[0] - slope * (xs_[0] - x), ys_[0] * 0.01);
  }
  if (x >= xs_[n - 1]) {
    double slope = (ys_[n - 1] - ys_[n - 2]) / (xs_[n - 1] - xs_[n - 2]);
    return ys_[n - 1] + slope * (x - xs_[n - 1]);
  }
  auto it = std::upper_bound(xs_.begin(), xs_.end(), x);
  std::size_t hi = static_cast<std::size_t>(it - xs_.begin());
  std::size_t lo = hi - 1;
  double t = (x - xs_[lo]) / (xs_[hi] - xs_[lo]);
  return ys_[lo] + t * (ys_[hi] - ys_[lo]);
}

CurveFit fit_curve(std::span<const CurvePoint> points, std::size_t knot_budget) {
  std::vector<Weighted> pts = dedup(points);
  if (pts.size() < 2) throw FitError("need at least 2 distinct abscissas");
  for (std::size_t i = 1; i < pts.size(); ++i)
    if (!(pts[i].x > pts[i - 1].x)) throw InternalError("abscissas not increasing after dedup");
  std::vector<double> fitted = isotonic(pts);
  knot_budget = std::max<std::size_t>(knot_budget, 2);

  std::vector<std::size_t> alive(pts.size());
  std::iota(alive.begin(), alive.end(), 0);

  auto segment_error = [&](std::size_t a, std::size_t c) {
    double err = 0.0;
    for (std::size_t k = a; k <= c; ++k) {
      double t = (pts[k].x - pts[a].x) / (pts[c].x - pts[a].x);
      double y = fitted[a] + t * (fitted[c] - fitted[a]);
      err += pts[k].weight * (y - pts[k].mean) * (y - pts[k].mean);
    }
    return err;
  };
  // Added error if interior knot alive[j] were dropped.
  auto removal_cost = [&](std::size_t j) {
    std::size_t a = alive[j - 1], b = alive[j], c = alive[j + 1];
    double shared = 0.0;  // knot b is counted in both current segments
    double d = fitted[b] - pts[b].mean;
    shared = pts[b].weight * d * d;
    return segment_error(a, c) - (segment_error(a, b) + segment_error(b, c) - shared);
  };

  std::vector<double> cost(alive.size(), 0.0);
  for (std::size_t j = 1; j + 1 < alive.size(); ++j) cost[j] = removal_cost(j);
  while (alive.size() > knot_budget) {
    std::size_t best = 1;
    for (std::size_t j = 2; j + 1 < alive.size(); ++j)
      if (cost[j] < cost[best]) best = j;
    alive.erase(alive.begin() + static_cast<std::ptrdiff_t>(best));
    cost.erase(cost.begin() + static_cast<std::ptrdiff_t>(best));
    if (best - 1 >= 1) cost[best - 1] = removal_cost(best - 1);
    if (best + 1 < alive.size()) cost[best] = removal_cost(best);
  }

  std::vector<double> xs, ys;
  for (std::size_t k : alive) {
    xs.push_back(pts[k].x);
    ys.push_back(fitted[k]);
  }
  CurveFit fit{PiecewiseLinear(std::move(xs), std::move(ys)), 0.0};
  for (const CurvePoint& p : points)
    fit.max_abs_residual = std::max(fit.max_abs_residual, std::abs(fit.curve(p.x) - p.y));
  return fit;
}

void PerfModel::validate() const {
  if (prompt_knots.empty() || token_knots.empty())
    throw ValidationError("performance model needs prompt and token knots");
  if (kv_bytes_per_token <= 0) throw ValidationError("kv_bytes_per_token must be positive");
  if (weight_memory < 0) throw ValidationError("weight_memory must be non-negative");
  if (memory_capacity <= weight_memory)
    throw ValidationError("memory_capacity must exceed weight_memory");
  if (max_token_batch < 1) throw ValidationError("max_token_batch must be >= 1");
  for (double y : prompt_knots.ys())
    if (!(y > 0.0)) throw ValidationError("prompt times must be positive");
  for (double y : token_knots.ys())
    if (!(y > 0.0)) throw ValidationError("token times must be positive");
}

double prompt_time(const PerfModel& model, std::int64_t total_prompt_tokens) {
  return model.prompt_knots(check_positive_int(total_prompt_tokens, "prompt tokens"));
}

double token_iter_time(const PerfModel& model, std::int64_t batch_size) {
  double x = check_positive_int(batch_size, "token batch size");
  if (batch_size > model.max_token_batch)
    throw CapacityError(fmt::format("token batch {} exceeds max_token_batch {}", batch_size,
                                    model.max_token_batch));
  return model.token_knots(x);
}

std::int64_t kv_cache_bytes(const PerfModel& model, std::int64_t context_tokens) {
  if (context_tokens < 0) throw ValidationError("context tokens must be non-negative");
  return context_tokens * model.kv_bytes_per_token;
}

std::int64_t memory_in_use(const PerfModel& model, std::span<const std::int64_t> active_contexts) {
  std::int64_t total = model.weight_memory;
  for (std::int64_t c : active_contexts) total += kv_cache_bytes(model, c);
  return total;
}

PerfModel fit_piecewise_linear(std::span<const ProfileSample> samples, const FitOptions& options) {
  if (samples.empty()) throw FitError("no profile samples");
  PerfModel model;
  model.llm = samples.front().llm;
  model.machine_type = samples.front().machine_type;

  std::vector<CurvePoint> prompt_pts, token_pts;
  std::vector<const ProfileSample*> memory_pts;
  for (const ProfileSample& s : samples) {
    s.validate();
    if (s.llm != model.llm || s.machine_type != model.machine_type)
      throw ValidationError("samples for one model must share machine type and LLM");
    if (s.phase() == Phase::prompt) {
      prompt_pts.push_back({static_cast<double>(s.batch_prompt_tokens), s.time_ms});
      if (s.memory_bytes > 0) memory_pts.push_back(&s);
    } else {
      token_pts.push_back({static_cast<double>(s.batch_token_count), s.time_ms});
    }
  }
  if (prompt_pts.size() < 2) throw FitError("need at least 2 prompt samples");
  if (token_pts.size() < 2) throw FitError("need at least 2 token samples");

  CurveFit pf = fit_curve(prompt_pts, options.knot_budget);
  CurveFit tf = fit_curve(token_pts, options.knot_budget);
  model.prompt_knots = std::move(pf.curve);
  model.token_knots = std::move(tf.curve);
  model.prompt_fit_error_ms = pf.max_abs_residual;
  model.token_fit_error_ms = tf.max_abs_residual;

  // Memory from prompt samples: memory = weights + kv_per_token * tokens.
  std::int64_t inferred_kv = 0, inferred_weights = 0;
  if (memory_pts.size() >= 2) {
    double n = static_cast<double>(memory_pts.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (const ProfileSample* s : memory_pts) {
      double x = static_cast<double>(s->batch_prompt_tokens);
      double y = static_cast<double>(s->memory_bytes);
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
    }
    double denom = n * sxx - sx * sx;
    if (denom > 0.0) {
      double slope = (n * sxy - sx * sy) / denom;
      double intercept = (sy - slope * sx) / n;
      if (slope >= 1.0 && intercept >= 0.0) {
        inferred_kv = std::llround(slope);
        inferred_weights = std::llround(intercept);
      }
    }
  }

  const LlmSpec* llm = nullptr;
  for (const std::string& name : known_llms())
    if (name == model.llm) llm = &llm_spec(name);

  model.kv_bytes_per_token = options.kv_bytes_per_token > 0 ? options.kv_bytes_per_token
                             : inferred_kv > 0              ? inferred_kv
                             : llm                          ? default_kv_bytes_per_token(*llm)
                                                            : 0;
  model.weight_memory = options.weight_memory > 0 ? options.weight_memory
                        : inferred_kv > 0         ? inferred_weights
                        : llm                     ? llm->weight_bytes
                                                  : 0;
  model.memory_capacity = options.memory_capacity > 0
                              ? options.memory_capacity
                              : machine_spec(model.machine_type).memory_capacity;
  std::int64_t largest_batch = static_cast<std::int64_t>(model.token_knots.xs().back());
  model.max_token_batch = options.max_token_batch > 0 ? options.max_token_batch
                          : llm                       ? llm->max_token_batch
                                                      : largest_batch;
  if (model.kv_bytes_per_token <= 0)
    throw FitError(fmt::format("cannot infer KV bytes per token for unknown LLM '{}'", model.llm));
  model.validate();
  return model;
}

std::map<ModelKey, PerfModel> fit_models(std::span<const ProfileSample> samples,
                                         const FitOptions& options) {
  std::map<ModelKey, std::vector<ProfileSample>> groups;
  for (const ProfileSample& s : samples) groups[{s.machine_type, s.llm}].push_back(s);
  std::map<ModelKey, PerfModel> out;
  for (auto& [key, group] : groups) out.emplace(key, fit_piecewise_linear(group, options));
  return out;
}

HoldoutReport evaluate_holdout(std::span<const ProfileSample> samples, const FitOptions& options,
                               std::uint64_t seed, double train_fraction) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw ValidationError("train fraction must be in (0, 1)");
  std::vector<std::size_t> by_phase[2];
  for (std::size_t i = 0; i < samples.size(); ++i)
    by_phase[samples[i].phase() == Phase::prompt ? 0 : 1].push_back(i);

  Rng rng(seed);
  std::vector<ProfileSample> train, test;
  for (auto& idx : by_phase) {
    if (idx.size() < 3) throw FitError("need at least 3 samples per phase for a holdout split");
    for (std::size_t i = idx.size() - 1; i > 0; --i)
      std::swap(idx[i], idx[rng.below(i + 1)]);
    auto n_train = static_cast<std::size_t>(
        std::llround(train_fraction * static_cast<double>(idx.size())));
    n_train = std::clamp<std::size_t>(n_train, 2, idx.size() - 1);
    for (std::size_t k = 0; k < idx.size(); ++k)
      (k < n_train ? train : test).push_back(samples[idx[k]]);
  }
  PerfModel model = fit_piecewise_linear(train, options);
  auto mape = [&](const std::vector<ProfileSample>& set) {
    double total = 0.0;
    for (const ProfileSample& s : set) {
      double pred = s.phase() == Phase::prompt ? model.prompt_knots(static_cast<double>(s.batch_prompt_tokens))
                                               : model.token_knots(static_cast<double>(s.batch_token_count));
      total += std::abs(pred - s.time_ms) / s.time_ms;
    }
    return 100.0 * total / static_cast<double>(set.size());
  };
  return {train.size(), test.size(), mape(train), mape(test)};
}

std::vector<ProfileSample> parse_profile(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  std::vector<ProfileSample> out;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view row = detail::trim(line);
    if (row.empty()) continue;
    if (!header_seen) {
      if (row != kProfileHeader)
        throw ParseError(line_no, fmt::format("expected header '{}'", kProfileHeader));
      header_seen = true;
      continue;
    }
    auto cols = detail::split(row);
    if (cols.size() != 7) throw ParseError(line_no, "expected 7 columns");
    ProfileSample s;
    try {
      s.machine_type = parse_machine_type(cols[0]);
    } catch (const ValidationError& e) {
      throw ParseError(line_no, e.what());
    }
    s.llm = std::string(cols[1]);
    if (s.llm.empty()) throw ParseError(line_no, "empty llm");
    auto prompt = detail::to_int(cols[3]);
    auto batch = detail::to_int(cols[4]);
    auto time = detail::to_double(cols[5]);
    auto memory = detail::to_int(cols[6].empty() ? std::string_view("0") : cols[6]);
    if (!prompt || !batch || !time || !memory) throw ParseError(line_no, "malformed number");
    s.batch_prompt_tokens = *prompt;
    s.batch_token_count = *batch;
    s.time_ms = *time;
    s.memory_bytes = *memory;
    Phase declared;
    if (cols[2] == "prompt") declared = Phase::prompt;
    else if (cols[2] == "token") declared = Phase::token;
    else throw ParseError(line_no, fmt::format("unknown phase '{}'", cols[2]));
    try {
      s.validate();
    } catch (const ValidationError& e) {
      throw ParseError(line_no, e.what());
    }
    if (s.phase() != declared) throw ParseError(line_no, "phase disagrees with counts");
    out.push_back(std::move(s));
  }
  if (!header_seen) throw ValidationError("empty profile");
  return out;
}

std::vector<ProfileSample> read_profile_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError(fmt::format("cannot open profile '{}'", path));
  return parse_profile(in);
}

void write_profile(std::ostream& out, std::span<const ProfileSample> samples) {
  out << kProfileHeader << '\n';
  for (const ProfileSample& s : samples)
    out << fmt::format("{},{},{},{},{},{},{}\n", to_string(s.machine_type), s.llm,
                       to_string(s.phase()), s.batch_prompt_tokens, s.batch_token_count,
                       s.time_ms, s.memory_bytes);
}

void write_model(std::ostream& out, const PerfModel& model) {
  out << "# piecewise-linear performance model\n";
  out << fmt::format("llm {}\n", model.llm);
  out << fmt::format("machine_type {}\n", to_string(model.machine_type));
  out << fmt::format("kv_bytes_per_token {}\n", model.kv_bytes_per_token);
  out << fmt::format("weight_memory {}\n", model.weight_memory);
  out << fmt::format("memory_capacity {}\n", model.memory_capacity);
  out << fmt::format("max_token_batch {}\n", model.max_token_batch);
  out << fmt::format("prompt_fit_error_ms {}\n", model.prompt_fit_error_ms);
  out << fmt::format("token_fit_error_ms {}\n", model.token_fit_error_ms);
  for (std::size_t i = 0; i < model.prompt_knots.size(); ++i)
    out << fmt::format("prompt_knot {} {}\n", model.prompt_knots.xs()[i], model.prompt_knots.ys()[i]);
  for (std::size_t i = 0; i < model.token_knots.size(); ++i)
    out << fmt::format("token_knot {} {}\n", model.token_knots.xs()[i], model.token_knots.ys()[i]);
}

PerfModel parse_model(std::istream& in) {
  PerfModel model;
  std::vector<double> px, py, tx, ty;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view row = detail::trim(line);
    if (row.empty() || row.front() == '#') continue;
    auto parts = detail::split(row, ' ');
    std::erase_if(parts, [](std::string_view p) { return p.empty(); });
    std::string_view key = parts[0];
    auto need = [&](std::size_t n) {
      if (parts.size() != n + 1) throw ParseError(line_no, fmt::format("'{}' takes {} values", key, n));
    };
    auto as_int = [&](std::string_view v) {
      auto x = detail::to_int(v);
      if (!x) throw ParseError(line_no, "malformed integer");
      return *x;
    };
    auto as_double = [&](std::string_view v) {
      auto x = detail::to_double(v);
      if (!x) throw ParseError(line_no, "malformed number");
      return *x;
    };
    if (key == "llm") { need(1); model.llm = std::string(parts[1]); }
    else if (key == "machine_type") {
      need(1);
      try { model.machine_type = parse_machine_type(parts[1]); }
      catch (const ValidationError& e) { throw ParseError(line_no, e.what()); }
    }
    else if (key == "kv_bytes_per_token") { need(1); model.kv_bytes_per_token = as_int(parts[1]); }
    else if (key == "weight_memory") { need(1); model.weight_memory = as_int(parts[1]); }
    else if (key == "memory_capacity") { need(1); model.memory_capacity = as_int(parts[1]); }
    else if (key == "max_token_batch") { need(1); model.max_token_batch = as_int(parts[1]); }
    else if (key == "prompt_fit_error_ms") { need(1); model.prompt_fit_error_ms = as_double(parts[1]); }
    else if (key == "token_fit_error_ms") { need(1); model.token_fit_error_ms = as_double(parts[1]); }
    else if (key == "prompt_knot") { need(2); px.push_back(as_double(parts[1])); py.push_back(as_double(parts[2])); }
    else if (key == "token_knot") { need(2); tx.push_back(as_double(parts[1])); ty.push_back(as_double(parts[2])); }
    else throw ParseError(line_no, fmt::format("unknown key '{}'", key));
  }
  if (px.empty() || tx.empty()) throw ValidationError("model file has no knots");
  model.prompt_knots = PiecewiseLinear(std::move(px), std::move(py));
  model.token_knots = PiecewiseLinear(std::move(tx), std::move(ty));
  model.validate();
  return model;
}

}  // namespace splitsim
