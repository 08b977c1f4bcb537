// Copyright 2026 The splitsim Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "splitsim/calibration.hpp"
#include "splitsim/error.hpp"
#include "splitsim/perfmodel.hpp"
#include "support.hpp"

namespace splitsim {
namespace {

ProfileSample prompt_sample(std::int64_t tokens, double ms) {
  return {MachineType::H100, "llama2-70b", tokens, 0, ms, 0};
}
ProfileSample token_sample(std::int64_t batch, double ms) {
  return {MachineType::H100, "llama2-70b", 0, batch, ms, 0};
}

TEST(PiecewiseLinear, InterpolatesAndExtrapolates) {
  PiecewiseLinear f({100, 200, 400}, {10, 20, 60});
  EXPECT_DOUBLE_EQ(f(100), 10);
  EXPECT_DOUBLE_EQ(f(150), 15);
  EXPECT_DOUBLE_EQ(f(300), 40);
  EXPECT_DOUBLE_EQ(f(500), 80);  // final slope continues
  EXPECT_GT(f(1), 0.0);
  EXPECT_THROW(PiecewiseLinear({1, 1}, {1, 2}), InternalError);
}

TEST(PiecewiseLinear, ContinuousAtKnots) {
  PiecewiseLinear f({1, 8, 16, 64}, {30, 31, 40, 70});
  for (double x : f.xs()) {
    EXPECT_NEAR(f(x - 1e-9), f(x), 1e-6);
    EXPECT_NEAR(f(x + 1e-9), f(x), 1e-6);
  }
}

TEST(Fit, TwoPointLinearInterpolation) {
  std::vector<ProfileSample> s = {prompt_sample(100, 10), prompt_sample(200, 20),
                                  token_sample(1, 30), token_sample(8, 32)};
  PerfModel m = fit_piecewise_linear(s);
  EXPECT_DOUBLE_EQ(prompt_time(m, 150), 15.0);
}

TEST(Fit, SingleAbscissaIsFitError) {
  std::vector<ProfileSample> s = {prompt_sample(100, 10), prompt_sample(100, 12),
                                  token_sample(1, 30), token_sample(8, 32)};
  EXPECT_THROW(fit_piecewise_linear(s), FitError);
  std::vector<CurvePoint> pts = {{5, 1}, {5, 2}};
  EXPECT_THROW(fit_curve(pts, 4), FitError);
}

TEST(Fit, DuplicatesAveraged) {
  std::vector<CurvePoint> pts = {{1, 10}, {1, 20}, {2, 30}};
  CurveFit f = fit_curve(pts, 8);
  EXPECT_DOUBLE_EQ(f.curve(1), 15.0);
  EXPECT_DOUBLE_EQ(f.curve(2), 30.0);
}

TEST(Fit, ExactAtKnotsWithinBudget) {
  std::vector<CurvePoint> pts = {{1, 5}, {2, 7}, {4, 8}, {8, 20}};
  CurveFit f = fit_curve(pts, 16);
  ASSERT_EQ(f.curve.size(), 4u);
  for (const CurvePoint& p : pts) EXPECT_DOUBLE_EQ(f.curve(p.x), p.y);
  EXPECT_DOUBLE_EQ(f.max_abs_residual, 0.0);
}

TEST(Fit, PoolAdjacentViolatorsRepairsDips) {
  std::vector<CurvePoint> pts = {{1, 10}, {2, 14}, {3, 12}, {4, 20}};
  CurveFit f = fit_curve(pts, 16);
  // 14 and 12 pool to 13.
  EXPECT_DOUBLE_EQ(f.curve(2), 13.0);
  EXPECT_DOUBLE_EQ(f.curve(3), 13.0);
}

TEST(Fit, KnotBudgetRespected) {
  std::vector<CurvePoint> pts;
  for (int x = 1; x <= 200; ++x) pts.push_back({double(x), std::sqrt(double(x))});
  CurveFit f = fit_curve(pts, 6);
  EXPECT_LE(f.curve.size(), 6u);
  EXPECT_DOUBLE_EQ(f.curve.xs().front(), 1.0);
  EXPECT_DOUBLE_EQ(f.curve.xs().back(), 200.0);
}

// Property: monotone output, and every training point within the reported
// residual, across random noisy inputs.
TEST(FitProperty, MonotoneAndWithinReportedResidual) {
  for (std::uint64_t seed = 1; seed <= 40; ++seed) {
    Rng rng(seed);
    std::vector<CurvePoint> pts;
    int n = 3 + static_cast<int>(rng.below(60));
    for (int i = 0; i < n; ++i)
      pts.push_back({1.0 + std::floor(rng.uniform() * 500), 1.0 + 100 * rng.uniform()});
    std::size_t budget = 2 + rng.below(10);
    std::vector<double> xs;
    for (auto& p : pts) xs.push_back(p.x);
    std::sort(xs.begin(), xs.end());
    if (std::unique(xs.begin(), xs.end()) - xs.begin() < 2) continue;
    CurveFit f = fit_curve(pts, budget);
    ASSERT_LE(f.curve.size(), std::max<std::size_t>(budget, 2));
    for (std::size_t i = 1; i < f.curve.size(); ++i)
      EXPECT_LE(f.curve.ys()[i - 1], f.curve.ys()[i]);
    // Duplicates are averaged first, so compare against the per-x means.
    std::map<double, std::pair<double, int>> mean;
    for (auto& p : pts) {
      mean[p.x].first += p.y;
      mean[p.x].second += 1;
    }
    for (auto& [x, acc] : mean)
      EXPECT_LE(std::abs(f.curve(x) - acc.first / acc.second), f.max_abs_residual + 1e-9);
  }
}

TEST(Fit, NoisyGroundTruthHoldoutUnderThreePercent) {
  auto samples = testing::synthetic_profile(5, 0.01);
  HoldoutReport h = evaluate_holdout(samples, {}, 5);
  EXPECT_LT(h.test_mape, 3.0);
  EXPECT_GT(h.test_count, 0u);
  EXPECT_EQ(h.train_count + h.test_count, samples.size());
}

TEST(Fit, NoiselessLinearHoldoutIsZero) {
  std::vector<ProfileSample> s;
  for (int x = 1; x <= 40; ++x) s.push_back(prompt_sample(x * 50, 10.0 + 0.05 * x * 50));
  for (int b = 1; b <= 40; ++b) s.push_back(token_sample(b, 30.0 + 0.5 * b));
  HoldoutReport h = evaluate_holdout(s, {}, 1);
  EXPECT_NEAR(h.test_mape, 0.0, 1e-9);
}

TEST(Fit, InfersMemoryFromSamples) {
  // memory = weights + kv * tokens for prompt samples.
  std::vector<ProfileSample> s;
  for (int x = 1; x <= 4; ++x) {
    ProfileSample p = prompt_sample(x * 100, 10.0 * x);
    p.memory_bytes = 1000 + 7 * x * 100;
    s.push_back(p);
  }
  s.push_back(token_sample(1, 30));
  s.push_back(token_sample(2, 31));
  PerfModel m = fit_piecewise_linear(s);
  EXPECT_EQ(m.kv_bytes_per_token, 7);
  EXPECT_EQ(m.weight_memory, 1000);
}

TEST(Calibration, TableFourMedians) {
  PerfModel h100 = calibrated_model("llama2-70b", MachineType::H100);
  PerfModel a100 = calibrated_model("llama2-70b", MachineType::A100);
  EXPECT_DOUBLE_EQ(prompt_time(h100, 1500), 95.0);
  EXPECT_DOUBLE_EQ(prompt_time(a100, 1500), 185.0);
  EXPECT_DOUBLE_EQ(token_iter_time(h100, 1), 31.0);
  EXPECT_DOUBLE_EQ(token_iter_time(a100, 1), 52.0);
}

TEST(Calibration, NearLinearPromptAndFlatTokenCurves) {
  for (const std::string& llm : known_llms()) {
    for (auto& [type, m] : calibrated_models(llm)) {
      for (std::int64_t x = 256; x <= 8192; x += 16)
        EXPECT_LE(prompt_time(m, 2 * x), 2.2 * prompt_time(m, x)) << llm << " " << x;
      EXPECT_LE(token_iter_time(m, 64), 2.2 * token_iter_time(m, 1));
      for (std::int64_t b = 2; b <= m.max_token_batch; ++b)
        EXPECT_LE(token_iter_time(m, b - 1), token_iter_time(m, b));
      for (std::int64_t x = 2; x <= 16384; x += 7)
        EXPECT_LE(prompt_time(m, x - 1), prompt_time(m, x));
    }
  }
}

TEST(Calibration, HundredCapSharesTokenCurve) {
  PerfModel h = calibrated_model("llama2-70b", MachineType::H100);
  PerfModel cap = calibrated_model("llama2-70b", MachineType::H100cap);
  for (std::int64_t b = 1; b <= 64; ++b) EXPECT_DOUBLE_EQ(token_iter_time(cap, b), token_iter_time(h, b));
  EXPECT_DOUBLE_EQ(prompt_time(cap, 1500), 1.5 * prompt_time(h, 1500));
  PerfModel cap2 = calibrated_model("llama2-70b", MachineType::H100cap, 2.0);
  EXPECT_DOUBLE_EQ(prompt_time(cap2, 1500), 2.0 * prompt_time(h, 1500));
}

TEST(Calibration, MachineSpecsNormalizedToA100) {
  EXPECT_EQ(machine_spec(MachineType::A100).power_rating, 1.0);
  EXPECT_EQ(machine_spec(MachineType::A100).cost_rate, 1.0);
  EXPECT_EQ(machine_spec(MachineType::H100).power_rating, 1.75);
  EXPECT_EQ(machine_spec(MachineType::H100cap).power_rating, 1.23);
  EXPECT_THROW(llm_spec("gpt-5"), ConfigError);
}

TEST(Queries, ErrorsAtDomainEdges) {
  PerfModel m = calibrated_model("llama2-70b", MachineType::H100);
  EXPECT_THROW(prompt_time(m, 0), ValidationError);
  EXPECT_THROW(token_iter_time(m, 0), ValidationError);
  EXPECT_NO_THROW(token_iter_time(m, 64));
  EXPECT_THROW(token_iter_time(m, 65), CapacityError);
}

TEST(KvCache, LlamaArithmetic) {
  PerfModel m = calibrated_model("llama2-70b", MachineType::H100);
  // 2 (K and V) * 80 layers * 8192 hidden * 2 bytes (fp16).
  const std::int64_t per_token = 2LL * 80 * 8192 * 2;
  EXPECT_EQ(per_token, 2'621'440);
  EXPECT_EQ(m.kv_bytes_per_token, per_token);
  EXPECT_EQ(kv_cache_bytes(m, 0), 0);
  EXPECT_EQ(kv_cache_bytes(m, 1500), 3'932'160'000);
  for (std::int64_t t : {1, 17, 1500, 4096}) EXPECT_EQ(kv_cache_bytes(m, 2 * t), 2 * kv_cache_bytes(m, t));
  EXPECT_THROW(kv_cache_bytes(m, -1), ValidationError);
}

TEST(KvCache, MaxTokenBatchMatchesMemoryBruteForce) {
  for (const std::string& llm : known_llms()) {
    const LlmSpec& spec = llm_spec(llm);
    PerfModel m = calibrated_model(llm, MachineType::A100);
    std::int64_t best = 0;
    for (std::int64_t n = 1; n <= 1000; ++n) {
      std::vector<std::int64_t> contexts(static_cast<std::size_t>(n), spec.reference_context_tokens);
      if (memory_in_use(m, contexts) <= m.memory_capacity) best = n;
    }
    EXPECT_EQ(best, m.max_token_batch) << llm;
  }
}

TEST(Memory, AdditiveAndPermutationInvariant) {
  PerfModel m = calibrated_model("llama2-70b", MachineType::A100);
  EXPECT_EQ(memory_in_use(m, {}), m.weight_memory);
  std::vector<std::int64_t> a = {100, 200};
  EXPECT_EQ(memory_in_use(m, a), m.weight_memory + kv_cache_bytes(m, 300));
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::int64_t> c;
    for (int i = 0; i < 10; ++i) c.push_back(static_cast<std::int64_t>(rng.below(5000)));
    std::int64_t base = memory_in_use(m, c);
    std::reverse(c.begin(), c.end());
    EXPECT_EQ(memory_in_use(m, c), base);
    std::int64_t sum = m.weight_memory;
    for (auto x : c) sum += kv_cache_bytes(m, x);
    EXPECT_EQ(base, sum);
  }
}

TEST(ProfileIo, RoundTrip) {
  auto samples = calibration_profile("llama2-70b");
  std::ostringstream out;
  write_profile(out, samples);
  std::istringstream in(out.str());
  auto back = parse_profile(in);
  ASSERT_EQ(back.size(), samples.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    EXPECT_EQ(back[i].machine_type, samples[i].machine_type);
    EXPECT_EQ(back[i].batch_prompt_tokens, samples[i].batch_prompt_tokens);
    EXPECT_EQ(back[i].batch_token_count, samples[i].batch_token_count);
    EXPECT_DOUBLE_EQ(back[i].time_ms, samples[i].time_ms);
    EXPECT_EQ(back[i].memory_bytes, samples[i].memory_bytes);
  }
}

TEST(ProfileIo, RefitReproducesCalibration) {
  auto models = fit_models(calibration_profile("llama2-70b"));
  PerfModel ref = calibrated_model("llama2-70b", MachineType::H100);
  const PerfModel& fit = models.at({MachineType::H100, "llama2-70b"});
  for (std::int64_t x : {1, 100, 1500, 3000, 8192}) EXPECT_NEAR(prompt_time(fit, x), prompt_time(ref, x), 1e-9);
  for (std::int64_t b : {1, 10, 64}) EXPECT_NEAR(token_iter_time(fit, b), token_iter_time(ref, b), 1e-9);
  EXPECT_EQ(fit.kv_bytes_per_token, ref.kv_bytes_per_token);
  EXPECT_EQ(fit.max_token_batch, ref.max_token_batch);
}

TEST(ProfileIo, RejectsBadRows) {
  std::istringstream both("machine_type,llm,phase,prompt_tokens,batch_size,time_ms,memory_bytes\n"
                          "H100,llama2-70b,prompt,10,3,5,0\n");
  EXPECT_ANY_THROW(parse_profile(both));
  std::istringstream neg("machine_type,llm,phase,prompt_tokens,batch_size,time_ms,memory_bytes\n"
                         "H100,llama2-70b,token,0,3,-5,0\n");
  EXPECT_ANY_THROW(parse_profile(neg));
  std::istringstream type("machine_type,llm,phase,prompt_tokens,batch_size,time_ms,memory_bytes\n"
                          "V100,llama2-70b,token,0,3,5,0\n");
  EXPECT_ANY_THROW(parse_profile(type));
}

TEST(ModelIo, RoundTrip) {
  PerfModel m = calibrated_model("bloom-176b", MachineType::A100);
  std::ostringstream out;
  write_model(out, m);
  std::istringstream in(out.str());
  PerfModel back = parse_model(in);
  EXPECT_EQ(back.llm, m.llm);
  EXPECT_EQ(back.machine_type, m.machine_type);
  EXPECT_EQ(back.kv_bytes_per_token, m.kv_bytes_per_token);
  EXPECT_EQ(back.max_token_batch, m.max_token_batch);
  ASSERT_EQ(back.prompt_knots.size(), m.prompt_knots.size());
  for (std::size_t i = 0; i < m.prompt_knots.size(); ++i)
    EXPECT_DOUBLE_EQ(back.prompt_knots.ys()[i], m.prompt_knots.ys()[i]);
  std::ostringstream again;
  write_model(again, back);
  EXPECT_EQ(again.str(), out.str());
}

}  // namespace
}  // namespace splitsim
