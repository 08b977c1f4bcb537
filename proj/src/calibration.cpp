// Copyright 2026 The splitsim Authors
// SPDX-License-Identifier: Apache-2.0

#include "splitsim/calibration.hpp"

#include <fmt/format.h>

#include "splitsim/error.hpp"

namespace splitsim {

namespace {

constexpr std::int64_t kDgxMemory = 640'000'000'000;  // 8 x 80 GB

struct Knots {
  std::vector<double> xs;
  std::vector<double> ys;
};

struct Calibration {
  Knots prompt;
  Knots token;
};

// Prompt curves rise slowly at small sizes (fixed per-iteration overhead
// dominates), are near-linear through the common range, and lose efficiency
// past 2048 batched tokens. Token curves stay almost flat up to a batch of
// ~16 and roughly double by 64.
const Calibration& table(std::string_view llm, MachineType type) {
  static const Calibration llama_h100{
      {{1, 128, 512, 1024, 1500, 2048, 4096, 8192}, {31, 48, 72, 84, 95, 128, 280, 610}},
      {{1, 8, 16, 32, 48, 64}, {31, 32, 34, 39, 48, 62}}};
  static const Calibration llama_a100{
      {{1, 128, 512, 1024, 1500, 2048, 4096, 8192}, {52, 85, 140, 164, 185, 250, 550, 1200}},
      {{1, 8, 16, 32, 48, 64}, {52, 53, 56, 65, 80, 104}}};
  static const Calibration bloom_h100{
      {{1, 128, 512, 1024, 1500, 2048, 4096, 8192}, {45, 90, 160, 220, 270, 330, 700, 1440}},
      {{1, 8, 16, 32, 48, 64}, {45, 47, 50, 58, 72, 90}}};
  static const Calibration bloom_a100{
      {{1, 128, 512, 1024, 1500, 2048, 4096, 8192}, {75, 170, 300, 420, 520, 640, 1340, 2760}},
      {{1, 8, 16, 32, 48, 64}, {75, 77, 81, 94, 116, 150}}};
  bool a100 = type == MachineType::A100;
  if (llm == "llama2-70b") return a100 ? llama_a100 : llama_h100;
  if (llm == "bloom-176b") return a100 ? bloom_a100 : bloom_h100;
  throw ConfigError(fmt::format("no calibration for LLM '{}'", llm));
}

}  // namespace

const LlmSpec& llm_spec(std::string_view name) {
  static const LlmSpec llama{"llama2-70b", 80, 8192, 140'000'000'000, 2960, 64};
  static const LlmSpec bloom{"bloom-176b", 70, 14336, 352'000'000'000, 1120, 64};
  if (name == llama.name) return llama;
  if (name == bloom.name) return bloom;
  throw ConfigError(fmt::format("unknown LLM '{}'", name));
}

std::vector<std::string> known_llms() { return {"llama2-70b", "bloom-176b"}; }

std::int64_t default_kv_bytes_per_token(const LlmSpec& llm) {
  return std::int64_t{2} * llm.num_layers * llm.hidden_size * 2;
}

MachineSpec machine_spec(MachineType type) {
  switch (type) {
    case MachineType::A100: return {type, 1.0, 1.0, 200e9, kDgxMemory};
    case MachineType::H100: return {type, 1.75, 2.35, 400e9, kDgxMemory};
    case MachineType::H100cap: return {type, 1.23, 2.35, 400e9, kDgxMemory};
  }
  throw ValidationError("unknown machine type");
}

PerfModel calibrated_model(std::string_view llm, MachineType type, double h100cap_prompt_factor) {
  if (!(h100cap_prompt_factor > 0.0)) throw ValidationError("prompt factor must be positive");
  const LlmSpec& spec = llm_spec(llm);
  const Calibration& cal = table(llm, type);
  std::vector<double> prompt_ys = cal.prompt.ys;
  if (type == MachineType::H100cap)
    for (double& y : prompt_ys) y *= h100cap_prompt_factor;

  PerfModel m;
  m.llm = spec.name;
  m.machine_type = type;
  m.prompt_knots = PiecewiseLinear(cal.prompt.xs, std::move(prompt_ys));
  m.token_knots = PiecewiseLinear(cal.token.xs, cal.token.ys);
  m.kv_bytes_per_token = default_kv_bytes_per_token(spec);
  m.weight_memory = spec.weight_bytes;
  m.memory_capacity = machine_spec(type).memory_capacity;
  m.max_token_batch = spec.max_token_batch;
  m.validate();
  return m;
}

std::map<MachineType, PerfModel> calibrated_models(std::string_view llm) {
  std::map<MachineType, PerfModel> out;
  for (MachineType t : {MachineType::A100, MachineType::H100, MachineType::H100cap})
    out.emplace(t, calibrated_model(llm, t));
  return out;
}

std::vector<ProfileSample> calibration_profile(std::string_view llm) {
  const LlmSpec& spec = llm_spec(llm);
  std::vector<ProfileSample> out;
  for (auto& [type, model] : calibrated_models(llm)) {
    for (std::size_t i = 0; i < model.prompt_knots.size(); ++i) {
      auto tokens = static_cast<std::int64_t>(model.prompt_knots.xs()[i]);
      out.push_back({type, spec.name, tokens, 0, model.prompt_knots.ys()[i],
                     model.weight_memory + kv_cache_bytes(model, tokens)});
    }
    for (std::size_t i = 0; i < model.token_knots.size(); ++i) {
      auto batch = static_cast<std::int64_t>(model.token_knots.xs()[i]);
      out.push_back({type, spec.name, 0, batch, model.token_knots.ys()[i],
                     model.weight_memory +
                         kv_cache_bytes(model, batch * spec.reference_context_tokens)});
    }
  }
  return out;
}

}  // namespace splitsim
