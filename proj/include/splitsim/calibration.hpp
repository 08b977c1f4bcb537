// Copyright 2026 The splitsim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "splitsim/perfmodel.hpp"

namespace splitsim {

struct LlmSpec {
  std::string name;
  int num_layers = 0;
  int hidden_size = 0;
  std::int64_t weight_bytes = 0;
  /// Context length at which the KV footprint of max_token_batch requests
  /// exactly fills free memory; ties the batch cap to memory capacity.
  std::int64_t reference_context_tokens = 0;
  std::int64_t max_token_batch = 0;
};

/// "llama2-70b" or "bloom-176b".
const LlmSpec& llm_spec(std::string_view name);
std::vector<std::string> known_llms();

/// K and V, fp16, every layer: 2 * layers * hidden * 2 bytes.
std::int64_t default_kv_bytes_per_token(const LlmSpec& llm);

/// Hardware description normalized to one DGX-A100.
struct MachineSpec {
  MachineType machine_type = MachineType::A100;
  double power_rating = 1.0;
  double cost_rate = 1.0;
  double interconnect_bandwidth_bps = 0.0;
  std::int64_t memory_capacity = 0;
};

MachineSpec machine_spec(MachineType type);

/// Multiplier applied to H100 prompt times for the power-capped machine.
inline constexpr double kDefaultH100CapPromptFactor = 1.5;

/// Built-in model anchored to the published single-request medians.
PerfModel calibrated_model(std::string_view llm, MachineType type,
                           double h100cap_prompt_factor =
                               kDefaultH100CapPromptFactor);

/// All machine types for one LLM.
std::map<MachineType, PerfModel> calibrated_models(std::string_view llm);

/// Calibration knots as profile samples (one sample per knot, memory column
/// filled in), suitable for write_profile and for refitting.
std::vector<ProfileSample> calibration_profile(std::string_view llm);

}  // namespace splitsim
