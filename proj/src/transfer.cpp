// Copyright 2026 The splitsim Authors
// SPDX-License-Identifier: Apache-2.0

#include "splitsim/transfer.hpp"

#include <algorithm>
#include <cmath>

#include "splitsim/error.hpp"

namespace splitsim {

std::string_view to_string(TransferMode mode) {
  return mode == TransferMode::serialized ? "serialized" : "layerwise";
}

void TransferConfig::validate() const {
  if (!(bandwidth_bps > 0.0) || !std::isfinite(bandwidth_bps))
    throw ValidationError("transfer bandwidth must be positive");
  if (mode_threshold_tokens < 0) throw ValidationError("transfer threshold must be >= 0");
  if (!(layerwise_constant_ms >= 0.0)) throw ValidationError("layer-wise constant must be >= 0");
  if (num_layers < 1) throw ValidationError("layer count must be >= 1");
}

double raw_transfer_time(std::int64_t kv_bytes, const TransferConfig& config) {
  if (kv_bytes < 0) throw ValidationError("kv bytes must be non-negative");
  return 8000.0 * static_cast<double>(kv_bytes) / config.bandwidth_bps;
}

TransferMode select_mode(std::int64_t prompt_tokens, const TransferConfig& config) {
  return prompt_tokens < config.mode_threshold_tokens ? TransferMode::serialized
                                                      : TransferMode::layerwise;
}

TransferPlan plan_transfer(std::int64_t prompt_tokens, std::int64_t kv_bytes,
                           double prompt_compute_ms, const TransferConfig& config) {
  if (prompt_tokens < 0 || !(prompt_compute_ms >= 0.0))
    throw ValidationError("transfer inputs must be non-negative");
  TransferPlan plan;
  plan.mode = select_mode(prompt_tokens, config);
  plan.raw_ms = raw_transfer_time(kv_bytes, config);
  if (plan.mode == TransferMode::serialized) {
    plan.visible_ms = plan.raw_ms;
  } else {
    double window = prompt_compute_ms * (1.0 - 1.0 / config.num_layers);
    plan.visible_ms =
        std::min(plan.raw_ms, std::max(config.layerwise_constant_ms, plan.raw_ms - window));
  }
  plan.overlap_hidden_ms = plan.raw_ms - plan.visible_ms;
  return plan;
}

TransferConfig default_link(MachineType from, MachineType to, int num_layers) {
  TransferConfig c;
  c.num_layers = num_layers;
  if (from == MachineType::A100 || to == MachineType::A100) {
    c.bandwidth_bps = 200e9;
    c.mode_threshold_tokens = 1024;
    c.layerwise_constant_ms = 8.0;
  }
  return c;
}

}  // namespace splitsim
