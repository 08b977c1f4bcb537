// Copyright 2026 The splitsim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string_view>

#include "splitsim/perfmodel.hpp"

namespace splitsim {

enum class TransferMode { serialized, layerwise };

std::string_view to_string(TransferMode mode);

/// Prompt-to-token machine link. Bandwidth is in bits per second.
struct TransferConfig {
  double bandwidth_bps = 400e9;
  std::int64_t mode_threshold_tokens = 512;
  double layerwise_constant_ms = 5.0;
  int num_layers = 80;

  void validate() const;
};

struct TransferPlan {
  TransferMode mode = TransferMode::serialized;
  double raw_ms = 0.0;
  double visible_ms = 0.0;
  double overlap_hidden_ms = 0.0;
};

double raw_transfer_time(std::int64_t kv_bytes, const TransferConfig& config);

/// Serialized below the threshold, layer-wise at or above it.
TransferMode select_mode(std::int64_t prompt_tokens,
                         const TransferConfig& config);

/// Latency the token machine sees after the first token.
///
/// Serialized: the whole transfer follows the prompt phase.
/// Layer-wise: layer i ships while layer i+1 computes, so everything but the
/// last layer's compute can hide the transfer. What remains visible is
///   min(raw, max(layerwise_constant_ms, raw - prompt_ms * (1 - 1/layers)))
/// The constant models per-layer synchronization; it never makes the
/// layer-wise plan slower than shipping the raw bytes.
TransferPlan plan_transfer(std::int64_t prompt_tokens, std::int64_t kv_bytes,
                           double prompt_compute_ms,
                           const TransferConfig& config);

/// Link between two machine types; any A100 endpoint gives the A100-class
/// link (200 Gb/s, 1024-token threshold, 8 ms), otherwise H100-class
/// (400 Gb/s, 512 tokens, 5 ms).
TransferConfig default_link(MachineType from, MachineType to, int num_layers);

}  // namespace splitsim
