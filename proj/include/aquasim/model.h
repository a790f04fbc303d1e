// Copyright 2026 The aquasim Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "aquasim/common.h"

namespace aquasim {

enum class ModelKind { kLlm, kVision, kAudio };

std::string_view to_string(ModelKind kind);

struct IterationCost {
  Seconds t_base = 0.020;
  Seconds t_token = 40e-6;
};

// Latency/SLA targets for interactive LLM serving.
struct SlaSpec {
  Seconds ttft_max = 1.0;
  Seconds tbt_p99_max = 0.1;
  int chunk = 512;

  void validate() const;
};

// Batch-inference behaviour of non-LLM generators: throughput saturates as
// peak * b / (b + half_batch) and memory grows linearly with the batch.
struct BatchCurve {
  double peak_throughput = 0;  // items / second
  double half_batch = 1;
  Bytes base_memory = 0;
  Bytes per_item_memory = 0;

  double throughput(int batch) const;
  Bytes memory(int batch) const;
  Seconds batch_latency(int batch) const { return batch / throughput(batch); }
};

struct ModelProfile {
  std::string model_id;
  ModelKind kind = ModelKind::kLlm;
  Bytes weights_bytes_per_shard = 0;
  // Activations and engine workspace; never available to KV or offers.
  Bytes reserved_bytes_per_shard = 0;
  Bytes kv_bytes_per_token = 0;
  int num_layers = 32;
  int chunk_size = 512;
  int num_shards = 1;
  // Signed per-shard memory figure: positive = supply, negative = demand.
  Bytes mem_requirement_per_shard = 0;
  SlaSpec sla;
  IterationCost iter_cost;
  // Added to each iteration of this model while it hosts someone's tensors
  // and transfers touched its GPU.
  Seconds producer_impact = 0.0045;
  BatchCurve batch;

  // Throws DomainError naming the offending field.
  void validate(Bytes gpu_hbm) const;
  // HBM left for KV on one shard before any offer.
  Bytes kv_pool_per_shard(Bytes gpu_hbm) const;
};

// t_base + (prefill_tokens + decode_tokens) * t_token
Seconds iteration_time(std::int64_t prefill_tokens, std::int64_t decode_tokens,
                       const ModelProfile& profile);

Bytes kv_bytes(const ModelProfile& profile, std::int64_t tokens);

Seconds producer_impact(const ModelProfile& profile, bool sharing_active);

// Presets by model name for a GPU class ("a100" or "h100"); num_shards = 0
// keeps the preset's default parallelism.
ModelProfile model_preset(std::string_view name, std::string_view gpu_class, int num_shards = 0);
std::vector<std::string> model_preset_names();

// "h100x8" -> "h100", "a100x2" -> "a100".
std::string gpu_class_of(std::string_view topology_preset);

}  // namespace aquasim
