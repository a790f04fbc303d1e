// Copyright 2026 The aquasim Authors.
// SPDX-License-Identifier: Apache-2.0

#include "aquasim/model.h"

#include <cmath>

namespace aquasim {

std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::kLlm: return "llm";
    case ModelKind::kVision: return "vision";
    case ModelKind::kAudio: return "audio";
  }
  return "?";
}

void SlaSpec::validate() const {
  if (!(ttft_max > 0)) throw DomainError("sla.ttft_max must be positive");
  if (!(tbt_p99_max > 0)) throw DomainError("sla.tbt_p99_max must be positive");
  if (chunk < 1) throw DomainError("sla.chunk must be >= 1");
}

double BatchCurve::throughput(int batch) const {
  if (batch < 1) throw DomainError("batch must be >= 1");
  return peak_throughput * batch / (batch + half_batch);
}

Bytes BatchCurve::memory(int batch) const { return base_memory + per_item_memory * batch; }

void ModelProfile::validate(Bytes gpu_hbm) const {
  const std::string m = model_id.empty() ? "model" : model_id;
  if (weights_bytes_per_shard < 0) throw DomainError(m + ": weights_bytes_per_shard must be >= 0");
  if (reserved_bytes_per_shard < 0) throw DomainError(m + ": reserved_bytes_per_shard must be >= 0");
  if (chunk_size < 1) throw DomainError(m + ": chunk_size must be >= 1");
  if (num_shards < 1) throw DomainError(m + ": num_shards must be >= 1");
  if (num_layers < 1) throw DomainError(m + ": num_layers must be >= 1");
  if (!(producer_impact >= 0)) throw DomainError(m + ": producer_impact must be >= 0");
  if (std::llabs(mem_requirement_per_shard) > gpu_hbm) {
    throw DomainError(m + ": |mem_requirement_per_shard| exceeds GPU HBM");
  }
  if (kind == ModelKind::kLlm) {
    if (kv_bytes_per_token <= 0) throw DomainError(m + ": kv_bytes_per_token must be > 0");
    if (!(iter_cost.t_base >= 0) || !(iter_cost.t_token >= 0) ||
        !(iter_cost.t_base + iter_cost.t_token > 0)) {
      throw DomainError(m + ": iteration cost must be nonnegative and not all zero");
    }
    if (kv_pool_per_shard(gpu_hbm) <= 0) {
      throw DomainError(m + ": weights and reserve leave no HBM for KV");
    }
    sla.validate();
  } else {
    if (!(batch.peak_throughput > 0)) throw DomainError(m + ": batch.peak_throughput must be > 0");
    if (!(batch.half_batch >= 0)) throw DomainError(m + ": batch.half_batch must be >= 0");
  }
}

Bytes ModelProfile::kv_pool_per_shard(Bytes gpu_hbm) const {
  return gpu_hbm - weights_bytes_per_shard - reserved_bytes_per_shard;
}

Seconds iteration_time(std::int64_t prefill_tokens, std::int64_t decode_tokens,
                       const ModelProfile& profile) {
  if (prefill_tokens < 0 || decode_tokens < 0) throw DomainError("token counts must be >= 0");
  const std::int64_t n = prefill_tokens + decode_tokens;
  if (n < 1) throw DomainError("iteration needs at least one token");
  return profile.iter_cost.t_base + static_cast<double>(n) * profile.iter_cost.t_token;
}

Bytes kv_bytes(const ModelProfile& profile, std::int64_t tokens) {
  if (tokens < 0) throw DomainError("token count must be >= 0");
  return tokens * profile.kv_bytes_per_token;
}

Seconds producer_impact(const ModelProfile& profile, bool sharing_active) {
  return sharing_active ? profile.producer_impact : 0.0;
}

namespace {

struct LlmSpec {
  const char* name;
  double weights_gb;  // whole model
  Bytes kv_per_token;  // whole model
  int layers;
  int shards;
  double reserve_gb;  // per shard
  IterationCost a100;
  IterationCost h100;
};

// Iteration costs are simulator calibration, not measurements.
constexpr LlmSpec kLlms[] = {
    {"llama-8b", 16, 131072, 32, 1, 9, {0.016, 39e-6}, {0.011, 25e-6}},
    {"llama-70b", 140, 327680, 80, 2, 2, {0.030, 80e-6}, {0.020, 40e-6}},
    {"yi-34b", 68, 245760, 60, 1, 2, {0.020, 40e-6}, {0.020, 40e-6}},
    {"yi-34b-200k", 68, 245760, 60, 2, 2, {0.020, 40e-6}, {0.020, 40e-6}},
    {"opt-30b", 60, 1250000, 48, 1, 16, {0.020, 40e-6}, {0.020, 40e-6}},
};

struct BatchSpec {
  const char* name;
  ModelKind kind;
  double peak;  // items / second
  double half;
  double base_gb;
  double per_item_gb;
  double weights_gb;
};

constexpr BatchSpec kBatchModels[] = {
    {"sd-3", ModelKind::kVision, 0.9, 5, 18, 4, 16},
    {"sd-xl", ModelKind::kVision, 1.4, 4, 12, 3, 7},
    {"kandinsky", ModelKind::kVision, 1.1, 4, 14, 3.5, 10},
    {"audiogen", ModelKind::kAudio, 0.5, 6, 10, 2.5, 3},
    {"musicgen", ModelKind::kAudio, 0.4, 6, 12, 2.5, 7},
};

}  // namespace

ModelProfile model_preset(std::string_view name, std::string_view gpu_class, int num_shards) {
  if (gpu_class != "a100" && gpu_class != "h100") {
    throw ConfigError("gpu", "unknown GPU class '" + std::string(gpu_class) + "' (valid: a100, h100)");
  }
  if (num_shards < 0) throw ConfigError("shards", "must be >= 1");
  for (const auto& s : kLlms) {
    if (name != s.name) continue;
    ModelProfile p;
    p.model_id = s.name;
    p.kind = ModelKind::kLlm;
    p.num_shards = num_shards > 0 ? num_shards : s.shards;
    p.weights_bytes_per_shard = gigabytes(s.weights_gb / p.num_shards);
    p.reserved_bytes_per_shard = gigabytes(s.reserve_gb);
    p.kv_bytes_per_token = s.kv_per_token;
    p.num_layers = s.layers;
    p.iter_cost = gpu_class == "a100" ? s.a100 : s.h100;
    return p;
  }
  for (const auto& s : kBatchModels) {
    if (name != s.name) continue;
    ModelProfile p;
    p.model_id = s.name;
    p.kind = s.kind;
    p.num_shards = 1;
    p.weights_bytes_per_shard = gigabytes(s.weights_gb);
    p.batch = {s.peak, s.half, gigabytes(s.base_gb), gigabytes(s.per_item_gb)};
    p.producer_impact = s.kind == ModelKind::kVision ? 0.0 : 0.0045;
    p.num_layers = 1;
    return p;
  }
  std::string valid;
  for (const auto& n : model_preset_names()) valid += (valid.empty() ? "" : ", ") + n;
  throw ConfigError("model", "unknown model preset '" + std::string(name) + "' (valid: " + valid + ")");
}

std::vector<std::string> model_preset_names() {
  std::vector<std::string> out;
  for (const auto& s : kLlms) out.emplace_back(s.name);
  for (const auto& s : kBatchModels) out.emplace_back(s.name);
  return out;
}

std::string gpu_class_of(std::string_view topology_preset) {
  if (topology_preset.rfind("h100", 0) == 0) return "h100";
  if (topology_preset.rfind("a100", 0) == 0) return "a100";
  throw ConfigError("topology.preset", "cannot infer GPU class from '" + std::string(topology_preset) + "'");
}

}  // namespace aquasim
