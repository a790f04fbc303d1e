// Copyright 2026 The aquasim Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "aquasim/common.h"
#include "aquasim/location.h"
#include "aquasim/model.h"
#include "aquasim/topology.h"
#include "aquasim/workload.h"

namespace aquasim {

enum class Phase { kQueued, kPrefill, kDecode, kFinished };
enum class KvLocation { kNone, kOnGpu, kSwapped };

struct RequestState {
  InferenceRequest request;
  Phase phase = Phase::kQueued;
  std::int64_t prefill_done = 0;
  std::int64_t generated = 0;
  KvLocation kv_location = KvLocation::kNone;
  std::optional<Seconds> first_token_time;
  std::optional<Seconds> finish_time;
  std::vector<Seconds> token_emit_times;

  RequestState() = default;
  // A cached prefix counts as already prefilled and starts out swapped.
  explicit RequestState(InferenceRequest r);

  const std::string& id() const { return request.request_id; }
  std::int64_t kv_tokens() const { return prefill_done + generated; }
  std::int64_t remaining_prefill() const { return request.prompt_tokens - prefill_done; }
  std::int64_t projected_tokens() const {
    return request.prompt_tokens + request.output_tokens;
  }
  bool in_decode() const { return prefill_done == request.prompt_tokens; }
  bool finished() const { return phase == Phase::kFinished; }
};

struct BatchPlan {
  std::vector<std::string> decode_slots;
  std::vector<std::pair<std::string, std::int64_t>> prefill_allocs;
  std::int64_t total_tokens = 0;

  bool empty() const { return total_tokens == 0; }
  bool contains(std::string_view id) const;
  std::int64_t prefill_tokens() const;
  bool operator==(const BatchPlan&) const = default;
};

// Scheduling view of one model instance. Capacity and per-token size are
// summed over tensor-parallel shards.
struct SchedulerState {
  std::vector<RequestState*> runnable;  // arrival order, none finished
  Bytes kv_capacity = 0;
  Bytes kv_bytes_per_token = 1;
  int k = 8;
  int iterations_since_reschedule = 0;
};

// Least-service partition of a b-token batch. Prefill prompts (least
// prefill_done first) take up to p = b - d tokens and claim memory before
// decode prompts (least generated first) fill up to d slots; unused decode
// slots go to the prefill prompts already chosen, then to the next ones in
// line. A prompt whose KV would not fit is skipped and filling continues
// with the next one.
BatchPlan partition_batch(const SchedulerState& state, int b);

struct RescheduleResult {
  BatchPlan plan;
  std::vector<std::string> page_out;
  std::vector<std::string> page_in;
};

// Replans over every runnable prompt and resets the counter. Resident prompts
// outside the plan are paged out only when the plan and a window of decode
// growth leave no room for them, most served first.
RescheduleResult reschedule(SchedulerState& state, int b);

// Admission-controlled continuous batching. Admits queued or swapped prompts
// in arrival order while their full projection fits and marks them resident;
// stops at the first one that does not fit.
BatchPlan fcfs_step(SchedulerState& state, int b);
// Same, also reporting admitted prompts whose KV must be paged back in.
BatchPlan fcfs_step(SchedulerState& state, int b, std::vector<std::string>* paged_in);

// KV bytes reserved by resident prompts under FCFS admission.
Bytes fcfs_reserved(const SchedulerState& state);

// True when every runnable prompt's full projection fits at once.
bool memory_uncontended(const SchedulerState& state);

// Tokens of KV one iteration of `plan` adds: every planned token plus the
// first output token of each prompt whose prefill completes.
std::int64_t kv_growth(const BatchPlan& plan,
                       const std::unordered_map<std::string, RequestState*>& by_id);

// Applies one iteration of `plan` finishing at `end`. Returns the ids that
// finished.
std::vector<std::string> apply_plan(const BatchPlan& plan,
                                    const std::unordered_map<std::string, RequestState*>& by_id,
                                    Seconds end);

enum class Policy { kFcfs, kFcfsAqua, kCfsDram, kCfsAqua, kOffloadDram, kOffloadAqua, kFcfsAutoscale };

// Throws ConfigError listing the valid names.
Policy parse_policy(std::string_view name);
std::string_view to_string(Policy policy);
std::vector<std::string> policy_names();
bool uses_aqua(Policy policy);
bool is_cfs(Policy policy);
bool is_offload(Policy policy);

enum class PageDirection { kOut, kIn };

using SwapHome = Location;

// Time to move one shard's share of `request`'s KV between `consumer_gpu` and
// `home`. With gather on, the 2 * num_layers buffers are packed into one
// contiguous transfer (charged a local HBM pass on each side).
Seconds page_cost(const RequestState& request, PageDirection direction, const SwapHome& home,
                  const GpuId& consumer_gpu, const ServerTopology& topo,
                  const ModelProfile& profile, bool gather = true);

Seconds page_cost_bytes(double bytes, PageDirection direction, const SwapHome& home,
                        const GpuId& consumer_gpu, const ServerTopology& topo, int num_layers,
                        bool gather);

enum class ActivePolicy { kCfs, kFcfs };

// CFS while every swap tensor sits on a remote GPU; FCFS as soon as any of
// them lives in DRAM.
ActivePolicy fallback_policy(const std::vector<SwapHome>& tensor_locations);

}  // namespace aquasim
