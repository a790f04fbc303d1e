// Copyright 2026 The aquasim Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "aquasim/common.h"
#include "aquasim/model.h"
#include "aquasim/placer.h"
#include "aquasim/topology.h"
#include "aquasim/workload.h"

namespace aquasim {

inline constexpr Bytes kProducerThreshold = 10'000'000'000;  // 10 GB

struct SweepSample {
  int batch = 0;
  double throughput = 0;
  Bytes memory = 0;
};

struct BatchSweep {
  int batch = 0;
  Bytes free_bytes = 0;
  bool saturated = true;  // false: hit max_batch first
  std::vector<SweepSample> samples;
};

// Smallest batch b with throughput(b+1) / throughput(b) < 1 + epsilon.
BatchSweep sweep_batch(const ModelProfile& model, const GpuDevice& gpu, int max_batch,
                       double epsilon = 0.05);

struct RateProbe {
  double rps = 0;
  bool pass = false;
  Seconds ttft_p99 = 0;
  Seconds tbt_p99 = 0;
  bool queue_stable = true;
  Bytes min_free = 0;
};

struct RateSearch {
  bool found = false;
  double rps = 0;
  Bytes free_bytes = 0;
  std::vector<RateProbe> probes;  // in the order they were run
  std::string diagnostic;
};

// One FCFS run of `model` on the first GPUs of `topo` at `rps`, judged by
// the SLA: p99 TBT, p99 TTFT, and a queue no longer at the end of the trace
// than at its midpoint.
RateProbe probe_rate(const ModelProfile& model, const ServerTopology& topo, const SlaSpec& sla,
                     const TraceConfig& trace, double rps);

// Binary search over lo, lo+step, ..., hi, then a linear step up while the
// next rate still passes.
RateSearch find_max_rps(const ModelProfile& model, const ServerTopology& topo, const SlaSpec& sla,
                        const TraceConfig& trace, double lo = 1, double hi = 10, double step = 0.5);

// Swap for memory-bound and prefix-cache workloads: every concurrent prompt
// at its longest sequence.
Bytes estimate_static_swap(const ModelProfile& model, std::int64_t concurrent_prompts,
                           std::int64_t max_seq_tokens);

struct BurstSwap {
  double multiplier = 0;
  Bytes peak_swap = 0;
};

// Swap a CFS deployment needs to ride out bursts of each multiplier over
// `steady` (its rate is the sustainable one), burst at burst_start for
// burst_len seconds. Runs cfs-aqua against idle GPUs that lend all their HBM
// when the topology has a spare GPU per shard, cfs-dram otherwise. Peak swap
// is averaged over `seeds` traces (steady.seed, steady.seed + 1, ...).
std::vector<BurstSwap> estimate_burst_swap(const ModelProfile& model, const ServerTopology& topo,
                                           const TraceConfig& steady,
                                           const std::vector<double>& multipliers = {2, 3, 5},
                                           Seconds burst_start = 60, Seconds burst_len = 60,
                                           int seeds = 8);

struct ProducerProfile {
  enum class Kind { kProducer, kConsumer, kNeutral };

  std::string model_id;
  int num_shards = 1;
  Kind kind = Kind::kNeutral;
  Bytes bytes = 0;  // free bytes for producers, swap bytes for consumers
  std::vector<SweepSample> sweep;
  std::vector<RateProbe> probes;
};

std::string_view to_string(ProducerProfile::Kind kind);

// Producer if free >= threshold, neutral otherwise.
ProducerProfile profile_from_free(const std::string& model_id, int shards, Bytes free_bytes,
                                  Bytes threshold = kProducerThreshold);
ProducerProfile consumer_profile(const std::string& model_id, int shards, Bytes swap_bytes);

// Placement entries: R = +free / shards, -swap / shards, or 0 when neutral.
// Throws DomainError if a figure does not split evenly across shards.
std::vector<PlacementModel> classify(const std::vector<ProducerProfile>& profiles);

nlohmann::json to_json(const ProducerProfile& p);
ProducerProfile parse_producer_profile(const nlohmann::json& j);

}  // namespace aquasim
