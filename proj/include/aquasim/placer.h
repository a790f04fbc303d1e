// Copyright 2026 The aquasim Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "aquasim/common.h"

namespace aquasim {

struct PlacementModel {
  std::string model_id;
  int shards = 1;
  // Signed: positive = memory offered, negative = swap needed.
  Bytes r_per_shard = 0;
};

struct PlacementInstance {
  int num_servers = 1;
  int gpus_per_server = 8;
  Bytes gpu_mem = 0;
  std::vector<PlacementModel> models;

  void validate() const;
  int total_shards() const;
  // Global shard indices of each model; models own contiguous ranges.
  std::vector<std::vector<int>> shard_groups() const;
};

struct PlacedShard {
  int model = 0;
  int shard = 0;
  int server = 0;
  int gpu = 0;
};

struct GpuPair {
  int server = 0;
  PlacedShard producer;
  PlacedShard consumer;
};

struct PlacementAssignment {
  std::vector<int> shard_server;  // per global shard
  std::vector<int> shard_gpu;     // per global shard; empty until GPUs are chosen
  std::vector<GpuPair> pairs;
  std::vector<PlacedShard> dram_fallback;  // consumer shards left unpaired
  Bytes objective = 0;

  // One server index per model; -1 if its shards disagree.
  std::vector<int> model_servers(const PlacementInstance& inst) const;
};

struct Feasibility {
  bool ok = true;
  std::vector<std::string> violations;
};

Feasibility feasible(const PlacementInstance& inst, const PlacementAssignment& a);

// max_s(mem_s) + gpu_mem * max_s(eq_s); every shard counts once in both
// terms. Throws DomainError if the server map is infeasible.
Bytes objective(const PlacementInstance& inst, const PlacementAssignment& a);
// Same, from a per-model server vector.
Bytes objective(const PlacementInstance& inst, const std::vector<int>& model_server);

// Servers whose net memory is negative; their consumers fall back to DRAM.
std::vector<int> deficit_servers(const PlacementInstance& inst, const PlacementAssignment& a);

inline constexpr int kExactShardLimit = 24;

// Branch and bound over model-to-server vectors. Optimal; ties go to the
// lexicographically smallest vector. Throws RangeError above kExactShardLimit
// shards and DomainError when nothing fits.
PlacementAssignment solve_exact(const PlacementInstance& inst);

// Greedy by |R| then relocation/swap local search. Deterministic.
PlacementAssignment solve_heuristic(const PlacementInstance& inst);

struct MatchUnit {
  std::string model_id;
  PlacedShard where;
  Bytes r = 0;
};

struct MatchResult {
  std::vector<std::pair<MatchUnit, MatchUnit>> pairs;  // (producer, consumer)
  std::vector<MatchUnit> unpaired_producers;
  std::vector<MatchUnit> unpaired_consumers;
};

// Rank-order pairing: largest supply with largest demand, one to one.
// Units with r == 0 offer nothing and are left out.
MatchResult match_within_server(std::vector<MatchUnit> units);

// Fills shard_gpu (instance order within each server), pairs, dram_fallback
// and objective from shard_server.
void finish_assignment(const PlacementInstance& inst, PlacementAssignment& a);

PlacementInstance parse_placement_instance(const nlohmann::json& j);
nlohmann::json to_json(const PlacementInstance& inst);
nlohmann::json to_json(const PlacementInstance& inst, const PlacementAssignment& a);

}  // namespace aquasim
