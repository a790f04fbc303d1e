// Copyright 2026 The aquasim Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "aquasim/engine.h"

namespace aquasim {

struct TraceSpec {
  std::string preset = "sharegpt-like";
  double rate = 1;
  Seconds duration = 300;
  std::optional<std::uint64_t> seed;  // defaults to a value derived from the experiment seed
  std::optional<LengthDistribution> prompt;
  std::optional<LengthDistribution> output;
  Seconds start_offset = 0;  // shifts every arrival

  struct Burst {
    // Either start after this many requests, or at `start` seconds.
    std::optional<std::int64_t> after_requests;
    Seconds start = 0;
    Seconds duration = 60;
    double multiplier = 2;
  };
  std::optional<Burst> burst;

  // A fraction of requests become "cached prefix + fresh suffix" prompts.
  struct CachedPrefix {
    std::int64_t tokens = 0;
    std::int64_t suffix = 256;
    double hit_rate = 0.1;
  };
  std::optional<CachedPrefix> cached_prefix;

  std::string file;  // load from a trace file instead of generating
};

struct ModelSpec {
  std::string id;
  std::string preset;
  int shards = 0;  // 0 keeps the preset default
  std::vector<GpuId> gpus;
  std::string scheduler = "fcfs";
  SchedulerOptions sched;
  double swap_gb = 0;  // per shard, aqua schedulers only
  OfferOptions offer;
  AutoscaleOptions autoscale;  // steady_rps 0 means "trace rate"
  int batch_size = 8;
  std::optional<TraceSpec> trace;

  // Per-model overrides of preset values.
  std::optional<Seconds> t_base;
  std::optional<Seconds> t_token;
  std::optional<double> reserve_gb;
  std::optional<Bytes> kv_bytes_per_token;
  std::optional<Seconds> producer_impact;
};

struct ExperimentConfig {
  std::string name;
  std::string topology = "h100x8";
  std::uint64_t seed = 1;
  std::vector<ModelSpec> models;
  std::vector<std::pair<GpuId, GpuId>> pairings;  // (producer, consumer)
  std::string subject;  // model whose scheduler `compare` varies; default first LLM
  Seconds timeline_period = 1;
  Seconds throughput_bin = 10;
  bool record_plans = false;
};

// Throws ConfigError whose field() is a JSON path such as "models[1].scheduler".
ExperimentConfig parse_experiment(const nlohmann::json& j);
ExperimentConfig load_experiment(const std::filesystem::path& path);
nlohmann::json to_json(const ExperimentConfig& cfg);

Trace build_trace(const TraceSpec& ts, std::uint64_t default_seed, const std::string& id_prefix);
SimConfig build_sim(const ExperimentConfig& cfg);

// Canned setups: burst-cfs, prefill-cache, long-prompt, elasticity.
ExperimentConfig scenario(std::string_view name);
std::vector<std::string> scenario_names();

// Id of the model `compare` and `with_policy` act on.
std::string subject_of(const ExperimentConfig& cfg);
ExperimentConfig with_policy(ExperimentConfig cfg, std::string_view policy);

MetricsReport run_experiment(const ExperimentConfig& cfg);
// Runs and writes the report files into `out`.
MetricsReport run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out);

struct Comparison {
  std::string subject;
  std::vector<std::string> policies;
  std::vector<MetricsReport> reports;
};

// Throws ConfigError for fewer than two policies.
Comparison compare(const ExperimentConfig& cfg, const std::vector<std::string>& policies);
std::string comparison_csv(const Comparison& c);
std::string comparison_text(const Comparison& c);

}  // namespace aquasim
