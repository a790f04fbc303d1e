// Copyright 2026 The aquasim Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "aquasim/aquamem.h"
#include "aquasim/common.h"
#include "aquasim/model.h"
#include "aquasim/sched.h"
#include "aquasim/topology.h"
#include "aquasim/workload.h"

namespace aquasim {

struct SchedulerOptions {
  int k = 8;
  bool gather = true;
  double overlap_fraction = 0;
  // cfs-aqua only: behave as FCFS while any swap tensor sits in DRAM.
  bool fcfs_fallback = true;
  // Iterations between coordinator polls for non-CFS consumers.
  int poll_interval = 8;
  // Prompts an offloading engine keeps in flight.
  int offload_batch = 1;

  void validate() const;
};

// Load-balancer autoscaling baseline: detect on fixed windows, wait for a
// provisioning delay, then divert the burst's excess arrivals to a sink.
struct AutoscaleOptions {
  Seconds window = 5;
  Seconds provision_delay = 60;
  double margin = 0.5;
  double steady_rps = 0;

  void validate() const;
};

enum class OfferMode { kNone, kStatic, kMonitored };

struct OfferOptions {
  OfferMode mode = OfferMode::kNone;
  // Per shard. For batch producers 0 means "everything the batch leaves free".
  Bytes bytes_per_shard = 0;
  MonitorConfig monitor;
};

struct InstanceConfig {
  std::string instance_id;
  ModelProfile profile;
  std::vector<GpuId> gpus;  // one per shard
  Policy policy = Policy::kFcfs;
  SchedulerOptions sched;
  Trace trace;
  // Aqua consumers: swap tensor allocated per shard at start.
  Bytes swap_bytes_per_shard = 0;
  OfferOptions offer;
  AutoscaleOptions autoscale;
  int batch_size = 8;  // non-LLM producers

  bool is_llm() const { return profile.kind == ModelKind::kLlm; }
};

struct SimConfig {
  ServerTopology topology;
  std::vector<InstanceConfig> instances;
  std::vector<std::pair<GpuId, GpuId>> pairings;  // (producer, consumer)
  Seconds timeline_period = 1.0;
  Seconds throughput_bin = 10.0;
  // Safety stop; a run still unfinished here aborts.
  Seconds max_time = 1e6;
  bool record_plans = false;

  void validate() const;
};

struct RequestMetrics {
  std::string request_id;
  Seconds arrival = 0;
  Seconds ttft = 0;
  Seconds tpot = 0;  // NaN for single-token outputs
  Seconds rct = 0;
  std::int64_t prompt_tokens = 0;
  std::int64_t output_tokens = 0;
};

// All latency figures in milliseconds, computed from the millisecond values
// written to the CSV so they can be recomputed bit-for-bit.
struct LatencySummary {
  std::size_t requests = 0;
  double ttft_p50_ms = 0, ttft_p99_ms = 0, ttft_mean_ms = 0;
  double tpot_p50_ms = 0, tpot_p99_ms = 0, tpot_mean_ms = 0;
  double rct_p50_ms = 0, rct_p99_ms = 0;
  std::int64_t output_tokens = 0;
  double throughput_tokens_per_s = 0;
};

struct PlanRecord {
  Seconds start = 0;
  BatchPlan plan;
};

struct InstanceReport {
  std::string instance_id;
  std::string model_id;
  std::string policy;
  std::vector<RequestMetrics> requests;
  LatencySummary summary;
  double tbt_p99_ms = 0;
  std::int64_t iterations = 0;
  std::int64_t reschedules = 0;
  Seconds paging_time = 0;
  Seconds transfer_time = 0;  // wire time before any overlap discount
  Seconds compute_time = 0;
  Bytes peak_swap_bytes = 0;
  Bytes min_free_bytes = 0;  // minimum free HBM over its GPUs and the run
  std::int64_t redirected = 0;
  std::int64_t items_completed = 0;  // non-LLM producers
  double items_per_second = 0;
  std::vector<std::pair<Seconds, double>> throughput;  // (bin start, units/s)
  std::vector<std::pair<Seconds, std::int64_t>> queue;  // (time, queued)
  std::vector<PlanRecord> plans;
};

struct TimelineSample {
  Seconds time = 0;
  GpuId gpu;
  Bytes free_bytes = 0;
};

struct ElasticEvent {
  Seconds time = 0;
  std::string kind;
  GpuId gpu;
  std::string detail;
};

struct MetricsReport {
  std::vector<InstanceReport> instances;
  std::vector<TimelineSample> timeline;
  std::vector<ElasticEvent> events;
  Seconds end_time = 0;

  // Throws ConfigError for an unknown id.
  const InstanceReport& instance(std::string_view id) const;
};

// The autoscaling baseline's view of a trace: arrivals diverted to the sink
// are removed and counted in `redirected`.
Trace autoscale_filter(const Trace& trace, const AutoscaleOptions& opts, std::int64_t* redirected);

// Deterministic discrete-event run. Throws SimulationAbort when KV memory
// cannot be found anywhere or the run cannot finish.
MetricsReport run(const SimConfig& sim);

// Linear interpolation between closest ranks; NaNs are ignored, empty gives 0.
double percentile(std::vector<double> values, double q);

// One CSV row, in the units written to the file.
struct RequestRow {
  std::string instance_id;
  std::string request_id;
  double arrival_ms = 0;
  double ttft_ms = 0;
  double tpot_ms = 0;  // NaN when empty
  double rct_ms = 0;
  std::int64_t prompt_tokens = 0;
  std::int64_t output_tokens = 0;
};

LatencySummary summarize(const std::vector<RequestRow>& rows);
LatencySummary summarize(const std::vector<RequestMetrics>& requests);

// Output formats. Request ids are prefixed "instance/" when the report has
// more than one LLM instance.
std::string requests_csv(const MetricsReport& report);
std::string aggregate_json(const MetricsReport& report);
std::string timeline_csv(const MetricsReport& report);
std::string events_csv(const MetricsReport& report);
std::string throughput_csv(const MetricsReport& report);

// Writes requests.csv, aggregate.json, timeline.csv, events.csv and
// throughput.csv into `dir`.
void write_report(const MetricsReport& report, const std::filesystem::path& dir);

std::vector<RequestRow> to_rows(const InstanceReport& report);
// Parses requests.csv back; the instance id is empty for unprefixed ids.
std::vector<RequestRow> parse_requests_csv(const std::string& text);

// Shortest text that parses back to the same double.
std::string format_double(double v);

}  // namespace aquasim
