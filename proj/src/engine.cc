// Copyright 2026 The aquasim Authors.
// SPDX-License-Identifier: Apache-2.0

#include "aquasim/engine.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <deque>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <queue>
#include <set>
#include <sstream>

#include <json.hpp>

namespace aquasim {

void SchedulerOptions::validate() const {
  if (k < 1) throw ConfigError("scheduler.k", "must be >= 1");
  if (!(overlap_fraction >= 0 && overlap_fraction <= 1)) {
    throw ConfigError("scheduler.overlap_fraction", "must be in [0, 1]");
  }
  if (poll_interval < 1) throw ConfigError("scheduler.poll_interval", "must be >= 1");
  if (offload_batch < 1) throw ConfigError("scheduler.offload_batch", "must be >= 1");
}

void AutoscaleOptions::validate() const {
  if (!(window > 0)) throw ConfigError("autoscale.window", "must be positive");
  if (!(provision_delay >= 0)) throw ConfigError("autoscale.provision_delay", "must be >= 0");
  if (!(margin >= 0)) throw ConfigError("autoscale.margin", "must be >= 0");
  if (!(steady_rps > 0)) throw ConfigError("autoscale.steady_rps", "must be positive");
}

void SimConfig::validate() const {
  if (!(timeline_period > 0)) throw ConfigError("timeline_period", "must be positive");
  if (!(throughput_bin > 0)) throw ConfigError("throughput_bin", "must be positive");
  if (!(max_time > 0)) throw ConfigError("max_time", "must be positive");
  std::set<std::string> ids;
  std::set<GpuId> used;
  for (std::size_t i = 0; i < instances.size(); ++i) {
    const InstanceConfig& in = instances[i];
    const std::string f = "instances[" + std::to_string(i) + "]";
    if (in.instance_id.empty()) throw ConfigError(f + ".id", "must not be empty");
    if (in.instance_id.find_first_of("/,\n") != std::string::npos) {
      throw ConfigError(f + ".id", "must not contain '/', ',' or newlines");
    }
    if (!ids.insert(in.instance_id).second) {
      throw ConfigError(f + ".id", "duplicate instance id " + in.instance_id);
    }
    if (static_cast<int>(in.gpus.size()) != in.profile.num_shards) {
      throw ConfigError(f + ".gpus", "needs one GPU per shard (" +
                                         std::to_string(in.profile.num_shards) + ")");
    }
    for (const auto& g : in.gpus) {
      if (!topology.has_gpu(g)) throw ConfigError(f + ".gpus", "unknown gpu " + g);
      if (!used.insert(g).second) throw ConfigError(f + ".gpus", "gpu " + g + " is already used");
      try {
        in.profile.validate(topology.gpu(g).hbm_capacity);
      } catch (const DomainError& e) {
        throw ConfigError(f + ".model", e.what());
      }
    }
    in.sched.validate();
    if (in.swap_bytes_per_shard < 0) throw ConfigError(f + ".swap_bytes_per_shard", "must be >= 0");
    if (in.is_llm()) {
      check_trace(in.trace);
      if (in.policy == Policy::kFcfsAutoscale) in.autoscale.validate();
      const Bytes pool = in.profile.kv_pool_per_shard(topology.gpu(in.gpus.front()).hbm_capacity);
      if (in.offer.mode != OfferMode::kNone &&
          (in.offer.bytes_per_shard <= 0 || in.offer.bytes_per_shard > pool)) {
        throw ConfigError(f + ".offer.bytes", "must be in (0, KV pool] for an LLM producer");
      }
      if (in.offer.mode == OfferMode::kMonitored) in.offer.monitor.validate();
    } else {
      if (in.batch_size < 1) throw ConfigError(f + ".batch_size", "must be >= 1");
      if (in.offer.mode == OfferMode::kMonitored) {
        throw ConfigError(f + ".offer.mode", "monitored offers need an LLM producer");
      }
      const Bytes hbm = topology.gpu(in.gpus.front()).hbm_capacity;
      if (in.profile.batch.memory(in.batch_size) > hbm) {
        throw ConfigError(f + ".batch_size", "batch does not fit in HBM");
      }
      if (in.offer.bytes_per_shard < 0 ||
          in.offer.bytes_per_shard > hbm - in.profile.batch.memory(in.batch_size)) {
        throw ConfigError(f + ".offer.bytes", "exceeds what the batch leaves free");
      }
    }
  }
  std::set<GpuId> producers;
  std::set<GpuId> consumers;
  for (const auto& [p, c] : pairings) {
    if (!topology.has_gpu(p) || !topology.has_gpu(c)) {
      throw ConfigError("pairings", "unknown gpu in pair (" + p + ", " + c + ")");
    }
    if (p == c) throw ConfigError("pairings", "a GPU cannot pair with itself");
    if (!producers.insert(p).second) throw ConfigError("pairings", "producer " + p + " paired twice");
    if (!consumers.insert(c).second) throw ConfigError("pairings", "consumer " + c + " paired twice");
  }
}

const InstanceReport& MetricsReport::instance(std::string_view id) const {
  for (const auto& r : instances) {
    if (r.instance_id == id) return r;
  }
  throw ConfigError("instance", "no instance named " + std::string(id));
}

Trace autoscale_filter(const Trace& trace, const AutoscaleOptions& opts, std::int64_t* redirected) {
  opts.validate();
  Trace out;
  std::int64_t diverted = 0;
  if (trace.empty()) {
    if (redirected) *redirected = 0;
    return out;
  }
  const double steady = opts.steady_rps * opts.window;
  const double trigger = steady * (1 + opts.margin);
  const Seconds end = trace.back().arrival;
  const auto windows = static_cast<std::size_t>(end / opts.window) + 1;
  std::vector<std::int64_t> counts(windows, 0);
  for (const auto& r : trace) {
    ++counts[std::min(windows - 1, static_cast<std::size_t>(r.arrival / opts.window))];
  }
  // Redirect episodes: [start time, requests to divert].
  std::vector<std::pair<Seconds, std::int64_t>> episodes;
  for (std::size_t w = 0; w < windows; ++w) {
    if (counts[w] <= trigger) continue;
    double excess = 0;
    std::size_t j = w;
    while (j < windows && counts[j] > steady) {
      excess += counts[j] - steady;
      ++j;
    }
    const Seconds notified = (w + 1) * opts.window;
    episodes.emplace_back(notified + opts.provision_delay, std::llround(excess));
    w = j;
  }
  std::size_t e = 0;
  std::int64_t left = 0;
  for (const auto& r : trace) {
    while (e < episodes.size() && r.arrival >= episodes[e].first) {
      left += episodes[e].second;
      ++e;
    }
    if (left > 0) {
      --left;
      ++diverted;
      continue;
    }
    out.push_back(r);
  }
  if (redirected) *redirected = diverted;
  return out;
}

namespace {

constexpr Seconds kInf = std::numeric_limits<Seconds>::infinity();

struct SwapSlot {
  bool in_tensor = false;
  Bytes per_shard = 0;
};

struct LlmInstance {
  const InstanceConfig* cfg = nullptr;
  std::size_t index = 0;
  std::vector<RequestState> reqs;
  std::unordered_map<std::string, RequestState*> by_id;
  std::size_t next_arrival = 0;
  std::vector<RequestState*> runnable;
  std::vector<RequestState*> active;  // CFS window members
  bool cfs_mode = false;
  bool need_reschedule = true;
  int since_reschedule = 0;
  int since_poll = 0;
  bool busy = false;
  bool done = false;
  Seconds next_wake = kInf;
  Seconds prev_iter_start = -kInf;

  // Swap space, per shard.
  std::vector<std::string> tensors;
  bool has_producer = false;  // some shard is paired with a producer
  Bytes tensor_capacity = 0;
  Bytes tensor_used = 0;
  Bytes prefix_per_shard = 0;
  bool prefix_in_tensor = false;
  std::map<std::string, SwapSlot> swapped;
  Bytes dram_per_shard = 0;  // swapped KV living in DRAM
  Bytes offload_overflow = 0;  // per shard, offload policies

  // Producer side.
  std::optional<SteadyStateMonitor> monitor;
  std::deque<Seconds> recent_arrivals;

  InstanceReport report;
};

struct BatchInstance {
  const InstanceConfig* cfg = nullptr;
  std::size_t index = 0;
  Seconds prev_iter_start = -kInf;
  std::vector<std::pair<Seconds, int>> completions;
  InstanceReport report;
};

struct TransferWindow {
  Seconds start = -kInf;
  Seconds end = -kInf;
};

class Simulation {
 public:
  explicit Simulation(const SimConfig& cfg) : cfg_(cfg), coord_(cfg.topology) {}

  MetricsReport run();

 private:
  struct Event {
    Seconds time;
    std::uint64_t seq;
    std::function<void()> fn;
  };
  struct Later {
    bool operator()(const Event& a, const Event& b) const {
      return a.time != b.time ? a.time > b.time : a.seq > b.seq;
    }
  };

  void at(Seconds t, std::function<void()> fn) {
    if (t < now_) throw ConsistencyError("event scheduled in the past");
    events_.push({t, seq_++, std::move(fn)});
  }

  // Setup.
  void setup();
  void setup_offers();
  void setup_consumers();

  // LLM instances.
  void wake(LlmInstance& in, Seconds t);
  void step(LlmInstance& in);
  void finish_iteration(LlmInstance& in, BatchPlan plan, Seconds start);
  void admit_arrivals(LlmInstance& in);
  Bytes kv_capacity(const LlmInstance& in) const;
  Bytes kv_pool_total(const LlmInstance& in) const;
  SchedulerState state_of(LlmInstance& in) const;
  Bytes resident_kv(const LlmInstance& in) const;  // whole instance
  BatchPlan offload_plan(LlmInstance& in);
  Seconds offload_transfer(LlmInstance& in, const BatchPlan& plan, Seconds* wait_until);
  Seconds page_transfer(LlmInstance& in, const std::vector<std::string>& out,
                        const std::vector<std::string>& in_ids, Seconds* wait_until);
  Location tensor_home(const std::string& tensor_id, Seconds* wait_until) const;
  bool sharing_active(const std::vector<GpuId>& gpus, Seconds prev_start) const;
  void mark_transfer(const GpuId& gpu, Seconds start, Seconds end);
  void check_dram(const GpuId& gpu);
  void record_metrics(LlmInstance& in, const RequestState& r);
  void poll(LlmInstance& in);
  void monitor_tick(LlmInstance& in);
  std::int64_t queued(const LlmInstance& in) const;

  // Batch instances.
  void batch_step(BatchInstance& b);

  // Migrations and wakeups.
  void start_migration(const std::string& tensor_id, const Location& dest);
  void complete_migration(const std::string& tensor_id, const Location& from);
  void wake_idle();
  void wake_consumers_of(const GpuId& producer);

  void sample_timeline();
  Bytes free_bytes(const GpuId& gpu) const;
  void log(const std::string& kind, const GpuId& gpu, const std::string& detail) {
    report_.events.push_back({now_, kind, gpu, detail});
  }
  void instance_finished();
  bool all_done() const { return llm_left_ == 0; }

  const SimConfig& cfg_;
  Coordinator coord_;
  std::priority_queue<Event, std::vector<Event>, Later> events_;
  std::uint64_t seq_ = 0;
  Seconds now_ = 0;
  std::vector<std::unique_ptr<LlmInstance>> llms_;
  std::vector<std::unique_ptr<BatchInstance>> batches_;
  std::map<GpuId, LlmInstance*> llm_on_gpu_;
  std::map<GpuId, BatchInstance*> batch_on_gpu_;
  std::map<GpuId, TransferWindow> transfers_;
  std::map<GpuId, GpuId> producer_of_;  // consumer -> producer
  std::size_t llm_left_ = 0;
  Seconds last_finish_ = 0;
  MetricsReport report_;
};

Bytes Simulation::kv_pool_total(const LlmInstance& in) const {
  const ModelProfile& p = in.cfg->profile;
  Bytes pool = std::numeric_limits<Bytes>::max();
  for (const auto& g : in.cfg->gpus) {
    pool = std::min(pool, p.kv_pool_per_shard(cfg_.topology.gpu(g).hbm_capacity));
  }
  return pool * p.num_shards;
}

Bytes Simulation::kv_capacity(const LlmInstance& in) const {
  const ModelProfile& p = in.cfg->profile;
  Bytes cap = std::numeric_limits<Bytes>::max();
  for (const auto& g : in.cfg->gpus) {
    const Bytes pool = p.kv_pool_per_shard(cfg_.topology.gpu(g).hbm_capacity);
    cap = std::min(cap, pool - coord_.offer_state(g).offered);
  }
  return std::max<Bytes>(0, cap) * p.num_shards;
}

SchedulerState Simulation::state_of(LlmInstance& in) const {
  SchedulerState st;
  st.runnable = in.runnable;
  st.kv_capacity = kv_capacity(in);
  st.kv_bytes_per_token = in.cfg->profile.kv_bytes_per_token;
  st.k = in.cfg->sched.k;
  st.iterations_since_reschedule = in.since_reschedule;
  return st;
}

Bytes Simulation::resident_kv(const LlmInstance& in) const {
  const Policy pol = in.cfg->policy;
  const Bytes kv = in.cfg->profile.kv_bytes_per_token;
  Bytes total = 0;
  if (is_offload(pol)) {
    for (const RequestState* r : in.runnable) {
      if (r->kv_location == KvLocation::kOnGpu) total += r->kv_tokens() * kv;
    }
    return std::min(total, kv_capacity(in));
  }
  const bool reserve = !is_cfs(pol) || !in.cfs_mode;
  for (const RequestState* r : in.runnable) {
    if (r->kv_location != KvLocation::kOnGpu) continue;
    total += (reserve ? r->projected_tokens() : r->kv_tokens()) * kv;
  }
  return total;
}

std::int64_t Simulation::queued(const LlmInstance& in) const {
  std::int64_t n = 0;
  for (const RequestState* r : in.runnable) {
    if (r->phase == Phase::kQueued && r->kv_location != KvLocation::kOnGpu) ++n;
  }
  return n;
}

Bytes Simulation::free_bytes(const GpuId& gpu) const {
  const OfferState o = coord_.offer_state(gpu);
  Bytes used = o.allocated + o.inbound;
  const Bytes hbm = cfg_.topology.gpu(gpu).hbm_capacity;
  if (auto it = llm_on_gpu_.find(gpu); it != llm_on_gpu_.end()) {
    const LlmInstance& in = *it->second;
    const ModelProfile& p = in.cfg->profile;
    used += p.weights_bytes_per_shard + p.reserved_bytes_per_shard + resident_kv(in) / p.num_shards;
  } else if (auto b = batch_on_gpu_.find(gpu); b != batch_on_gpu_.end()) {
    used += b->second->cfg->profile.batch.memory(b->second->cfg->batch_size);
  }
  return hbm - used;
}

void Simulation::setup() {
  cfg_.validate();
  for (std::size_t i = 0; i < cfg_.instances.size(); ++i) {
    const InstanceConfig& ic = cfg_.instances[i];
    if (ic.is_llm()) {
      auto in = std::make_unique<LlmInstance>();
      in->cfg = &ic;
      in->index = i;
      in->report.instance_id = ic.instance_id;
      in->report.model_id = ic.profile.model_id;
      in->report.policy = std::string(to_string(ic.policy));
      Trace trace = ic.trace;
      if (ic.policy == Policy::kFcfsAutoscale) {
        trace = autoscale_filter(ic.trace, ic.autoscale, &in->report.redirected);
      }
      in->reqs.reserve(trace.size());
      for (auto& r : trace) {
        in->reqs.emplace_back(r);
        in->prefix_per_shard =
            std::max(in->prefix_per_shard,
                     kv_bytes(ic.profile, r.cached_prefix_tokens) / ic.profile.num_shards);
      }
      for (auto& r : in->reqs) in->by_id[r.id()] = &r;
      if (in->reqs.empty()) {
        in->done = true;
      } else {
        ++llm_left_;
      }
      if (ic.offer.mode == OfferMode::kMonitored) in->monitor.emplace(ic.offer.monitor);
      for (const auto& g : ic.gpus) llm_on_gpu_[g] = in.get();
      llms_.push_back(std::move(in));
    } else {
      auto b = std::make_unique<BatchInstance>();
      b->cfg = &ic;
      b->index = i;
      b->report.instance_id = ic.instance_id;
      b->report.model_id = ic.profile.model_id;
      b->report.policy = "batch";
      batch_on_gpu_[ic.gpus.front()] = b.get();
      batches_.push_back(std::move(b));
    }
  }
  for (const auto& [p, c] : cfg_.pairings) producer_of_[c] = p;
  setup_offers();
  setup_consumers();
}

void Simulation::setup_offers() {
  for (const auto& b : batches_) {
    const InstanceConfig& ic = *b->cfg;
    if (ic.offer.mode != OfferMode::kStatic) continue;
    const GpuId& g = ic.gpus.front();
    Bytes bytes = ic.offer.bytes_per_shard;
    if (bytes == 0) bytes = cfg_.topology.gpu(g).hbm_capacity - ic.profile.batch.memory(ic.batch_size);
    if (bytes > 0) {
      coord_.offer(g, bytes);
      log("offer", g, std::to_string(bytes));
    }
  }
  for (const auto& in : llms_) {
    if (in->cfg->offer.mode != OfferMode::kStatic) continue;
    for (const auto& g : in->cfg->gpus) {
      coord_.offer(g, in->cfg->offer.bytes_per_shard);
      log("offer", g, std::to_string(in->cfg->offer.bytes_per_shard));
    }
  }
}

void Simulation::setup_consumers() {
  for (const auto& in : llms_) {
    const InstanceConfig& ic = *in->cfg;
    if (!uses_aqua(ic.policy)) continue;
    for (const auto& g : ic.gpus) {
      std::optional<GpuId> producer;
      if (auto it = producer_of_.find(g); it != producer_of_.end()) producer = it->second;
      coord_.register_consumer(g, producer);
      in->has_producer = in->has_producer || producer.has_value();
    }
    in->tensor_capacity = ic.swap_bytes_per_shard;
    if (ic.swap_bytes_per_shard > 0) {
      for (const auto& g : ic.gpus) {
        AllocationResult a;
        try {
          a = coord_.allocate(g, ic.swap_bytes_per_shard);
        } catch (const CapacityError& e) {
          throw SimulationAbort(g, now_, e.what());
        }
        in->tensors.push_back(a.tensor_id);
        log("allocate", g, a.tensor_id + " " + a.location.str());
      }
    }
    // The cached prefix lives in the swap tensor when it fits, else in DRAM.
    if (in->prefix_per_shard > 0 && in->prefix_per_shard <= in->tensor_capacity) {
      in->prefix_in_tensor = true;
      in->tensor_used = in->prefix_per_shard;
    }
  }
}

void Simulation::wake(LlmInstance& in, Seconds t) {
  if (in.done || t >= in.next_wake) return;
  in.next_wake = t;
  at(t, [this, &in, t] {
    if (in.next_wake == t) in.next_wake = kInf;
    step(in);
  });
}

void Simulation::admit_arrivals(LlmInstance& in) {
  while (in.next_arrival < in.reqs.size() && in.reqs[in.next_arrival].request.arrival <= now_) {
    RequestState& r = in.reqs[in.next_arrival++];
    in.runnable.push_back(&r);
    in.recent_arrivals.push_back(r.request.arrival);
  }
}

Location Simulation::tensor_home(const std::string& tensor_id, Seconds* wait_until) const {
  const AquaTensor t = coord_.tensor(tensor_id);
  if (t.migration) {
    *wait_until = std::max(*wait_until, t.migration->completes_at);
    return t.migration->dest;
  }
  return t.location;
}

void Simulation::mark_transfer(const GpuId& gpu, Seconds start, Seconds end) {
  TransferWindow& w = transfers_[gpu];
  w.start = std::max(w.start, start);
  w.end = std::max(w.end, end);
}

bool Simulation::sharing_active(const std::vector<GpuId>& gpus, Seconds prev_start) const {
  for (const auto& g : gpus) {
    const OfferState o = coord_.offer_state(g);
    if (o.allocated + o.inbound == 0) continue;
    auto it = transfers_.find(g);
    if (it == transfers_.end()) continue;
    if (it->second.end > prev_start && it->second.start <= now_) return true;
  }
  return false;
}

void Simulation::check_dram(const GpuId& gpu) {
  Bytes used = 0;
  for (const auto& in : llms_) {
    used += (in->dram_per_shard + in->offload_overflow) * in->cfg->profile.num_shards;
    if (!in->prefix_in_tensor) used += in->prefix_per_shard * in->cfg->profile.num_shards;
  }
  for (const auto& t : coord_.all_tensors()) {
    if (t.location.is_dram()) used += t.size;
  }
  if (used > cfg_.topology.dram_capacity()) {
    throw SimulationAbort(gpu, now_, "host DRAM exhausted (" + std::to_string(used) + " bytes)");
  }
}

Seconds Simulation::page_transfer(LlmInstance& in, const std::vector<std::string>& out,
                                  const std::vector<std::string>& in_ids, Seconds* wait_until) {
  const InstanceConfig& ic = *in.cfg;
  const ModelProfile& p = ic.profile;
  const bool gather = ic.sched.gather;
  Seconds total = 0;
  // Shards move their slices in parallel; the slowest shard sets the time.
  auto cost = [&](double bytes, PageDirection dir, bool in_tensor) {
    Seconds worst = 0;
    for (std::size_t s = 0; s < ic.gpus.size(); ++s) {
      Location home = Location::dram();
      if (in_tensor) home = tensor_home(in.tensors[s], wait_until);
      const Seconds c = page_cost_bytes(bytes, dir, home, ic.gpus[s], cfg_.topology, p.num_layers, gather);
      worst = std::max(worst, c);
      if (!home.is_dram()) mark_transfer(home.gpu, now_, *wait_until + c);
    }
    return worst;
  };
  for (const auto& id : out) {
    const RequestState& r = *in.by_id.at(id);
    SwapSlot slot;
    slot.per_shard = kv_bytes(p, r.kv_tokens()) / p.num_shards;
    slot.in_tensor = !in.tensors.empty() && in.tensor_used + slot.per_shard <= in.tensor_capacity;
    if (slot.in_tensor) {
      in.tensor_used += slot.per_shard;
    } else {
      in.dram_per_shard += slot.per_shard;
      check_dram(ic.gpus.front());
    }
    in.swapped[id] = slot;
    total += cost(static_cast<double>(slot.per_shard), PageDirection::kOut, slot.in_tensor);
  }
  for (const auto& id : in_ids) {
    const RequestState& r = *in.by_id.at(id);
    auto it = in.swapped.find(id);
    if (it == in.swapped.end()) {
      // Never paged out: this is a cached prefix being loaded.
      const double bytes = static_cast<double>(kv_bytes(p, r.kv_tokens())) / p.num_shards;
      total += cost(bytes, PageDirection::kIn, in.prefix_in_tensor);
      continue;
    }
    const SwapSlot slot = it->second;
    in.swapped.erase(it);
    if (slot.in_tensor) {
      in.tensor_used -= slot.per_shard;
    } else {
      in.dram_per_shard -= slot.per_shard;
    }
    total += cost(static_cast<double>(slot.per_shard), PageDirection::kIn, slot.in_tensor);
  }
  Bytes swapped_now = (in.tensor_used - (in.prefix_in_tensor ? in.prefix_per_shard : 0)) +
                      in.dram_per_shard;
  in.report.peak_swap_bytes = std::max(in.report.peak_swap_bytes, swapped_now * p.num_shards);
  return total;
}

BatchPlan Simulation::offload_plan(LlmInstance& in) {
  const int b = in.cfg->profile.chunk_size;
  int admitted = 0;
  for (RequestState* r : in.runnable) {
    if (admitted == in.cfg->sched.offload_batch) break;
    r->kv_location = KvLocation::kOnGpu;
    ++admitted;
  }
  BatchPlan plan;
  std::int64_t budget = b;
  for (const RequestState* r : in.runnable) {
    if (budget == 0) break;
    if (r->kv_location == KvLocation::kOnGpu && r->in_decode()) {
      plan.decode_slots.push_back(r->id());
      --budget;
    }
  }
  for (const RequestState* r : in.runnable) {
    if (budget == 0) break;
    if (r->kv_location == KvLocation::kOnGpu && !r->in_decode()) {
      const std::int64_t t = std::min(budget, r->remaining_prefill());
      plan.prefill_allocs.emplace_back(r->id(), t);
      budget -= t;
    }
  }
  plan.total_tokens = b - budget;
  return plan;
}

Seconds Simulation::offload_transfer(LlmInstance& in, const BatchPlan& plan, Seconds* wait_until) {
  const InstanceConfig& ic = *in.cfg;
  const ModelProfile& p = ic.profile;
  const Bytes cap = kv_capacity(in) / p.num_shards;
  Bytes before = 0;
  for (const RequestState* r : in.runnable) {
    if (r->kv_location == KvLocation::kOnGpu) before += kv_bytes(p, r->kv_tokens());
  }
  before /= p.num_shards;
  const Bytes after = before + kv_bytes(p, plan.total_tokens) / p.num_shards;
  const Bytes over_before = std::max<Bytes>(0, before - cap);
  const Bytes over_after = std::max<Bytes>(0, after - cap);
  // The first tensor_capacity bytes of overflow live in the swap tensor.
  const Bytes tcap = in.tensors.empty() ? 0 : in.tensor_capacity;
  const Bytes read_t = std::min(over_before, tcap);
  const Bytes read_d = over_before - read_t;
  const Bytes write_t = std::min(over_after, tcap) - read_t;
  const Bytes write_d = (over_after - over_before) - write_t;

  Seconds worst = 0;
  for (std::size_t s = 0; s < ic.gpus.size(); ++s) {
    const GpuId& g = ic.gpus[s];
    Seconds c = 0;
    if (read_t + write_t > 0) {
      const Location home = tensor_home(in.tensors[s], wait_until);
      if (home.is_dram()) {
        if (read_t > 0) c += transfer_time(LinkPath::dram_to_gpu(g), read_t, p.num_layers, cfg_.topology);
        if (write_t > 0) c += transfer_time(LinkPath::gpu_to_dram(g), write_t, p.num_layers, cfg_.topology);
      } else {
        if (read_t > 0) c += transfer_time(LinkPath::gpu_to_gpu(home.gpu, g), read_t, p.num_layers, cfg_.topology);
        if (write_t > 0) c += transfer_time(LinkPath::gpu_to_gpu(g, home.gpu), write_t, p.num_layers, cfg_.topology);
        mark_transfer(home.gpu, now_, *wait_until + c);
      }
    }
    if (read_d > 0) c += transfer_time(LinkPath::dram_to_gpu(g), read_d, p.num_layers, cfg_.topology);
    if (write_d > 0) c += transfer_time(LinkPath::gpu_to_dram(g), write_d, p.num_layers, cfg_.topology);
    worst = std::max(worst, c);
  }
  in.offload_overflow = std::max<Bytes>(0, over_after - tcap);
  check_dram(ic.gpus.front());
  in.report.peak_swap_bytes = std::max(in.report.peak_swap_bytes, over_after * p.num_shards);
  return worst;
}

void Simulation::step(LlmInstance& in) {
  if (in.busy || in.done) return;
  admit_arrivals(in);
  const InstanceConfig& ic = *in.cfg;
  const ModelProfile& p = ic.profile;
  const int b = p.chunk_size;
  if (in.runnable.empty()) {
    if (in.next_arrival < in.reqs.size()) wake(in, in.reqs[in.next_arrival].request.arrival);
    return;
  }

  SchedulerState st = state_of(in);
  BatchPlan plan;
  std::vector<std::string> page_out;
  std::vector<std::string> page_in;
  const Policy pol = ic.policy;

  if (is_offload(pol)) {
    plan = offload_plan(in);
  } else if (!is_cfs(pol)) {
    plan = fcfs_step(st, b, &page_in);
  } else {
    std::vector<Location> homes;
    for (const auto& id : in.tensors) {
      const AquaTensor t = coord_.tensor(id);
      homes.push_back(t.migration && t.migration->dest.is_dram() ? Location::dram() : t.location);
    }
    // Without a producer the tensors never leave DRAM and the instance is
    // plain CFS with DRAM paging.
    const bool fallback = pol == Policy::kCfsAqua && ic.sched.fcfs_fallback && in.has_producer &&
                          fallback_policy(homes) == ActivePolicy::kFcfs;
    if (fallback || memory_uncontended(st)) {
      in.cfs_mode = false;
      in.active.clear();
      // Leaving CFS can find more resident projection than fits; preempt the
      // latest arrivals until admission holds again.
      while (fcfs_reserved(st) > st.kv_capacity) {
        RequestState* victim = nullptr;
        for (RequestState* r : st.runnable) {
          if (r->kv_location == KvLocation::kOnGpu) victim = r;
        }
        if (victim->kv_tokens() > 0) {
          victim->kv_location = KvLocation::kSwapped;
          page_out.push_back(victim->id());
        } else {
          victim->kv_location = KvLocation::kNone;
        }
      }
      plan = fcfs_step(st, b, &page_in);
    } else {
      bool full = !in.cfs_mode || in.need_reschedule || in.since_reschedule >= ic.sched.k;
      if (!full) {
        SchedulerState win = st;
        win.runnable.clear();
        for (RequestState* r : in.active) {
          if (!r->finished()) win.runnable.push_back(r);
        }
        plan = partition_batch(win, b);
        Bytes need = kv_growth(plan, in.by_id) * p.kv_bytes_per_token;
        for (const RequestState* r : win.runnable) need += r->kv_tokens() * p.kv_bytes_per_token;
        if (plan.empty() || need > st.kv_capacity) full = true;
      }
      if (full) {
        RescheduleResult r = reschedule(st, b);
        plan = std::move(r.plan);
        page_out = std::move(r.page_out);
        page_in = std::move(r.page_in);
        in.cfs_mode = true;
        in.need_reschedule = false;
        in.since_reschedule = 0;
        ++in.report.reschedules;
        in.active.clear();
        for (RequestState* q : in.runnable) {
          if (q->kv_location == KvLocation::kOnGpu) in.active.push_back(q);
        }
      }
    }
  }

  if (plan.empty()) {
    // Nothing fits. With no offer outstanding nothing will ever change.
    if (kv_capacity(in) == kv_pool_total(in)) {
      const RequestState* head = in.runnable.front();
      throw SimulationAbort(ic.gpus.front(), now_,
                            ic.instance_id + ": request " + head->id() + " needs " +
                                std::to_string(kv_bytes(p, head->projected_tokens())) +
                                " bytes of KV, capacity " + std::to_string(kv_capacity(in)));
    }
    if (in.next_arrival < in.reqs.size()) wake(in, in.reqs[in.next_arrival].request.arrival);
    return;
  }

  Seconds wait_until = now_;
  Seconds wire = 0;
  if (is_offload(pol)) {
    wire = offload_transfer(in, plan, &wait_until);
  } else if (!page_out.empty() || !page_in.empty()) {
    wire = page_transfer(in, page_out, page_in, &wait_until);
  }
  const Seconds paging = wire * (1 - ic.sched.overlap_fraction);
  const Seconds compute = iteration_time(plan.prefill_tokens(),
                                         static_cast<std::int64_t>(plan.decode_slots.size()), p);
  const Seconds impact = producer_impact(p, sharing_active(ic.gpus, in.prev_iter_start));
  const Seconds start = wait_until;
  const Seconds end = start + paging + compute + impact;

  in.report.paging_time += paging;
  in.report.transfer_time += wire;
  in.report.compute_time += compute + impact;
  in.prev_iter_start = start;
  in.busy = true;
  if (cfg_.record_plans) in.report.plans.push_back({start, plan});
  at(end, [this, &in, plan = std::move(plan), start]() mutable {
    finish_iteration(in, std::move(plan), start);
  });
}

void Simulation::finish_iteration(LlmInstance& in, BatchPlan plan, Seconds /*start*/) {
  in.busy = false;
  ++in.report.iterations;
  ++in.since_reschedule;
  ++in.since_poll;
  const std::vector<std::string> done = apply_plan(plan, in.by_id, now_);
  if (!done.empty()) {
    in.need_reschedule = true;
    for (const auto& id : done) {
      RequestState& r = *in.by_id.at(id);
      r.kv_location = KvLocation::kNone;
      record_metrics(in, r);
    }
    std::erase_if(in.runnable, [](const RequestState* r) { return r->finished(); });
    std::erase_if(in.active, [](const RequestState* r) { return r->finished(); });
  }
  for (const auto& g : in.cfg->gpus) {
    const Bytes f = free_bytes(g);
    if (f < 0) {
      throw ConsistencyError("memory conservation violated on " + g + " at t=" + std::to_string(now_));
    }
  }
  const int interval = is_cfs(in.cfg->policy) ? in.cfg->sched.k : in.cfg->sched.poll_interval;
  if (!in.tensors.empty() && in.since_poll >= interval) poll(in);

  if (in.runnable.empty() && in.next_arrival == in.reqs.size()) {
    in.done = true;
    last_finish_ = std::max(last_finish_, now_);
    instance_finished();
    return;
  }
  step(in);
}

void Simulation::record_metrics(LlmInstance& in, const RequestState& r) {
  RequestMetrics m;
  m.request_id = r.id();
  m.arrival = r.request.arrival;
  m.ttft = *r.first_token_time - r.request.arrival;
  m.rct = *r.finish_time - r.request.arrival;
  m.tpot = r.request.output_tokens >= 2
               ? (*r.finish_time - *r.first_token_time) / static_cast<double>(r.request.output_tokens - 1)
               : std::numeric_limits<double>::quiet_NaN();
  m.prompt_tokens = r.request.prompt_tokens;
  m.output_tokens = r.request.output_tokens;
  if (static_cast<std::int64_t>(r.token_emit_times.size()) != r.request.output_tokens ||
      r.prefill_done != r.request.prompt_tokens || m.ttft < 0) {
    throw ConsistencyError("token accounting broken for " + r.id());
  }
  in.report.requests.push_back(std::move(m));
}

void Simulation::poll(LlmInstance& in) {
  in.since_poll = 0;
  for (const auto& g : in.cfg->gpus) {
    for (const MigrationOrder& o : coord_.poll(g)) {
      const AquaTensor t = coord_.tensor(o.tensor_id);
      if (t.migration || t.location == o.dest) continue;
      start_migration(o.tensor_id, o.dest);
    }
  }
}

void Simulation::start_migration(const std::string& tensor_id, const Location& dest) {
  const AquaTensor t = coord_.tensor(tensor_id);
  Seconds d = 0;
  try {
    d = coord_.migrate(tensor_id, dest, now_);
  } catch (const CapacityError&) {
    return;
  }
  log("migrate", t.owner, tensor_id + " " + t.location.str() + " -> " + dest.str());
  if (!t.location.is_dram()) mark_transfer(t.location.gpu, now_, now_ + d);
  if (!dest.is_dram()) mark_transfer(dest.gpu, now_, now_ + d);
  if (dest.is_dram()) check_dram(t.owner);
  const Location from = t.location;
  at(now_ + d, [this, tensor_id, from] { complete_migration(tensor_id, from); });
}

void Simulation::complete_migration(const std::string& tensor_id, const Location& from) {
  bool was_reclaiming = false;
  if (!from.is_dram()) was_reclaiming = coord_.offer_state(from.gpu).reclaiming;
  coord_.complete_migration(tensor_id);
  const AquaTensor t = coord_.tensor(tensor_id);
  log("migrated", t.owner, tensor_id + " at " + t.location.str());
  if (was_reclaiming && !coord_.offer_state(from.gpu).reclaiming) {
    log("reclaim_done", from.gpu, "");
  }
  wake_idle();
}

void Simulation::wake_idle() {
  for (const auto& in : llms_) {
    if (!in->busy && !in->done) wake(*in, now_);
  }
}

void Simulation::wake_consumers_of(const GpuId& producer) {
  for (const auto& [c, p] : producer_of_) {
    if (p != producer) continue;
    auto it = llm_on_gpu_.find(c);
    if (it == llm_on_gpu_.end() || it->second->tensors.empty()) continue;
    LlmInstance* in = it->second;
    // An idle consumer handles the change right away; a busy one at its next
    // poll.
    if (!in->busy) at(now_, [this, in] { if (!in->busy) poll(*in); });
  }
}

void Simulation::monitor_tick(LlmInstance& in) {
  if (all_done()) return;
  const MonitorConfig& mc = in.monitor->config();
  admit_arrivals(in);
  while (!in.recent_arrivals.empty() && in.recent_arrivals.front() <= now_ - mc.rps_window) {
    in.recent_arrivals.pop_front();
  }
  const double window = std::min(mc.rps_window, std::max(now_, mc.period));
  for (const auto& g : in.cfg->gpus) {
    LoadSignal s{g, static_cast<double>(in.recent_arrivals.size()) / window, queued(in), now_};
    coord_.report_load(s);
  }
  LoadSignal s{in.cfg->gpus.front(), static_cast<double>(in.recent_arrivals.size()) / window,
               queued(in), now_};
  switch (in.monitor->observe(s)) {
    case MonitorDecision::kNone:
      break;
    case MonitorDecision::kOffer:
      for (const auto& g : in.cfg->gpus) {
        const Bytes free_kv = kv_capacity(in) / in.cfg->profile.num_shards -
                              resident_kv(in) / in.cfg->profile.num_shards;
        const Bytes bytes = std::min(in.cfg->offer.bytes_per_shard, free_kv);
        if (bytes <= 0) continue;
        try {
          coord_.offer(g, bytes);
          log("offer", g, std::to_string(bytes));
        } catch (const OfferRejected& e) {
          log("offer_rejected", g, e.what());
        }
        wake_consumers_of(g);
      }
      break;
    case MonitorDecision::kReclaim:
      for (const auto& g : in.cfg->gpus) {
        coord_.reclaim(g);
        log("reclaim", g, "");
        if (!coord_.offer_state(g).reclaiming) log("reclaim_done", g, "");
        wake_consumers_of(g);
      }
      wake_idle();
      break;
  }
  at(now_ + mc.period, [this, &in] { monitor_tick(in); });
}

void Simulation::batch_step(BatchInstance& b) {
  if (all_done() || now_ >= cfg_.max_time) return;
  const InstanceConfig& ic = *b.cfg;
  const int n = ic.batch_size;
  const Seconds impact = producer_impact(ic.profile, sharing_active(ic.gpus, b.prev_iter_start));
  b.prev_iter_start = now_;
  const Seconds end = now_ + ic.profile.batch.batch_latency(n) + impact;
  at(end, [this, &b, n] {
    if (all_done() && now_ > last_finish_) return;
    b.completions.emplace_back(now_, n);
    b.report.items_completed += n;
    ++b.report.iterations;
    batch_step(b);
  });
}

void Simulation::instance_finished() {
  --llm_left_;
}

void Simulation::sample_timeline() {
  if (all_done()) return;
  for (const auto& g : cfg_.topology.gpus()) {
    const Bytes f = free_bytes(g.gpu_id);
    if (f < 0) throw ConsistencyError("memory conservation violated on " + g.gpu_id);
    report_.timeline.push_back({now_, g.gpu_id, f});
  }
  for (const auto& in : llms_) in->report.queue.emplace_back(now_, queued(*in));
  at(now_ + cfg_.timeline_period, [this] { sample_timeline(); });
}

std::vector<std::pair<Seconds, double>> bin_counts(const std::vector<std::pair<Seconds, int>>& marks,
                                                   Seconds bin, Seconds end) {
  std::vector<std::pair<Seconds, double>> out;
  if (end <= 0) return out;
  const auto n = static_cast<std::size_t>(std::ceil(end / bin));
  std::vector<double> counts(std::max<std::size_t>(n, 1), 0);
  for (const auto& [t, c] : marks) {
    counts[std::min(counts.size() - 1, static_cast<std::size_t>(t / bin))] += c;
  }
  for (std::size_t i = 0; i < counts.size(); ++i) out.emplace_back(i * bin, counts[i] / bin);
  return out;
}

MetricsReport Simulation::run() {
  setup();
  for (const auto& in : llms_) {
    if (!in->done) wake(*in, in->reqs.front().request.arrival);
    if (in->monitor) at(in->monitor->config().period, [this, p = in.get()] { monitor_tick(*p); });
  }
  for (const auto& b : batches_) at(0, [this, p = b.get()] { batch_step(*p); });
  at(0, [this] { sample_timeline(); });

  while (!events_.empty()) {
    Event e = events_.top();
    events_.pop();
    if (e.time > cfg_.max_time) {
      if (all_done()) break;
      throw SimulationAbort(llms_.empty() ? GpuId{} : llms_.front()->cfg->gpus.front(), e.time,
                            "run did not finish before max_time");
    }
    now_ = e.time;
    e.fn();
  }
  if (!all_done()) {
    for (const auto& in : llms_) {
      if (!in->done) {
        throw SimulationAbort(in->cfg->gpus.front(), now_,
                              in->cfg->instance_id + " stalled with " +
                                  std::to_string(in->runnable.size()) + " runnable requests");
      }
    }
  }
  coord_.check_invariants();

  report_.end_time = llms_.empty() ? now_ : last_finish_;
  std::vector<InstanceReport> reports(cfg_.instances.size());
  for (auto& in : llms_) {
    InstanceReport& r = in->report;
    std::vector<std::pair<Seconds, int>> marks;
    std::vector<double> gaps;
    for (const auto& q : in->reqs) {
      for (std::size_t i = 0; i < q.token_emit_times.size(); ++i) {
        marks.emplace_back(q.token_emit_times[i], 1);
        if (i > 0) gaps.push_back((q.token_emit_times[i] - q.token_emit_times[i - 1]) * 1000.0);
      }
    }
    std::sort(r.requests.begin(), r.requests.end(), [](const auto& a, const auto& b) {
      return a.arrival != b.arrival ? a.arrival < b.arrival : a.request_id < b.request_id;
    });
    r.summary = summarize(r.requests);
    r.tbt_p99_ms = percentile(gaps, 0.99);
    r.throughput = bin_counts(marks, cfg_.throughput_bin, report_.end_time);
    reports[in->index] = std::move(r);
  }
  for (auto& b : batches_) {
    InstanceReport& r = b->report;
    r.throughput = bin_counts(b->completions, cfg_.throughput_bin, report_.end_time);
    if (report_.end_time > 0) r.items_per_second = r.items_completed / report_.end_time;
    reports[b->index] = std::move(r);
  }
  for (auto& r : reports) {
    const InstanceConfig* ic = nullptr;
    for (const auto& c : cfg_.instances) {
      if (c.instance_id == r.instance_id) ic = &c;
    }
    Bytes lowest = std::numeric_limits<Bytes>::max();
    for (const auto& s : report_.timeline) {
      if (std::find(ic->gpus.begin(), ic->gpus.end(), s.gpu) != ic->gpus.end()) {
        lowest = std::min(lowest, s.free_bytes);
      }
    }
    r.min_free_bytes = lowest == std::numeric_limits<Bytes>::max() ? 0 : lowest;
  }
  report_.instances = std::move(reports);
  return std::move(report_);
}

}  // namespace

MetricsReport run(const SimConfig& sim) {
  Simulation s(sim);
  return s.run();
}

double percentile(std::vector<double> values, double q) {
  std::erase_if(values, [](double v) { return std::isnan(v); });
  if (values.empty()) return 0;
  std::sort(values.begin(), values.end());
  const double h = (values.size() - 1) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - lo) * (values[hi] - values[lo]);
}

namespace {

double mean_of(const std::vector<double>& v) {
  double sum = 0;
  std::size_t n = 0;
  for (double x : v) {
    if (std::isnan(x)) continue;
    sum += x;
    ++n;
  }
  return n == 0 ? 0 : sum / n;
}

}  // namespace

std::vector<RequestRow> to_rows(const InstanceReport& report) {
  std::vector<RequestRow> rows;
  for (const auto& r : report.requests) {
    rows.push_back({report.instance_id, r.request_id, r.arrival * 1000.0, r.ttft * 1000.0,
                    r.tpot * 1000.0, r.rct * 1000.0, r.prompt_tokens, r.output_tokens});
  }
  return rows;
}

LatencySummary summarize(const std::vector<RequestRow>& rows) {
  LatencySummary s;
  s.requests = rows.size();
  if (rows.empty()) return s;
  std::vector<double> ttft, tpot, rct;
  double first = std::numeric_limits<double>::infinity();
  double last = -std::numeric_limits<double>::infinity();
  for (const auto& r : rows) {
    ttft.push_back(r.ttft_ms);
    tpot.push_back(r.tpot_ms);
    rct.push_back(r.rct_ms);
    s.output_tokens += r.output_tokens;
    first = std::min(first, r.arrival_ms);
    last = std::max(last, r.arrival_ms + r.rct_ms);
  }
  s.ttft_p50_ms = percentile(ttft, 0.5);
  s.ttft_p99_ms = percentile(ttft, 0.99);
  s.ttft_mean_ms = mean_of(ttft);
  s.tpot_p50_ms = percentile(tpot, 0.5);
  s.tpot_p99_ms = percentile(tpot, 0.99);
  s.tpot_mean_ms = mean_of(tpot);
  s.rct_p50_ms = percentile(rct, 0.5);
  s.rct_p99_ms = percentile(rct, 0.99);
  const double span_s = (last - first) / 1000.0;
  s.throughput_tokens_per_s = span_s > 0 ? s.output_tokens / span_s : 0;
  return s;
}

LatencySummary summarize(const std::vector<RequestMetrics>& requests) {
  InstanceReport tmp;
  tmp.requests = requests;
  return summarize(to_rows(tmp));
}

std::string format_double(double v) {
  if (std::isnan(v)) return "";
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

namespace {

std::size_t llm_count(const MetricsReport& report) {
  std::size_t n = 0;
  for (const auto& r : report.instances) {
    if (r.policy != "batch") ++n;
  }
  return n;
}

}  // namespace

std::string requests_csv(const MetricsReport& report) {
  std::ostringstream out;
  out << "request_id,arrival_ms,ttft_ms,tpot_ms,rct_ms,prompt_tokens,output_tokens\n";
  const bool prefix = llm_count(report) > 1;
  for (const auto& inst : report.instances) {
    for (const auto& r : to_rows(inst)) {
      if (prefix) out << inst.instance_id << '/';
      out << r.request_id << ',' << format_double(r.arrival_ms) << ',' << format_double(r.ttft_ms)
          << ',' << format_double(r.tpot_ms) << ',' << format_double(r.rct_ms) << ','
          << r.prompt_tokens << ',' << r.output_tokens << '\n';
    }
  }
  return out.str();
}

std::vector<RequestRow> parse_requests_csv(const std::string& text) {
  std::vector<RequestRow> out;
  std::istringstream in(text);
  std::string line;
  std::size_t n = 0;
  auto num = [&](const std::string& s) -> double {
    if (s.empty()) return std::numeric_limits<double>::quiet_NaN();
    double v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) {
      throw ConfigError("csv", "line " + std::to_string(n) + ": bad number '" + s + "'");
    }
    return v;
  };
  while (std::getline(in, line)) {
    ++n;
    if (n == 1) {
      if (line != "request_id,arrival_ms,ttft_ms,tpot_ms,rct_ms,prompt_tokens,output_tokens") {
        throw ConfigError("csv", "unexpected header");
      }
      continue;
    }
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) f.push_back(cell);
    if (line.back() == ',') f.emplace_back();
    if (f.size() != 7) throw ConfigError("csv", "line " + std::to_string(n) + ": expected 7 fields");
    std::string instance;
    std::string id = f[0];
    if (auto slash = id.find('/'); slash != std::string::npos) {
      instance = id.substr(0, slash);
      id = id.substr(slash + 1);
    }
    out.push_back({instance, id, num(f[1]), num(f[2]), num(f[3]), num(f[4]),
                   static_cast<std::int64_t>(num(f[5])), static_cast<std::int64_t>(num(f[6]))});
  }
  return out;
}

namespace {

nlohmann::ordered_json summary_json(const LatencySummary& s) {
  nlohmann::ordered_json j;
  j["requests"] = s.requests;
  j["ttft_p50_ms"] = s.ttft_p50_ms;
  j["ttft_p99_ms"] = s.ttft_p99_ms;
  j["ttft_mean_ms"] = s.ttft_mean_ms;
  j["tpot_p50_ms"] = s.tpot_p50_ms;
  j["tpot_p99_ms"] = s.tpot_p99_ms;
  j["tpot_mean_ms"] = s.tpot_mean_ms;
  j["rct_p50_ms"] = s.rct_p50_ms;
  j["rct_p99_ms"] = s.rct_p99_ms;
  j["output_tokens"] = s.output_tokens;
  j["throughput_tokens_per_s"] = s.throughput_tokens_per_s;
  return j;
}

}  // namespace

std::string aggregate_json(const MetricsReport& report) {
  nlohmann::ordered_json root;
  root["end_time_ms"] = report.end_time * 1000.0;
  nlohmann::ordered_json list = nlohmann::ordered_json::array();
  for (const auto& r : report.instances) {
    nlohmann::ordered_json j;
    j["instance_id"] = r.instance_id;
    j["model_id"] = r.model_id;
    j["policy"] = r.policy;
    if (r.policy == "batch") {
      j["items_completed"] = r.items_completed;
      j["items_per_second"] = r.items_per_second;
    } else {
      j["latency"] = summary_json(r.summary);
      j["tbt_p99_ms"] = r.tbt_p99_ms;
      j["iterations"] = r.iterations;
      j["reschedules"] = r.reschedules;
      j["paging_time_ms"] = r.paging_time * 1000.0;
      j["transfer_time_ms"] = r.transfer_time * 1000.0;
      j["compute_time_ms"] = r.compute_time * 1000.0;
      j["peak_swap_bytes"] = r.peak_swap_bytes;
      j["redirected"] = r.redirected;
    }
    j["min_free_bytes"] = r.min_free_bytes;
    list.push_back(std::move(j));
  }
  root["instances"] = std::move(list);
  return root.dump(2) + "\n";
}

std::string timeline_csv(const MetricsReport& report) {
  std::ostringstream out;
  out << "time_ms,gpu_id,free_bytes\n";
  for (const auto& s : report.timeline) {
    out << format_double(s.time * 1000.0) << ',' << s.gpu << ',' << s.free_bytes << '\n';
  }
  return out.str();
}

std::string events_csv(const MetricsReport& report) {
  std::ostringstream out;
  out << "time_ms,kind,gpu_id,detail\n";
  for (const auto& e : report.events) {
    out << format_double(e.time * 1000.0) << ',' << e.kind << ',' << e.gpu << ',' << e.detail << '\n';
  }
  return out.str();
}

std::string throughput_csv(const MetricsReport& report) {
  std::ostringstream out;
  out << "instance_id,bin_start_ms,units_per_s\n";
  for (const auto& r : report.instances) {
    for (const auto& [t, v] : r.throughput) {
      out << r.instance_id << ',' << format_double(t * 1000.0) << ',' << format_double(v) << '\n';
    }
  }
  return out.str();
}

void write_report(const MetricsReport& report, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto put = [&](const char* name, const std::string& body) {
    std::ofstream f(dir / name, std::ios::binary);
    if (!f) throw ConfigError("out", "cannot write " + (dir / name).string());
    f << body;
  };
  put("requests.csv", requests_csv(report));
  put("aggregate.json", aggregate_json(report));
  put("timeline.csv", timeline_csv(report));
  put("events.csv", events_csv(report));
  put("throughput.csv", throughput_csv(report));
}

}  // namespace aquasim
