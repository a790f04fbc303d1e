// Copyright 2026 The aquasim Authors.
// SPDX-License-Identifier: Apache-2.0

#include "aquasim/profiler.h"

#include <algorithm>
#include <cmath>
#include <map>

#include "aquasim/engine.h"
#include "json_fields.h"

namespace aquasim {

using nlohmann::json;

namespace {

SimConfig single_instance(const ModelProfile& model, const ServerTopology& topo, Policy policy,
                          Trace trace) {
  if (static_cast<int>(topo.gpus().size()) < model.num_shards) {
    throw ConfigError("gpu", model.model_id + " needs " + std::to_string(model.num_shards) +
                                 " GPUs, topology has " + std::to_string(topo.gpus().size()));
  }
  SimConfig sim;
  sim.topology = topo;
  InstanceConfig in;
  in.instance_id = model.model_id;
  in.profile = model;
  for (int i = 0; i < model.num_shards; ++i) in.gpus.push_back(topo.gpus()[i].gpu_id);
  in.policy = policy;
  in.trace = std::move(trace);
  sim.instances.push_back(std::move(in));
  return sim;
}

std::int64_t queue_at(const InstanceReport& r, Seconds t) {
  std::int64_t q = 0;
  for (const auto& [time, n] : r.queue) {
    if (time > t) break;
    q = n;
  }
  return q;
}

Bytes round_to_shards(Bytes b, int shards) { return b - b % shards; }

}  // namespace

BatchSweep sweep_batch(const ModelProfile& model, const GpuDevice& gpu, int max_batch, double epsilon) {
  if (model.kind == ModelKind::kLlm) throw DomainError("sweep_batch: " + model.model_id + " is an LLM");
  if (max_batch < 1) throw DomainError("sweep_batch: max_batch must be >= 1");
  BatchSweep out;
  out.saturated = false;
  out.batch = max_batch;
  for (int b = 1; b <= max_batch; ++b) {
    out.samples.push_back({b, model.batch.throughput(b), model.batch.memory(b)});
    if (b < max_batch && model.batch.throughput(b + 1) / model.batch.throughput(b) < 1 + epsilon) {
      out.batch = b;
      out.saturated = true;
      break;
    }
  }
  out.free_bytes = gpu.hbm_capacity - model.batch.memory(out.batch);
  return out;
}

RateProbe probe_rate(const ModelProfile& model, const ServerTopology& topo, const SlaSpec& sla,
                     const TraceConfig& trace, double rps) {
  sla.validate();
  ModelProfile m = model;
  m.chunk_size = sla.chunk;
  TraceConfig tc = trace;
  tc.rate = rps;
  SimConfig sim = single_instance(m, topo, Policy::kFcfs, generate_trace(tc));
  const MetricsReport rep = run(sim);
  const InstanceReport& r = rep.instances.front();

  RateProbe p;
  p.rps = rps;
  p.ttft_p99 = r.summary.ttft_p99_ms / 1000;
  p.tbt_p99 = r.tbt_p99_ms / 1000;
  p.queue_stable = queue_at(r, tc.duration) <= queue_at(r, tc.duration / 2);
  p.min_free = r.min_free_bytes;
  p.pass = p.tbt_p99 <= sla.tbt_p99_max && p.ttft_p99 <= sla.ttft_max && p.queue_stable;
  return p;
}

RateSearch find_max_rps(const ModelProfile& model, const ServerTopology& topo, const SlaSpec& sla,
                        const TraceConfig& trace, double lo, double hi, double step) {
  if (!(lo > 0) || !(step > 0) || hi < lo) throw DomainError("find_max_rps: need 0 < lo <= hi, step > 0");
  const int n = static_cast<int>(std::floor((hi - lo) / step + 1e-9));
  RateSearch out;
  std::map<int, RateProbe> seen;
  auto pass = [&](int i) {
    auto it = seen.find(i);
    if (it == seen.end()) {
      it = seen.emplace(i, probe_rate(model, topo, sla, trace, lo + i * step)).first;
      out.probes.push_back(it->second);
    }
    return it->second.pass;
  };

  if (!pass(0)) {
    const RateProbe& p = seen.at(0);
    out.diagnostic = model.model_id + " misses the SLA already at " + format_double(lo) +
                     " RPS (ttft p99 " + format_double(p.ttft_p99) + " s, tbt p99 " +
                     format_double(p.tbt_p99) + " s" + (p.queue_stable ? "" : ", queue growing") +
                     "); treat it as a consumer";
    return out;
  }
  int good = 0, bad = n + 1;
  if (pass(n)) {
    good = n;
  } else {
    bad = n;
    while (bad - good > 1) {
      const int mid = good + (bad - good) / 2;
      (pass(mid) ? good : bad) = mid;
    }
  }
  while (good + 1 <= n && pass(good + 1)) ++good;
  out.found = true;
  out.rps = lo + good * step;
  out.free_bytes = seen.at(good).min_free;
  return out;
}

Bytes estimate_static_swap(const ModelProfile& model, std::int64_t concurrent_prompts,
                           std::int64_t max_seq_tokens) {
  if (concurrent_prompts < 0 || max_seq_tokens < 0) throw DomainError("swap estimate: negative size");
  return concurrent_prompts * max_seq_tokens * model.kv_bytes_per_token;
}

std::vector<BurstSwap> estimate_burst_swap(const ModelProfile& model, const ServerTopology& topo,
                                           const TraceConfig& steady,
                                           const std::vector<double>& multipliers,
                                           Seconds burst_start, Seconds burst_len, int seeds) {
  if (seeds < 1) throw DomainError("estimate_burst_swap: seeds must be >= 1");
  const int shards = model.num_shards;
  const auto& gpus = topo.gpus();
  const bool spare = static_cast<int>(gpus.size()) >= 2 * shards;
  std::vector<BurstSwap> out;
  for (double mult : multipliers) {
    Bytes total = 0;
    for (int k = 0; k < seeds; ++k) {
      TraceConfig tc = steady;
      tc.seed = steady.seed + static_cast<std::uint64_t>(k);
      tc.duration = std::max(tc.duration, burst_start + burst_len);
      Trace t = inject_burst(generate_trace(tc), {burst_start, burst_len, mult}, tc);
      SimConfig sim = single_instance(model, topo, spare ? Policy::kCfsAqua : Policy::kCfsDram, std::move(t));
      if (spare) {
        // Idle neighbours lend their whole HBM, so the run measures demand
        // rather than how slow DRAM paging makes the backlog.
        sim.instances[0].swap_bytes_per_shard = gpus[shards].hbm_capacity;
        InstanceConfig host;
        host.instance_id = "spare";
        host.profile = model_preset("llama-8b", "h100");
        host.profile.model_id = "spare";
        host.profile.num_shards = shards;
        host.profile.weights_bytes_per_shard = 0;
        host.profile.reserved_bytes_per_shard = 0;
        host.profile.producer_impact = 0;
        for (int i = 0; i < shards; ++i) {
          host.gpus.push_back(gpus[shards + i].gpu_id);
          sim.pairings.emplace_back(gpus[shards + i].gpu_id, gpus[i].gpu_id);
        }
        host.offer.mode = OfferMode::kStatic;
        host.offer.bytes_per_shard = gpus[shards].hbm_capacity;
        sim.instances.push_back(std::move(host));
      }
      total += run(sim).instance(model.model_id).peak_swap_bytes;
    }
    out.push_back({mult, total / seeds});
  }
  return out;
}

std::string_view to_string(ProducerProfile::Kind kind) {
  switch (kind) {
    case ProducerProfile::Kind::kProducer:
      return "producer";
    case ProducerProfile::Kind::kConsumer:
      return "consumer";
    case ProducerProfile::Kind::kNeutral:
      return "neutral";
  }
  return "neutral";
}

ProducerProfile profile_from_free(const std::string& model_id, int shards, Bytes free_bytes,
                                  Bytes threshold) {
  if (shards < 1) throw DomainError("profile: shards must be >= 1");
  ProducerProfile p;
  p.model_id = model_id;
  p.num_shards = shards;
  if (free_bytes >= threshold) {
    p.kind = ProducerProfile::Kind::kProducer;
    p.bytes = round_to_shards(free_bytes, shards);
  }
  return p;
}

ProducerProfile consumer_profile(const std::string& model_id, int shards, Bytes swap_bytes) {
  if (shards < 1) throw DomainError("profile: shards must be >= 1");
  ProducerProfile p;
  p.model_id = model_id;
  p.num_shards = shards;
  // Rounded up so every shard gets its full share.
  const Bytes rounded = swap_bytes + (shards - swap_bytes % shards) % shards;
  if (rounded > 0) {
    p.kind = ProducerProfile::Kind::kConsumer;
    p.bytes = rounded;
  }
  return p;
}

std::vector<PlacementModel> classify(const std::vector<ProducerProfile>& profiles) {
  std::vector<PlacementModel> out;
  for (const auto& p : profiles) {
    if (p.bytes % p.num_shards != 0) {
      throw DomainError("classify: " + p.model_id + " bytes do not split across " +
                        std::to_string(p.num_shards) + " shards");
    }
    PlacementModel m;
    m.model_id = p.model_id;
    m.shards = p.num_shards;
    switch (p.kind) {
      case ProducerProfile::Kind::kProducer:
        m.r_per_shard = p.bytes / p.num_shards;
        break;
      case ProducerProfile::Kind::kConsumer:
        m.r_per_shard = -(p.bytes / p.num_shards);
        break;
      case ProducerProfile::Kind::kNeutral:
        m.r_per_shard = 0;
        break;
    }
    out.push_back(std::move(m));
  }
  return out;
}

json to_json(const ProducerProfile& p) {
  json j = {{"model_id", p.model_id},
            {"shards", p.num_shards},
            {"classification", std::string(to_string(p.kind))},
            {"bytes", p.bytes}};
  if (!p.sweep.empty()) {
    json s = json::array();
    for (const auto& x : p.sweep) s.push_back({{"batch", x.batch}, {"throughput", x.throughput}, {"memory_bytes", x.memory}});
    j["sweep"] = s;
  }
  if (!p.probes.empty()) {
    json s = json::array();
    for (const auto& x : p.probes) {
      s.push_back({{"rps", x.rps},
                   {"pass", x.pass},
                   {"ttft_p99_s", x.ttft_p99},
                   {"tbt_p99_s", x.tbt_p99},
                   {"queue_stable", x.queue_stable},
                   {"min_free_bytes", x.min_free}});
    }
    j["probes"] = s;
  }
  return j;
}

ProducerProfile parse_producer_profile(const json& j) {
  detail::Fields f(j, "");
  ProducerProfile p;
  p.model_id = f.need<std::string>("model_id");
  p.num_shards = f.get<int>("shards", 1);
  const std::string kind = f.need<std::string>("classification");
  if (kind == "producer") {
    p.kind = ProducerProfile::Kind::kProducer;
  } else if (kind == "consumer") {
    p.kind = ProducerProfile::Kind::kConsumer;
  } else if (kind == "neutral") {
    p.kind = ProducerProfile::Kind::kNeutral;
  } else {
    throw ConfigError("classification", "unknown '" + kind + "' (valid: producer, consumer, neutral)");
  }
  p.bytes = f.get<Bytes>("bytes", 0);
  f.has("sweep");
  f.has("probes");
  f.done();
  if (p.num_shards < 1) throw ConfigError("shards", "must be >= 1");
  if (p.bytes < 0) throw ConfigError("bytes", "must be >= 0");
  return p;
}

}  // namespace aquasim
