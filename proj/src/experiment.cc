// Copyright 2026 The aquasim Authors.
// SPDX-License-Identifier: Apache-2.0

#include "aquasim/experiment.h"

#include "json_fields.h"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>

namespace aquasim {

using nlohmann::json;
using detail::Fields;

namespace {

LengthDistribution parse_length(const json& j, const std::string& path) {
  Fields f(j, path);
  LengthDistribution d;
  d.median = f.need<double>("median");
  d.sigma = f.get<double>("sigma", 0);
  d.min = f.get<std::int64_t>("min", 1);
  d.max = f.get<std::int64_t>("max", static_cast<std::int64_t>(std::max(1.0, d.median)));
  f.done();
  d.validate(path);
  return d;
}

json length_json(const LengthDistribution& d) {
  return {{"median", d.median}, {"sigma", d.sigma}, {"min", d.min}, {"max", d.max}};
}

TraceSpec parse_trace_spec(const json& j, const std::string& path) {
  Fields f(j, path);
  TraceSpec t;
  t.file = f.get<std::string>("file", "");
  t.preset = f.get<std::string>("preset", t.preset);
  t.rate = f.get<double>("rate", t.rate);
  t.duration = f.get<double>("duration_s", t.duration);
  if (f.has("seed")) t.seed = f.need<std::uint64_t>("seed");
  if (f.has("prompt")) t.prompt = parse_length(f.raw("prompt"), f.at("prompt"));
  if (f.has("output")) t.output = parse_length(f.raw("output"), f.at("output"));
  t.start_offset = f.get<double>("start_offset_s", 0);
  if (f.has("burst")) {
    Fields b(f.raw("burst"), f.at("burst"));
    TraceSpec::Burst burst;
    if (b.has("after_requests")) burst.after_requests = b.need<std::int64_t>("after_requests");
    burst.start = b.get<double>("start_s", 0);
    burst.duration = b.get<double>("duration_s", 60);
    burst.multiplier = b.get<double>("multiplier", 2);
    b.done();
    if (burst.after_requests && *burst.after_requests < 0) {
      throw ConfigError(b.at("after_requests"), "must be >= 0");
    }
    t.burst = burst;
  }
  if (f.has("cached_prefix")) {
    Fields c(f.raw("cached_prefix"), f.at("cached_prefix"));
    TraceSpec::CachedPrefix p;
    p.tokens = c.need<std::int64_t>("tokens");
    p.suffix = c.get<std::int64_t>("suffix", 256);
    p.hit_rate = c.get<double>("hit_rate", 0.1);
    c.done();
    if (p.tokens < 1) throw ConfigError(c.at("tokens"), "must be >= 1");
    if (p.suffix < 1) throw ConfigError(c.at("suffix"), "must be >= 1");
    if (!(p.hit_rate >= 0 && p.hit_rate <= 1)) throw ConfigError(c.at("hit_rate"), "must be in [0, 1]");
    t.cached_prefix = p;
  }
  f.done();
  if (t.file.empty()) {
    try {
      trace_preset(t.preset, 1, 1, 1);
    } catch (const ConfigError& e) {
      throw ConfigError(f.at("preset"), e.message());
    }
    if (!(t.rate > 0)) throw ConfigError(f.at("rate"), "must be positive");
    if (!(t.duration > 0)) throw ConfigError(f.at("duration_s"), "must be positive");
  }
  if (!(t.start_offset >= 0)) throw ConfigError(f.at("start_offset_s"), "must be >= 0");
  return t;
}

json trace_json(const TraceSpec& t) {
  json j;
  if (!t.file.empty()) j["file"] = t.file;
  j["preset"] = t.preset;
  j["rate"] = t.rate;
  j["duration_s"] = t.duration;
  if (t.seed) j["seed"] = *t.seed;
  if (t.prompt) j["prompt"] = length_json(*t.prompt);
  if (t.output) j["output"] = length_json(*t.output);
  if (t.start_offset != 0) j["start_offset_s"] = t.start_offset;
  if (t.burst) {
    json b;
    if (t.burst->after_requests) {
      b["after_requests"] = *t.burst->after_requests;
    } else {
      b["start_s"] = t.burst->start;
    }
    b["duration_s"] = t.burst->duration;
    b["multiplier"] = t.burst->multiplier;
    j["burst"] = b;
  }
  if (t.cached_prefix) {
    j["cached_prefix"] = {{"tokens", t.cached_prefix->tokens},
                          {"suffix", t.cached_prefix->suffix},
                          {"hit_rate", t.cached_prefix->hit_rate}};
  }
  return j;
}

OfferMode parse_offer_mode(const std::string& s, const std::string& path) {
  if (s == "none") return OfferMode::kNone;
  if (s == "static") return OfferMode::kStatic;
  if (s == "monitored") return OfferMode::kMonitored;
  throw ConfigError(path, "unknown offer mode '" + s + "' (valid: none, static, monitored)");
}

std::string_view offer_mode_name(OfferMode m) {
  switch (m) {
    case OfferMode::kNone: return "none";
    case OfferMode::kStatic: return "static";
    case OfferMode::kMonitored: return "monitored";
  }
  return "?";
}

ModelSpec parse_model(const json& j, const std::string& path) {
  Fields f(j, path);
  ModelSpec m;
  m.id = f.need<std::string>("id");
  m.preset = f.need<std::string>("model");
  m.shards = f.get<int>("shards", 0);
  m.gpus = f.need<std::vector<GpuId>>("gpus");
  m.scheduler = f.get<std::string>("scheduler", m.scheduler);
  m.sched.k = f.get<int>("k", m.sched.k);
  m.sched.gather = f.get<bool>("gather", m.sched.gather);
  m.sched.overlap_fraction = f.get<double>("overlap_fraction", m.sched.overlap_fraction);
  m.sched.fcfs_fallback = f.get<bool>("fcfs_fallback", m.sched.fcfs_fallback);
  m.sched.poll_interval = f.get<int>("poll_interval", m.sched.poll_interval);
  m.sched.offload_batch = f.get<int>("offload_batch", m.sched.offload_batch);
  m.swap_gb = f.get<double>("swap_gb", 0);
  m.batch_size = f.get<int>("batch_size", m.batch_size);
  if (f.has("offer")) {
    Fields o(f.raw("offer"), f.at("offer"));
    m.offer.mode = parse_offer_mode(o.get<std::string>("mode", "static"), o.at("mode"));
    m.offer.bytes_per_shard = gigabytes(o.get<double>("gb", 0));
    MonitorConfig& mc = m.offer.monitor;
    mc.window = o.get<int>("window", mc.window);
    mc.period = o.get<double>("period_s", mc.period);
    mc.rps_window = o.get<double>("rps_window_s", mc.rps_window);
    mc.steady_rps = o.get<double>("steady_rps", mc.steady_rps);
    mc.queue_threshold = o.get<std::int64_t>("queue_threshold", mc.queue_threshold);
    o.done();
  }
  if (f.has("autoscale")) {
    Fields a(f.raw("autoscale"), f.at("autoscale"));
    m.autoscale.window = a.get<double>("window_s", m.autoscale.window);
    m.autoscale.provision_delay = a.get<double>("delay_s", m.autoscale.provision_delay);
    m.autoscale.margin = a.get<double>("margin", m.autoscale.margin);
    m.autoscale.steady_rps = a.get<double>("steady_rps", 0);
    a.done();
  }
  if (f.has("trace")) m.trace = parse_trace_spec(f.raw("trace"), f.at("trace"));
  if (f.has("t_base_s")) m.t_base = f.need<double>("t_base_s");
  if (f.has("t_token_s")) m.t_token = f.need<double>("t_token_s");
  if (f.has("reserve_gb")) m.reserve_gb = f.need<double>("reserve_gb");
  if (f.has("kv_bytes_per_token")) m.kv_bytes_per_token = f.need<Bytes>("kv_bytes_per_token");
  if (f.has("producer_impact_s")) m.producer_impact = f.need<double>("producer_impact_s");
  f.done();
  try {
    parse_policy(m.scheduler);
  } catch (const ConfigError& e) {
    throw ConfigError(f.at("scheduler"), e.message());
  }
  if (!(m.swap_gb >= 0)) throw ConfigError(f.at("swap_gb"), "must be >= 0");
  return m;
}

json model_json(const ModelSpec& m) {
  json j;
  j["id"] = m.id;
  j["model"] = m.preset;
  if (m.shards) j["shards"] = m.shards;
  j["gpus"] = m.gpus;
  j["scheduler"] = m.scheduler;
  const SchedulerOptions d;
  if (m.sched.k != d.k) j["k"] = m.sched.k;
  if (m.sched.gather != d.gather) j["gather"] = m.sched.gather;
  if (m.sched.overlap_fraction != d.overlap_fraction) j["overlap_fraction"] = m.sched.overlap_fraction;
  if (m.sched.fcfs_fallback != d.fcfs_fallback) j["fcfs_fallback"] = m.sched.fcfs_fallback;
  if (m.sched.poll_interval != d.poll_interval) j["poll_interval"] = m.sched.poll_interval;
  if (m.sched.offload_batch != d.offload_batch) j["offload_batch"] = m.sched.offload_batch;
  if (m.swap_gb) j["swap_gb"] = m.swap_gb;
  if (m.offer.mode != OfferMode::kNone) {
    json o;
    o["mode"] = offer_mode_name(m.offer.mode);
    o["gb"] = m.offer.bytes_per_shard / kGB;
    if (m.offer.mode == OfferMode::kMonitored) {
      o["window"] = m.offer.monitor.window;
      o["period_s"] = m.offer.monitor.period;
      o["rps_window_s"] = m.offer.monitor.rps_window;
      o["steady_rps"] = m.offer.monitor.steady_rps;
      o["queue_threshold"] = m.offer.monitor.queue_threshold;
    }
    j["offer"] = o;
  }
  if (m.scheduler == "fcfs-autoscale") {
    j["autoscale"] = {{"window_s", m.autoscale.window},
                      {"delay_s", m.autoscale.provision_delay},
                      {"margin", m.autoscale.margin},
                      {"steady_rps", m.autoscale.steady_rps}};
  }
  if (m.trace) {
    j["trace"] = trace_json(*m.trace);
  } else {
    j["batch_size"] = m.batch_size;
  }
  if (m.t_base) j["t_base_s"] = *m.t_base;
  if (m.t_token) j["t_token_s"] = *m.t_token;
  if (m.reserve_gb) j["reserve_gb"] = *m.reserve_gb;
  if (m.kv_bytes_per_token) j["kv_bytes_per_token"] = *m.kv_bytes_per_token;
  if (m.producer_impact) j["producer_impact_s"] = *m.producer_impact;
  return j;
}

}  // namespace

ExperimentConfig parse_experiment(const json& j) {
  Fields f(j, "");
  ExperimentConfig c;
  c.name = f.get<std::string>("name", "");
  if (f.has("topology")) {
    const json& t = f.raw("topology");
    if (t.is_string()) {
      c.topology = t.get<std::string>();
    } else {
      Fields tf(t, "topology");
      c.topology = tf.need<std::string>("preset");
      tf.done();
    }
  }
  try {
    topology_preset(c.topology);
  } catch (const ConfigError& e) {
    throw ConfigError("topology", e.message());
  }
  c.seed = f.get<std::uint64_t>("seed", c.seed);
  const json& models = f.raw("models");
  if (!models.is_array() || models.empty()) throw ConfigError("models", "must be a non-empty array");
  for (std::size_t i = 0; i < models.size(); ++i) {
    c.models.push_back(parse_model(models[i], "models[" + std::to_string(i) + "]"));
  }
  if (f.has("pairings")) {
    const json& p = f.raw("pairings");
    if (!p.is_array()) throw ConfigError("pairings", "must be an array of [producer, consumer]");
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (!p[i].is_array() || p[i].size() != 2 || !p[i][0].is_string() || !p[i][1].is_string()) {
        throw ConfigError("pairings[" + std::to_string(i) + "]", "must be [producer_gpu, consumer_gpu]");
      }
      c.pairings.emplace_back(p[i][0].get<std::string>(), p[i][1].get<std::string>());
    }
  }
  c.subject = f.get<std::string>("subject", "");
  c.timeline_period = f.get<double>("timeline_period_s", c.timeline_period);
  c.throughput_bin = f.get<double>("throughput_bin_s", c.throughput_bin);
  c.record_plans = f.get<bool>("record_plans", false);
  f.done();
  std::set<std::string> ids;
  for (std::size_t i = 0; i < c.models.size(); ++i) {
    const std::string path = "models[" + std::to_string(i) + "]";
    if (!ids.insert(c.models[i].id).second) throw ConfigError(path + ".id", "duplicate id");
    ModelProfile p;
    try {
      p = model_preset(c.models[i].preset, gpu_class_of(c.topology));
    } catch (const ConfigError& e) {
      throw ConfigError(path + ".model", e.message());
    }
    if (p.kind == ModelKind::kLlm && !c.models[i].trace) {
      throw ConfigError(path + ".trace", "is required for LLM models");
    }
  }
  if (!c.subject.empty() && !ids.count(c.subject)) {
    throw ConfigError("subject", "no model with id " + c.subject);
  }
  return c;
}

ExperimentConfig load_experiment(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot open " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config", path.string() + ": " + e.what());
  }
  return parse_experiment(j);
}

json to_json(const ExperimentConfig& c) {
  json j;
  if (!c.name.empty()) j["name"] = c.name;
  j["topology"] = c.topology;
  j["seed"] = c.seed;
  json models = json::array();
  for (const auto& m : c.models) models.push_back(model_json(m));
  j["models"] = models;
  if (!c.pairings.empty()) {
    json p = json::array();
    for (const auto& [a, b] : c.pairings) p.push_back({a, b});
    j["pairings"] = p;
  }
  if (!c.subject.empty()) j["subject"] = c.subject;
  j["timeline_period_s"] = c.timeline_period;
  j["throughput_bin_s"] = c.throughput_bin;
  if (c.record_plans) j["record_plans"] = true;
  return j;
}

Trace build_trace(const TraceSpec& ts, std::uint64_t default_seed, const std::string& id_prefix) {
  Trace trace;
  if (!ts.file.empty()) {
    trace = load_trace(ts.file);
  } else {
    TraceConfig tc = trace_preset(ts.preset, ts.rate, ts.duration, ts.seed.value_or(default_seed));
    if (ts.prompt) tc.prompt = *ts.prompt;
    if (ts.output) tc.output = *ts.output;
    tc.id_prefix = id_prefix;
    trace = generate_trace(tc);
    if (ts.burst) {
      BurstSpec b;
      b.duration = ts.burst->duration;
      b.rate_multiplier = ts.burst->multiplier;
      b.start = ts.burst->start;
      if (ts.burst->after_requests) {
        const auto n = static_cast<std::size_t>(*ts.burst->after_requests);
        if (n == 0) {
          b.start = 0;
        } else if (n <= trace.size()) {
          b.start = trace[n - 1].arrival;
        } else {
          throw ConfigError("trace.burst.after_requests", "trace has only " +
                                                              std::to_string(trace.size()) + " requests");
        }
      }
      trace = inject_burst(trace, b, tc);
    }
    if (ts.cached_prefix) {
      std::mt19937_64 rng(tc.seed ^ 0x9e3779b97f4a7c15ULL);
      std::bernoulli_distribution hit(ts.cached_prefix->hit_rate);
      for (auto& r : trace) {
        if (!hit(rng)) continue;
        r.cached_prefix_tokens = ts.cached_prefix->tokens;
        r.prompt_tokens = ts.cached_prefix->tokens + ts.cached_prefix->suffix;
      }
    }
  }
  if (ts.start_offset > 0) {
    for (auto& r : trace) r.arrival = std::round((r.arrival + ts.start_offset) * 1000.0) / 1000.0;
  }
  return trace;
}

SimConfig build_sim(const ExperimentConfig& c) {
  SimConfig sim;
  sim.topology = topology_preset(c.topology);
  const std::string gpu_class = gpu_class_of(c.topology);
  sim.pairings = c.pairings;
  sim.timeline_period = c.timeline_period;
  sim.throughput_bin = c.throughput_bin;
  sim.record_plans = c.record_plans;
  for (std::size_t i = 0; i < c.models.size(); ++i) {
    const ModelSpec& m = c.models[i];
    const std::string path = "models[" + std::to_string(i) + "]";
    InstanceConfig in;
    in.instance_id = m.id;
    in.profile = model_preset(m.preset, gpu_class, m.shards);
    if (m.t_base) in.profile.iter_cost.t_base = *m.t_base;
    if (m.t_token) in.profile.iter_cost.t_token = *m.t_token;
    if (m.reserve_gb) in.profile.reserved_bytes_per_shard = gigabytes(*m.reserve_gb);
    if (m.kv_bytes_per_token) in.profile.kv_bytes_per_token = *m.kv_bytes_per_token;
    if (m.producer_impact) in.profile.producer_impact = *m.producer_impact;
    in.gpus = m.gpus;
    in.policy = parse_policy(m.scheduler);
    in.sched = m.sched;
    in.swap_bytes_per_shard = uses_aqua(in.policy) ? gigabytes(m.swap_gb) : 0;
    in.offer = m.offer;
    in.autoscale = m.autoscale;
    in.batch_size = m.batch_size;
    if (m.trace) {
      // Distinct, reproducible per-model seeds.
      in.trace = build_trace(*m.trace, c.seed * 1000003ULL + i, "r");
      if (in.autoscale.steady_rps == 0) in.autoscale.steady_rps = m.trace->rate;
    }
    sim.instances.push_back(std::move(in));
  }
  try {
    sim.validate();
  } catch (const ConfigError& e) {
    // Map "instances[i]" onto the config's "models[i]".
    std::string field = e.field();
    if (field.rfind("instances", 0) == 0) field.replace(0, 9, "models");
    const std::string what = e.what();
    throw ConfigError(field, what.substr(what.find(": ") == std::string::npos ? 0 : what.find(": ") + 2));
  }
  return sim;
}

std::string subject_of(const ExperimentConfig& c) {
  if (!c.subject.empty()) return c.subject;
  for (const auto& m : c.models) {
    if (m.trace) return m.id;
  }
  throw ConfigError("subject", "experiment has no LLM model");
}

ExperimentConfig with_policy(ExperimentConfig c, std::string_view policy) {
  parse_policy(policy);
  const std::string subject = subject_of(c);
  for (auto& m : c.models) {
    if (m.id == subject) m.scheduler = std::string(policy);
  }
  return c;
}

MetricsReport run_experiment(const ExperimentConfig& c) { return run(build_sim(c)); }

MetricsReport run_experiment(const ExperimentConfig& c, const std::filesystem::path& out) {
  MetricsReport r = run_experiment(c);
  write_report(r, out);
  return r;
}

Comparison compare(const ExperimentConfig& c, const std::vector<std::string>& policies) {
  if (policies.size() < 2) throw ConfigError("policies", "compare needs at least two policies");
  Comparison out;
  out.subject = subject_of(c);
  for (const auto& p : policies) {
    out.policies.push_back(p);
    out.reports.push_back(run_experiment(with_policy(c, p)));
  }
  return out;
}

std::string comparison_csv(const Comparison& c) {
  std::ostringstream out;
  out << "policy,requests,ttft_p50_ms,ttft_p99_ms,tpot_mean_ms,tpot_p99_ms,throughput_tokens_per_s\n";
  for (std::size_t i = 0; i < c.policies.size(); ++i) {
    const LatencySummary& s = c.reports[i].instance(c.subject).summary;
    out << c.policies[i] << ',' << s.requests << ',' << format_double(s.ttft_p50_ms) << ','
        << format_double(s.ttft_p99_ms) << ',' << format_double(s.tpot_mean_ms) << ','
        << format_double(s.tpot_p99_ms) << ',' << format_double(s.throughput_tokens_per_s) << '\n';
  }
  return out.str();
}

std::string comparison_text(const Comparison& c) {
  std::ostringstream out;
  out << "subject: " << c.subject << "\n";
  out << std::left << std::setw(16) << "policy" << std::right << std::setw(10) << "requests"
      << std::setw(14) << "p50 TTFT ms" << std::setw(14) << "p99 TTFT ms" << std::setw(14)
      << "mean TPOT ms" << std::setw(16) << "tokens/s" << "\n";
  out << std::fixed << std::setprecision(1);
  for (std::size_t i = 0; i < c.policies.size(); ++i) {
    const LatencySummary& s = c.reports[i].instance(c.subject).summary;
    out << std::left << std::setw(16) << c.policies[i] << std::right << std::setw(10) << s.requests
        << std::setw(14) << s.ttft_p50_ms << std::setw(14) << s.ttft_p99_ms << std::setw(14)
        << s.tpot_mean_ms << std::setw(16) << s.throughput_tokens_per_s << "\n";
  }
  return out.str();
}

std::vector<std::string> scenario_names() {
  return {"burst-cfs", "prefill-cache", "long-prompt", "elasticity"};
}

ExperimentConfig scenario(std::string_view name) {
  auto llm = [](std::string id, std::string preset, std::vector<GpuId> gpus, std::string sched,
                TraceSpec trace) {
    ModelSpec m;
    m.id = std::move(id);
    m.preset = std::move(preset);
    m.gpus = std::move(gpus);
    m.scheduler = std::move(sched);
    m.trace = std::move(trace);
    return m;
  };
  auto batch = [](std::string id, std::string preset, GpuId gpu) {
    ModelSpec m;
    m.id = std::move(id);
    m.preset = std::move(preset);
    m.gpus = {std::move(gpu)};
    m.offer.mode = OfferMode::kStatic;
    return m;
  };
  auto trace = [](std::string preset, double rate, Seconds duration) {
    TraceSpec t;
    t.preset = std::move(preset);
    t.rate = rate;
    t.duration = duration;
    return t;
  };

  ExperimentConfig c;
  c.name = std::string(name);
  if (name == "burst-cfs") {
    c.topology = "h100x8";
    c.seed = 7;
    TraceSpec t = trace("sharegpt-like", 1.0, 240);
    t.burst = TraceSpec::Burst{25, 0, 60, 2};
    ModelSpec consumer = llm("llama-70b", "llama-70b", {"g0", "g1"}, "cfs-aqua", t);
    consumer.swap_gb = 20;
    ModelSpec producer = llm("llama-8b", "llama-8b", {"g2"}, "fcfs", trace("sharegpt-like", 1.0, 240));
    producer.offer.mode = OfferMode::kStatic;
    producer.offer.bytes_per_shard = gigabytes(30);
    c.models = {consumer, producer, batch("audiogen", "audiogen", "g3")};
    c.pairings = {{"g2", "g0"}, {"g3", "g1"}};
    c.subject = "llama-70b";
  } else if (name == "prefill-cache") {
    c.topology = "h100x8";
    c.seed = 11;
    TraceSpec t = trace("sharegpt-like", 1.0, 240);
    t.cached_prefix = TraceSpec::CachedPrefix{99744, 256, 0.1};
    ModelSpec consumer = llm("yi-34b-200k", "yi-34b-200k", {"g0", "g1"}, "fcfs-aqua", t);
    consumer.swap_gb = 16;
    c.models = {consumer, batch("sd-3", "sd-3", "g2"), batch("kandinsky", "kandinsky", "g3")};
    c.pairings = {{"g2", "g0"}, {"g3", "g1"}};
    c.subject = "yi-34b-200k";
  } else if (name == "long-prompt") {
    c.topology = "h100x8";
    c.seed = 13;
    ModelSpec consumer = llm("opt-30b", "opt-30b", {"g0"}, "offload-aqua", trace("longprompt-8k", 0.2, 600));
    consumer.swap_gb = 8;
    ModelSpec producer = llm("llama-8b", "llama-8b", {"g1"}, "fcfs", trace("sharegpt-like", 1.0, 600));
    producer.offer.mode = OfferMode::kStatic;
    producer.offer.bytes_per_shard = gigabytes(20);
    c.models = {consumer, producer};
    c.pairings = {{"g1", "g0"}};
    c.subject = "opt-30b";
  } else if (name == "elasticity") {
    c.topology = "a100x2";
    c.seed = 17;
    TraceSpec pt = trace("sharegpt-like", 1.5, 300);
    pt.burst = TraceSpec::Burst{std::nullopt, 120, 60, 2};
    ModelSpec producer = llm("llama-8b", "llama-8b", {"g0"}, "fcfs", pt);
    producer.offer.mode = OfferMode::kMonitored;
    producer.offer.bytes_per_shard = gigabytes(20);
    producer.offer.monitor.window = 3;
    producer.offer.monitor.period = 1;
    producer.offer.monitor.rps_window = 20;
    producer.offer.monitor.steady_rps = 2.25;
    producer.offer.monitor.queue_threshold = 4;
    TraceSpec ct = trace("longprompt-8k", 0.5, 240);
    ct.start_offset = 60;
    ModelSpec consumer = llm("opt-30b", "opt-30b", {"g1"}, "offload-aqua", ct);
    consumer.swap_gb = 8;
    c.models = {producer, consumer};
    c.pairings = {{"g0", "g1"}};
    c.subject = "opt-30b";
    c.throughput_bin = 10;
  } else {
    std::string valid;
    for (const auto& n : scenario_names()) valid += (valid.empty() ? "" : ", ") + n;
    throw ConfigError("scenario", "unknown scenario '" + std::string(name) + "' (valid: " + valid + ")");
  }
  return c;
}

}  // namespace aquasim
