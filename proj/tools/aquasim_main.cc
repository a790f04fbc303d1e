// Copyright 2026 The aquasim Authors.
// SPDX-License-Identifier: Apache-2.0

// aquasim command line: run, compare, profile, place, coordinator, scenario.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "aquasim/experiment.h"
#include "aquasim/placer.h"
#include "aquasim/profiler.h"
#include "aquasim/service.h"

namespace {

using namespace aquasim;
using nlohmann::json;

struct Globals {
  std::optional<std::uint64_t> seed;
  std::string out;
};

struct Source {
  std::string config;
  std::string scenario;
};

void add_source(CLI::App* cmd, Source& src) {
  auto* cfg = cmd->add_option("--config", src.config, "Experiment JSON file");
  auto* sc = cmd->add_option("--scenario", src.scenario, "Canned scenario name");
  cfg->excludes(sc);
}

ExperimentConfig load(const Source& src, const Globals& g) {
  if (src.config.empty() && src.scenario.empty()) throw ConfigError("config", "give --config or --scenario");
  ExperimentConfig c = src.config.empty() ? scenario(src.scenario) : load_experiment(src.config);
  if (g.seed) c.seed = *g.seed;
  return c;
}

void emit(const std::string& text, const Globals& g, const char* file) {
  if (g.out.empty()) {
    std::cout << text;
    return;
  }
  std::filesystem::create_directories(g.out);
  const auto path = std::filesystem::path(g.out) / file;
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("out", "cannot write " + path.string());
  f << text;
  std::cout << "wrote " << path.string() << "\n";
}

void print_summary(const MetricsReport& r) {
  std::printf("%-16s %-14s %8s %12s %12s %12s %14s\n", "instance", "policy", "requests", "ttft_p50_ms",
              "ttft_p99_ms", "tpot_ms", "tokens_per_s");
  for (const auto& in : r.instances) {
    const auto& s = in.summary;
    if (in.policy.empty()) {
      std::printf("%-16s %-14s %8lld items/s %.3f\n", in.instance_id.c_str(), "batch",
                  static_cast<long long>(in.items_completed), in.items_per_second);
      continue;
    }
    std::printf("%-16s %-14s %8lld %12.1f %12.1f %12.2f %14.1f\n", in.instance_id.c_str(), in.policy.c_str(),
                static_cast<long long>(s.requests), s.ttft_p50_ms, s.ttft_p99_ms, s.tpot_mean_ms,
                s.throughput_tokens_per_s);
  }
}

struct ProfileArgs {
  std::string model;
  std::string topology;
  std::string gpu = "h100";
  int shards = 0;
  SlaSpec sla;
  std::string trace = "sharegpt-like";
  double duration = 300;
  double lo = 1, hi = 10, step = 0.5;
  int max_batch = 32;
  double threshold_gb = 10;
  std::optional<double> burst_rate;
  std::vector<double> multipliers{2, 3, 5};
  std::optional<std::int64_t> concurrent;
  std::int64_t max_seq = 0;
};

json profile(const ProfileArgs& a, const Globals& g) {
  const std::string topo_name = a.topology.empty() ? (a.gpu == "a100" ? "a100x2" : "h100x8") : a.topology;
  const ServerTopology topo = topology_preset(topo_name);
  ModelProfile m = model_preset(a.model, gpu_class_of(topo_name), a.shards);
  m.sla = a.sla;
  const std::uint64_t seed = g.seed.value_or(1);
  if (m.kind != ModelKind::kLlm) {
    const BatchSweep s = sweep_batch(m, topo.gpus().front(), a.max_batch);
    if (!s.saturated) std::cerr << "warning: " << m.model_id << " still scaling at batch " << a.max_batch << "\n";
    ProducerProfile p = profile_from_free(m.model_id, m.num_shards, s.free_bytes, gigabytes(a.threshold_gb));
    p.sweep = s.samples;
    json j = to_json(p);
    j["batch"] = s.batch;
    return j;
  }
  if (a.concurrent) {
    return to_json(consumer_profile(m.model_id, m.num_shards, estimate_static_swap(m, *a.concurrent, a.max_seq)));
  }
  if (a.burst_rate) {
    const auto bursts = estimate_burst_swap(m, topo, trace_preset(a.trace, *a.burst_rate, a.duration, seed), a.multipliers);
    Bytes worst = 0;
    json b = json::array();
    for (const auto& x : bursts) {
      worst = std::max(worst, x.peak_swap);
      b.push_back({{"multiplier", x.multiplier}, {"peak_swap_bytes", x.peak_swap}});
    }
    json j = to_json(consumer_profile(m.model_id, m.num_shards, worst));
    j["bursts"] = b;
    return j;
  }
  const RateSearch r = find_max_rps(m, topo, m.sla, trace_preset(a.trace, a.lo, a.duration, seed), a.lo, a.hi, a.step);
  ProducerProfile p = r.found ? profile_from_free(m.model_id, m.num_shards, r.free_bytes * m.num_shards,
                                                  gigabytes(a.threshold_gb))
                              : ProducerProfile{m.model_id, m.num_shards};
  p.probes = r.probes;
  json j = to_json(p);
  if (r.found) j["max_rps"] = r.rps;
  if (!r.diagnostic.empty()) {
    j["diagnostic"] = r.diagnostic;
    std::cerr << r.diagnostic << "\n";
  }
  return j;
}

int run_main(int argc, char** argv) {
  CLI::App app{"aquasim: scale-up domain memory sharing simulator"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "Override the experiment or trace seed");
  app.add_option("--out", g.out, "Output directory");

  Source run_src;
  std::string run_policy;
  auto* run_cmd = app.add_subcommand("run", "Run one experiment and write its report files");
  add_source(run_cmd, run_src);
  run_cmd->add_option("--policy", run_policy, "Override the subject model's scheduler");

  Source cmp_src;
  std::vector<std::string> policies{"fcfs", "cfs-dram", "cfs-aqua"};
  auto* cmp_cmd = app.add_subcommand("compare", "Run the same trace under several schedulers");
  add_source(cmp_cmd, cmp_src);
  cmp_cmd->add_option("--policies", policies, "Schedulers to compare")->delimiter(',');

  ProfileArgs pa;
  auto* prof_cmd = app.add_subcommand("profile", "Classify a model as producer, consumer or neutral");
  prof_cmd->add_option("--model", pa.model, "Model preset")->required();
  prof_cmd->add_option("--gpu", pa.gpu, "GPU class")->check(CLI::IsMember({"a100", "h100"}));
  prof_cmd->add_option("--topology", pa.topology, "Topology preset (default: a100x2 or h100x8 by --gpu)");
  prof_cmd->add_option("--sla-ttft", pa.sla.ttft_max, "p99 TTFT limit, seconds");
  prof_cmd->add_option("--sla-tbt", pa.sla.tbt_p99_max, "p99 TBT limit, seconds");
  prof_cmd->add_option("--sla-chunk", pa.sla.chunk, "Chunked-prefill budget, tokens");
  prof_cmd->add_option("--shards", pa.shards, "Shard count (default: preset)");
  prof_cmd->add_option("--trace", pa.trace, "Trace preset");
  prof_cmd->add_option("--duration", pa.duration, "Trace seconds per probe");
  prof_cmd->add_option("--rate-lo", pa.lo, "Lowest rate probed, RPS");
  prof_cmd->add_option("--rate-hi", pa.hi, "Highest rate probed, RPS");
  prof_cmd->add_option("--rate-step", pa.step, "Rate grid step, RPS");
  prof_cmd->add_option("--max-batch", pa.max_batch, "Largest batch swept for non-LLM models");
  prof_cmd->add_option("--threshold-gb", pa.threshold_gb, "Minimum free memory to count as a producer");
  prof_cmd->add_option("--burst-rate", pa.burst_rate, "Size swap for bursts over this steady rate");
  prof_cmd->add_option("--multipliers", pa.multipliers, "Burst multipliers")->delimiter(',');
  prof_cmd->add_option("--concurrent", pa.concurrent, "Size swap for this many concurrent prompts");
  prof_cmd->add_option("--max-seq", pa.max_seq, "Longest sequence per concurrent prompt");

  std::string instance_file, mode = "heuristic";
  auto* place_cmd = app.add_subcommand("place", "Place models on servers and pair GPUs");
  place_cmd->add_option("--instance", instance_file, "Placement instance JSON")->required();
  place_cmd->add_option("--mode", mode, "exact or heuristic")->check(CLI::IsMember({"exact", "heuristic"}));

  std::string host = "127.0.0.1", serve_topo = "h100x8";
  int port = 8080;
  std::vector<std::string> pairs;
  auto* coord_cmd = app.add_subcommand("coordinator", "Memory coordinator service");
  coord_cmd->require_subcommand(1);
  auto* serve_cmd = coord_cmd->add_subcommand("serve", "Serve the coordinator over HTTP");
  serve_cmd->add_option("--port", port, "Listen port");
  serve_cmd->add_option("--host", host, "Listen address");
  serve_cmd->add_option("--topology", serve_topo, "Topology preset");
  serve_cmd->add_option("--pair", pairs, "producer:consumer GPU pairing (repeatable)");

  std::string show_name;
  auto* sc_cmd = app.add_subcommand("scenario", "Canned experiments");
  sc_cmd->require_subcommand(1);
  auto* list_cmd = sc_cmd->add_subcommand("list", "List scenario names");
  auto* show_cmd = sc_cmd->add_subcommand("show", "Print a scenario's config JSON");
  show_cmd->add_option("name", show_name)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*run_cmd) {
      ExperimentConfig c = load(run_src, g);
      if (!run_policy.empty()) c = with_policy(c, run_policy);
      const MetricsReport r = g.out.empty() ? run_experiment(c) : run_experiment(c, g.out);
      print_summary(r);
      if (!g.out.empty()) std::cout << "wrote report files to " << g.out << "\n";
    } else if (*cmp_cmd) {
      const Comparison cmp = compare(load(cmp_src, g), policies);
      std::cout << comparison_text(cmp);
      if (!g.out.empty()) emit(comparison_csv(cmp), g, "comparison.csv");
    } else if (*prof_cmd) {
      emit(profile(pa, g).dump(2) + "\n", g, "profile.json");
    } else if (*place_cmd) {
      std::ifstream f(instance_file);
      if (!f) throw ConfigError("instance", "cannot read " + instance_file);
      const json j = json::parse(f, nullptr, false);
      if (j.is_discarded()) throw ConfigError("instance", instance_file + " is not valid JSON");
      const PlacementInstance inst = parse_placement_instance(j);
      const PlacementAssignment a = mode == "exact" ? solve_exact(inst) : solve_heuristic(inst);
      emit(to_json(inst, a).dump(2) + "\n", g, "placement.json");
    } else if (*serve_cmd) {
      Coordinator coord(topology_preset(serve_topo));
      for (const auto& p : pairs) {
        const auto colon = p.find(':');
        if (colon == std::string::npos) throw ConfigError("pair", "expected producer:consumer, got '" + p + "'");
        coord.register_consumer(p.substr(colon + 1), p.substr(0, colon));
      }
      HttpCoordinator server(coord);
      std::cout << "coordinator listening on " << host << ":" << port << "\n" << std::flush;
      server.listen(host, port);
    } else if (*list_cmd) {
      for (const auto& n : scenario_names()) std::cout << n << "\n";
    } else if (*show_cmd) {
      ExperimentConfig c = scenario(show_name);
      if (g.seed) c.seed = *g.seed;
      std::cout << to_json(c).dump(2) << "\n";
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const RangeError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ProtocolError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) { return run_main(argc, argv); }
