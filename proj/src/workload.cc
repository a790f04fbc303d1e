// Copyright 2026 The aquasim Authors.
// SPDX-License-Identifier: Apache-2.0

#include "aquasim/workload.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "json.hpp"

namespace aquasim {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Seconds quantize_ms(Seconds t) { return std::round(t * 1000.0) / 1000.0; }

std::string padded_id(const std::string& prefix, std::size_t n) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%06zu", n);
  return prefix + buf;
}

class LengthSampler {
 public:
  explicit LengthSampler(const LengthDistribution& d) : d_(d) {}

  std::int64_t operator()(std::mt19937_64& rng) {
    if (d_.sigma == 0 || d_.min == d_.max) {
      return std::clamp<std::int64_t>(std::llround(d_.median), d_.min, d_.max);
    }
    double v = 0;
    for (int attempt = 0; attempt < 64; ++attempt) {
      v = std::round(d_.median * std::exp(d_.sigma * normal_(rng)));
      if (v >= static_cast<double>(d_.min) && v <= static_cast<double>(d_.max)) {
        return static_cast<std::int64_t>(v);
      }
    }
    return std::clamp<std::int64_t>(static_cast<std::int64_t>(v), d_.min, d_.max);
  }

 private:
  LengthDistribution d_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace

void InferenceRequest::validate() const {
  if (request_id.empty()) throw DomainError("request id must be non-empty");
  if (!(arrival >= 0)) throw DomainError("request " + request_id + ": arrival must be >= 0");
  if (prompt_tokens < 1) throw DomainError("request " + request_id + ": prompt_tokens must be >= 1");
  if (output_tokens < 1) throw DomainError("request " + request_id + ": output_tokens must be >= 1");
  if (cached_prefix_tokens < 0 || cached_prefix_tokens >= prompt_tokens) {
    throw DomainError("request " + request_id +
                      ": cached_prefix_tokens must be in [0, prompt_tokens)");
  }
}

void LengthDistribution::validate(std::string_view field) const {
  const std::string f(field);
  if (min < 1) throw ConfigError(f + ".min", "must be >= 1");
  if (max < min) throw ConfigError(f + ".max", "must be >= min");
  if (!(median > 0)) throw ConfigError(f + ".median", "must be positive");
  if (!(sigma >= 0)) throw ConfigError(f + ".sigma", "must be >= 0");
}

void TraceConfig::validate() const {
  if (!(rate > 0)) throw ConfigError("trace.rate", "must be positive");
  if (!(duration > 0)) throw ConfigError("trace.duration", "must be positive");
  prompt.validate("trace.prompt");
  output.validate("trace.output");
}

TraceConfig trace_preset(std::string_view name, double rate, Seconds duration,
                         std::uint64_t seed) {
  TraceConfig cfg;
  cfg.rate = rate;
  cfg.duration = duration;
  cfg.seed = seed;
  if (name == "sharegpt-like") {
    cfg.prompt = {2000, 0.8, 16, 8192};
    cfg.output = {250, 0.7, 1, 2048};
  } else if (name == "arxiv-like") {
    cfg.prompt = {7000, 0.4, 256, 16384};
    cfg.output = {300, 0.5, 1, 2048};
  } else if (name == "longprompt-8k") {
    cfg.prompt = {8192, 0, 8192, 8192};
    cfg.output = {128, 0, 128, 128};
  } else {
    throw ConfigError("trace.preset", "unknown trace preset '" + std::string(name) +
                                          "' (valid: sharegpt-like, arxiv-like, longprompt-8k)");
  }
  return cfg;
}

std::vector<std::string> trace_preset_names() {
  return {"sharegpt-like", "arxiv-like", "longprompt-8k"};
}

Trace generate_trace(const TraceConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  std::exponential_distribution<double> unit_exp(1.0);
  LengthSampler prompt(cfg.prompt);
  LengthSampler output(cfg.output);

  Trace trace;
  double t = 0;
  for (;;) {
    t += unit_exp(rng) / cfg.rate;
    if (t >= cfg.duration) break;
    InferenceRequest r;
    r.request_id = padded_id(cfg.id_prefix, trace.size() + 1);
    r.arrival = quantize_ms(t);
    r.prompt_tokens = prompt(rng);
    r.output_tokens = output(rng);
    trace.push_back(std::move(r));
  }
  return trace;
}

Trace inject_burst(const Trace& trace, const BurstSpec& burst, const TraceConfig& cfg) {
  cfg.validate();
  if (!(burst.duration > 0)) throw RangeError("burst duration must be positive");
  if (!(burst.rate_multiplier >= 1)) throw RangeError("burst rate_multiplier must be >= 1");
  if (burst.start < 0 || burst.start + burst.duration > cfg.duration + 1e-9) {
    throw RangeError("burst window [" + std::to_string(burst.start) + ", " +
                     std::to_string(burst.start + burst.duration) +
                     ") lies outside the trace duration");
  }
  Trace out = trace;
  const double extra_rate = cfg.rate * (burst.rate_multiplier - 1);
  if (extra_rate <= 0) return out;

  const auto start_ms = static_cast<std::uint64_t>(std::llround(burst.start * 1000));
  std::mt19937_64 rng(splitmix64(cfg.seed ^ splitmix64(start_ms + 0x5bd1e995ULL)));
  std::exponential_distribution<double> unit_exp(1.0);
  LengthSampler prompt(cfg.prompt);
  LengthSampler output(cfg.output);
  const std::string prefix = cfg.id_prefix + "b" + std::to_string(start_ms) + "-";

  std::set<std::string> ids;
  for (const auto& r : trace) ids.insert(r.request_id);

  const double end = burst.start + burst.duration;
  double t = burst.start;
  std::size_t n = 0;
  for (;;) {
    t += unit_exp(rng) / extra_rate;
    if (t >= end) break;
    InferenceRequest r;
    r.request_id = padded_id(prefix, ++n);
    if (!ids.insert(r.request_id).second) {
      throw ConsistencyError("burst id collides with existing request " + r.request_id);
    }
    r.arrival = std::min(quantize_ms(t), std::nextafter(end, 0.0));
    r.prompt_tokens = prompt(rng);
    r.output_tokens = output(rng);
    out.push_back(std::move(r));
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    if (a.arrival != b.arrival) return a.arrival < b.arrival;
    return a.request_id < b.request_id;
  });
  return out;
}

void check_trace(const Trace& trace) {
  std::set<std::string> ids;
  for (std::size_t i = 0; i < trace.size(); ++i) {
    trace[i].validate();
    if (!ids.insert(trace[i].request_id).second) {
      throw ConsistencyError("duplicate request id " + trace[i].request_id);
    }
    if (i > 0 && trace[i].arrival < trace[i - 1].arrival) {
      throw ConsistencyError("trace arrivals are not sorted at " + trace[i].request_id);
    }
  }
}

namespace {

std::int64_t required_int(const nlohmann::json& j, const char* key, std::size_t line) {
  auto it = j.find(key);
  if (it == j.end()) throw TraceParseError(line, std::string("missing field '") + key + "'");
  if (!it->is_number_integer()) {
    throw TraceParseError(line, std::string("field '") + key + "' must be an integer");
  }
  return it->get<std::int64_t>();
}

}  // namespace

Trace parse_trace(std::istream& in) {
  Trace trace;
  std::set<std::string> ids;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (!text.empty() && text.back() == '\r') text.pop_back();
    if (text.find_first_not_of(" \t") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      throw TraceParseError(line, std::string("malformed JSON: ") + e.what());
    }
    if (!j.is_object()) throw TraceParseError(line, "expected a JSON object");
    auto id = j.find("id");
    if (id == j.end() || !id->is_string()) throw TraceParseError(line, "field 'id' must be a string");

    InferenceRequest r;
    r.request_id = id->get<std::string>();
    const std::int64_t arrival_ms = required_int(j, "arrival_ms", line);
    if (arrival_ms < 0) throw TraceParseError(line, "field 'arrival_ms' must be >= 0");
    r.arrival = static_cast<double>(arrival_ms) / 1000.0;
    r.prompt_tokens = required_int(j, "prompt_tokens", line);
    r.output_tokens = required_int(j, "output_tokens", line);
    if (j.contains("cached_prefix_tokens")) r.cached_prefix_tokens = required_int(j, "cached_prefix_tokens", line);
    if (r.prompt_tokens < 1) throw TraceParseError(line, "field 'prompt_tokens' must be >= 1");
    if (r.output_tokens < 1) throw TraceParseError(line, "field 'output_tokens' must be >= 1");
    if (r.cached_prefix_tokens < 0 || r.cached_prefix_tokens >= r.prompt_tokens) {
      throw TraceParseError(line, "field 'cached_prefix_tokens' must be in [0, prompt_tokens)");
    }
    if (!ids.insert(r.request_id).second) {
      throw TraceParseError(line, "duplicate request id '" + r.request_id + "'");
    }
    trace.push_back(std::move(r));
  }
  std::stable_sort(trace.begin(), trace.end(),
                   [](const auto& a, const auto& b) { return a.arrival < b.arrival; });
  return trace;
}

Trace load_trace(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open trace file " + path.string());
  return parse_trace(in);
}

void write_trace(const Trace& trace, std::ostream& out) {
  for (const auto& r : trace) {
    nlohmann::ordered_json j;
    j["id"] = r.request_id;
    j["arrival_ms"] = std::llround(r.arrival * 1000.0);
    j["prompt_tokens"] = r.prompt_tokens;
    j["output_tokens"] = r.output_tokens;
    if (r.cached_prefix_tokens != 0) j["cached_prefix_tokens"] = r.cached_prefix_tokens;
    out << j.dump() << '\n';
  }
}

void save_trace(const Trace& trace, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write trace file " + path.string());
  write_trace(trace, out);
}

}  // namespace aquasim
