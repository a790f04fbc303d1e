// Copyright 2026 The aquasim Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "aquasim/common.h"

namespace aquasim {

struct InferenceRequest {
  std::string request_id;
  Seconds arrival = 0;
  std::int64_t prompt_tokens = 1;
  std::int64_t output_tokens = 1;
  std::int64_t cached_prefix_tokens = 0;

  void validate() const;
  bool operator==(const InferenceRequest&) const = default;
};

using Trace = std::vector<InferenceRequest>;

// Lognormal length distribution truncated to [min, max] by resampling.
// sigma == 0 or min == max gives a fixed length.
struct LengthDistribution {
  double median = 1;
  double sigma = 0;
  std::int64_t min = 1;
  std::int64_t max = 1;

  void validate(std::string_view field) const;
};

struct TraceConfig {
  double rate = 1;  // requests / second
  LengthDistribution prompt;
  LengthDistribution output;
  Seconds duration = 60;
  std::uint64_t seed = 1;
  std::string id_prefix = "r";

  void validate() const;
};

struct BurstSpec {
  Seconds start = 0;
  Seconds duration = 60;
  double rate_multiplier = 2;
};

// Presets: "sharegpt-like", "arxiv-like", "longprompt-8k". Output-length
// parameters are stand-ins for the unpublished dataset statistics.
TraceConfig trace_preset(std::string_view name, double rate, Seconds duration, std::uint64_t seed);
std::vector<std::string> trace_preset_names();

// Poisson arrivals and i.i.d. lengths; arrivals are quantized to whole
// milliseconds so traces round-trip through the file format. Arrival times
// scale as 1/rate for a fixed seed.
Trace generate_trace(const TraceConfig& cfg);

// Adds (multiplier - 1) * rate extra Poisson arrivals inside the burst window,
// drawn from a sub-seed of cfg.seed. Requests outside the window are untouched.
Trace inject_burst(const Trace& trace, const BurstSpec& burst, const TraceConfig& cfg);

// Line-oriented JSON trace file.
Trace load_trace(const std::filesystem::path& path);
Trace parse_trace(std::istream& in);
void save_trace(const Trace& trace, const std::filesystem::path& path);
void write_trace(const Trace& trace, std::ostream& out);

// Throws on unsorted arrivals or duplicate ids.
void check_trace(const Trace& trace);

class TraceParseError : public Error {
 public:
  TraceParseError(std::size_t line, const std::string& what)
      : Error("trace line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

}  // namespace aquasim
