// Copyright 2026 The aquasim Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace aquasim {

using Bytes = std::int64_t;
using Seconds = double;
using BytesPerSecond = double;
using GpuId = std::string;

// Decimal units throughout; link and HBM figures are quoted that way.
inline constexpr double kKB = 1e3;
inline constexpr double kMB = 1e6;
inline constexpr double kGB = 1e9;
inline constexpr double kTB = 1e12;

inline constexpr Bytes round_bytes(double b) {
  return static_cast<Bytes>(b >= 0 ? b + 0.5 : b - 0.5);
}
inline constexpr Bytes gigabytes(double gb) { return round_bytes(gb * kGB); }
inline constexpr Bytes megabytes(double mb) { return round_bytes(mb * kMB); }

// Base for every error this library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class CalibrationError : public Error {
 public:
  using Error::Error;
};

class TopologyError : public Error {
 public:
  using Error::Error;
};

class RangeError : public Error {
 public:
  using Error::Error;
};

class ConsistencyError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& what)
      : Error(field.empty() ? what : field + ": " + what), field_(std::move(field)), message_(what) {}
  const std::string& field() const { return field_; }
  // what() without the field prefix, for re-raising under another path.
  const std::string& message() const { return message_; }

 private:
  std::string field_;
  std::string message_;
};

// Raised when a simulation cannot continue (e.g. a prompt that no longer fits
// anywhere). Carries the GPU and simulated time for the diagnostic.
class SimulationAbort : public Error {
 public:
  SimulationAbort(GpuId gpu, Seconds at, const std::string& what)
      : Error("simulation aborted on " + gpu + " at t=" + std::to_string(at) +
              "s: " + what),
        gpu_(std::move(gpu)),
        at_(at) {}
  const GpuId& gpu() const { return gpu_; }
  Seconds at() const { return at_; }

 private:
  GpuId gpu_;
  Seconds at_;
};

}  // namespace aquasim
