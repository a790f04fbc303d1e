// Copyright 2026 The aquasim Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "aquasim/common.h"
#include "aquasim/location.h"
#include "aquasim/topology.h"

namespace aquasim {

// Violations of the coordinator protocol (unknown ids, reads while in
// flight, migrating to the current location, ...).
class ProtocolError : public Error {
 public:
  using Error::Error;
};

// Unknown GPU, consumer or tensor id.
class NotFoundError : public ProtocolError {
 public:
  using ProtocolError::ProtocolError;
};

// Offer smaller than what is already allocated, or an offer during reclaim.
class OfferRejected : public ProtocolError {
 public:
  OfferRejected(Bytes allocated, const std::string& what)
      : ProtocolError(what), allocated_(allocated) {}
  Bytes allocated() const { return allocated_; }

 private:
  Bytes allocated_;
};

// Destination cannot hold the tensor.
class CapacityError : public ProtocolError {
 public:
  using ProtocolError::ProtocolError;
};

struct Migration {
  Location dest;
  Seconds started_at = 0;
  Seconds completes_at = 0;
};

struct AquaTensor {
  std::string tensor_id;
  Bytes size = 0;
  GpuId owner;
  Location location;
  std::optional<Migration> migration;

  bool in_flight() const { return migration.has_value(); }
};

struct OfferState {
  Bytes offered = 0;
  Bytes allocated = 0;
  Bytes inbound = 0;  // reserved by migrations still heading here
  bool reclaiming = false;
};

struct MigrationOrder {
  std::string tensor_id;
  Location dest;
  bool operator==(const MigrationOrder&) const = default;
};

struct LoadSignal {
  GpuId gpu_id;
  double current_rps = 0;
  std::int64_t queue_length = 0;
  Seconds reported_at = 0;

  void validate() const;
};

struct AllocationResult {
  std::string tensor_id;
  Location location;
};

// Central bookkeeping for offers, allocations and migrations. Every public
// call is serialized on one mutex, so the object can be shared by the HTTP
// front end's worker threads.
class Coordinator {
 public:
  explicit Coordinator(ServerTopology topo);

  // Consumers must be registered before allocating; `producer` is the GPU the
  // placer paired it with, if any.
  void register_consumer(const GpuId& consumer, const std::optional<GpuId>& producer);

  // Sets the offer amount (replacing a previous one). Returns the new offer.
  Bytes offer(const GpuId& producer, Bytes bytes);
  // Starts reclaiming; returns the tensors that must leave the producer.
  std::vector<std::string> reclaim(const GpuId& producer);

  AllocationResult allocate(const GpuId& consumer, Bytes bytes);
  void free(const std::string& tensor_id);

  // Drains reclaim notices for `consumer`, then proposes moving its DRAM
  // tensors back onto the paired producer while the offer has room.
  std::vector<MigrationOrder> poll(const GpuId& consumer);

  // Starts a migration at `now` and returns its transfer time.
  Seconds migrate(const std::string& tensor_id, const Location& dest, Seconds now);
  // Lands an in-flight migration and moves the accounting.
  void complete_migration(const std::string& tensor_id);

  void report_load(const LoadSignal& signal);
  std::optional<LoadSignal> last_load(const GpuId& gpu) const;

  AquaTensor tensor(const std::string& tensor_id) const;
  std::vector<AquaTensor> tensors_of(const GpuId& consumer) const;
  std::vector<AquaTensor> all_tensors() const;
  OfferState offer_state(const GpuId& producer) const;
  std::optional<GpuId> paired_producer(const GpuId& consumer) const;
  bool has_consumer(const GpuId& consumer) const;
  // Throws ProtocolError while the tensor is migrating.
  void check_readable(const std::string& tensor_id) const;

  // Throws ConsistencyError if any accounting invariant is broken.
  void check_invariants() const;

  const ServerTopology& topology() const { return topo_; }

 private:
  AquaTensor& tensor_locked(const std::string& id);
  const AquaTensor& tensor_locked(const std::string& id) const;
  void maybe_finish_reclaim(const GpuId& producer);
  void check_invariants_locked() const;

  mutable std::mutex mu_;
  ServerTopology topo_;
  std::map<GpuId, OfferState> offers_;
  std::map<std::string, AquaTensor> tensors_;
  std::map<GpuId, std::optional<GpuId>> consumers_;
  std::map<GpuId, std::vector<MigrationOrder>> notices_;
  std::map<GpuId, LoadSignal> loads_;
  std::uint64_t next_tensor_ = 1;
};

struct MonitorConfig {
  int window = 3;  // consecutive reports
  Seconds period = 1.0;
  Seconds rps_window = 10.0;  // trailing window for the observed rate
  double steady_rps = 1.0;
  std::int64_t queue_threshold = 0;

  void validate() const;
};

enum class MonitorDecision { kNone, kOffer, kReclaim };

// Producer-side hysteresis: starts with nothing offered, offers after W calm
// reports, reclaims after W loaded ones.
class SteadyStateMonitor {
 public:
  explicit SteadyStateMonitor(MonitorConfig cfg);

  MonitorDecision observe(const LoadSignal& signal);
  bool offered() const { return offered_; }
  const MonitorConfig& config() const { return cfg_; }

 private:
  MonitorConfig cfg_;
  bool offered_ = false;
  int streak_ = 0;
};

}  // namespace aquasim
