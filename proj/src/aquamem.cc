// Copyright 2026 The aquasim Authors.
// SPDX-License-Identifier: Apache-2.0

#include "aquasim/aquamem.h"

#include <algorithm>
#include <cstdio>

namespace aquasim {

void LoadSignal::validate() const {
  if (gpu_id.empty()) throw ProtocolError("load signal needs a gpu_id");
  if (!(current_rps >= 0)) throw ProtocolError("current_rps must be >= 0");
  if (queue_length < 0) throw ProtocolError("queue_length must be >= 0");
  if (!(reported_at >= 0)) throw ProtocolError("reported_at must be >= 0");
}

Coordinator::Coordinator(ServerTopology topo) : topo_(std::move(topo)) {}

void Coordinator::register_consumer(const GpuId& consumer, const std::optional<GpuId>& producer) {
  std::lock_guard lock(mu_);
  if (!topo_.has_gpu(consumer)) throw NotFoundError("unknown consumer gpu " + consumer);
  if (producer) {
    if (!topo_.has_gpu(*producer)) throw NotFoundError("unknown producer gpu " + *producer);
    if (*producer == consumer) throw ProtocolError("a GPU cannot be paired with itself");
    for (const auto& [c, p] : consumers_) {
      if (c != consumer && p == producer) {
        throw ProtocolError("producer " + *producer + " is already paired with " + c);
      }
    }
  }
  consumers_[consumer] = producer;
}

Bytes Coordinator::offer(const GpuId& producer, Bytes bytes) {
  std::lock_guard lock(mu_);
  if (!topo_.has_gpu(producer)) throw NotFoundError("unknown producer gpu " + producer);
  if (bytes < 0) throw ProtocolError("offer bytes must be >= 0");
  if (bytes > topo_.gpu(producer).hbm_capacity) {
    throw ProtocolError("offer exceeds the HBM of " + producer);
  }
  OfferState& o = offers_[producer];
  if (o.reclaiming) {
    throw OfferRejected(o.allocated, "producer " + producer + " is reclaiming; offer after it completes");
  }
  if (bytes < o.allocated + o.inbound) {
    throw OfferRejected(o.allocated + o.inbound, "offer of " + std::to_string(bytes) +
                                                     " bytes is below the " +
                                                     std::to_string(o.allocated + o.inbound) +
                                                     " bytes already allocated on " + producer);
  }
  o.offered = bytes;
  check_invariants_locked();
  return o.offered;
}

std::vector<std::string> Coordinator::reclaim(const GpuId& producer) {
  std::lock_guard lock(mu_);
  auto it = offers_.find(producer);
  if (it == offers_.end()) return {};
  OfferState& o = it->second;
  if (o.reclaiming) return {};
  o.reclaiming = true;

  std::vector<std::string> affected;
  for (auto& [id, t] : tensors_) {
    const bool resident = t.location == Location::remote(producer);
    const bool inbound = t.migration && t.migration->dest == Location::remote(producer);
    if (inbound) {
      // Redirected: lands in DRAM when the transfer finishes.
      t.migration->dest = Location::dram();
      o.inbound -= t.size;
      affected.push_back(id);
    } else if (resident && !t.migration) {
      notices_[t.owner].push_back({id, Location::dram()});
      affected.push_back(id);
    } else if (resident) {
      affected.push_back(id);  // already on its way out
    }
  }
  maybe_finish_reclaim(producer);
  check_invariants_locked();
  return affected;
}

void Coordinator::maybe_finish_reclaim(const GpuId& producer) {
  auto it = offers_.find(producer);
  if (it == offers_.end() || !it->second.reclaiming) return;
  if (it->second.allocated == 0 && it->second.inbound == 0) {
    it->second.offered = 0;
    it->second.reclaiming = false;
  }
}

AllocationResult Coordinator::allocate(const GpuId& consumer, Bytes bytes) {
  std::lock_guard lock(mu_);
  auto c = consumers_.find(consumer);
  if (c == consumers_.end()) throw NotFoundError("unknown consumer " + consumer);
  if (bytes <= 0) throw ProtocolError("allocation bytes must be > 0");

  AquaTensor t;
  char buf[32];
  std::snprintf(buf, sizeof(buf), "t%06llu", static_cast<unsigned long long>(next_tensor_++));
  t.tensor_id = buf;
  t.size = bytes;
  t.owner = consumer;
  t.location = Location::dram();
  if (c->second) {
    auto o = offers_.find(*c->second);
    if (o != offers_.end() && !o->second.reclaiming &&
        o->second.offered - o->second.allocated - o->second.inbound >= bytes) {
      o->second.allocated += bytes;
      t.location = Location::remote(*c->second);
    }
  }
  if (t.location.is_dram()) {
    Bytes in_dram = 0;
    for (const auto& [id, x] : tensors_) {
      if (x.location.is_dram()) in_dram += x.size;
    }
    if (in_dram + bytes > topo_.dram_capacity()) throw CapacityError("DRAM exhausted");
  }
  tensors_.emplace(t.tensor_id, t);
  check_invariants_locked();
  return {t.tensor_id, t.location};
}

void Coordinator::free(const std::string& tensor_id) {
  std::lock_guard lock(mu_);
  AquaTensor& t = tensor_locked(tensor_id);
  if (t.migration) throw ProtocolError("tensor " + tensor_id + " is migrating");
  std::optional<GpuId> producer;
  if (!t.location.is_dram()) {
    producer = t.location.gpu;
    offers_[*producer].allocated -= t.size;
  }
  for (auto& [consumer, orders] : notices_) {
    std::erase_if(orders, [&](const MigrationOrder& o) { return o.tensor_id == tensor_id; });
  }
  tensors_.erase(tensor_id);
  if (producer) maybe_finish_reclaim(*producer);
  check_invariants_locked();
}

std::vector<MigrationOrder> Coordinator::poll(const GpuId& consumer) {
  std::lock_guard lock(mu_);
  auto c = consumers_.find(consumer);
  if (c == consumers_.end()) throw NotFoundError("unknown consumer " + consumer);
  std::vector<MigrationOrder> out;
  auto n = notices_.find(consumer);
  if (n != notices_.end()) {
    out = std::move(n->second);
    notices_.erase(n);
  }
  if (!c->second) return out;
  auto o = offers_.find(*c->second);
  if (o == offers_.end() || o->second.reclaiming) return out;
  Bytes room = o->second.offered - o->second.allocated - o->second.inbound;
  for (const auto& [id, t] : tensors_) {
    if (t.owner != consumer || !t.location.is_dram() || t.migration) continue;
    if (t.size > room) continue;
    room -= t.size;
    out.push_back({id, Location::remote(*c->second)});
  }
  return out;
}

Seconds Coordinator::migrate(const std::string& tensor_id, const Location& dest, Seconds now) {
  std::lock_guard lock(mu_);
  AquaTensor& t = tensor_locked(tensor_id);
  if (t.migration) throw ProtocolError("tensor " + tensor_id + " is already migrating");
  if (dest == t.location) {
    throw ProtocolError("tensor " + tensor_id + " already lives at " + dest.str());
  }
  LinkPath path = LinkPath::gpu_to_dram(t.location.gpu);
  if (dest.is_dram()) {
    path = LinkPath::gpu_to_dram(t.location.gpu);
  } else {
    if (!topo_.has_gpu(dest.gpu)) throw NotFoundError("unknown destination gpu " + dest.gpu);
    auto o = offers_.find(dest.gpu);
    if (o == offers_.end() || o->second.reclaiming ||
        o->second.offered - o->second.allocated - o->second.inbound < t.size) {
      throw CapacityError("migration refused: " + dest.gpu + " has no room for " + tensor_id);
    }
    o->second.inbound += t.size;
    path = t.location.is_dram() ? LinkPath::dram_to_gpu(dest.gpu)
                                : LinkPath::gpu_to_gpu(t.location.gpu, dest.gpu);
  }
  const Seconds d = transfer_time(path, static_cast<double>(t.size), 1, topo_);
  t.migration = Migration{dest, now, now + d};
  check_invariants_locked();
  return d;
}

void Coordinator::complete_migration(const std::string& tensor_id) {
  std::lock_guard lock(mu_);
  AquaTensor& t = tensor_locked(tensor_id);
  if (!t.migration) throw ProtocolError("tensor " + tensor_id + " is not migrating");
  const Location dest = t.migration->dest;
  std::optional<GpuId> source;
  if (!t.location.is_dram()) {
    source = t.location.gpu;
    offers_[*source].allocated -= t.size;
  }
  if (!dest.is_dram()) {
    OfferState& o = offers_[dest.gpu];
    o.inbound -= t.size;
    o.allocated += t.size;
  }
  t.location = dest;
  t.migration.reset();
  if (source) maybe_finish_reclaim(*source);
  check_invariants_locked();
}

void Coordinator::report_load(const LoadSignal& signal) {
  signal.validate();
  std::lock_guard lock(mu_);
  loads_[signal.gpu_id] = signal;
}

std::optional<LoadSignal> Coordinator::last_load(const GpuId& gpu) const {
  std::lock_guard lock(mu_);
  auto it = loads_.find(gpu);
  if (it == loads_.end()) return std::nullopt;
  return it->second;
}

AquaTensor& Coordinator::tensor_locked(const std::string& id) {
  auto it = tensors_.find(id);
  if (it == tensors_.end()) throw NotFoundError("unknown tensor " + id);
  return it->second;
}

const AquaTensor& Coordinator::tensor_locked(const std::string& id) const {
  auto it = tensors_.find(id);
  if (it == tensors_.end()) throw NotFoundError("unknown tensor " + id);
  return it->second;
}

AquaTensor Coordinator::tensor(const std::string& tensor_id) const {
  std::lock_guard lock(mu_);
  return tensor_locked(tensor_id);
}

std::vector<AquaTensor> Coordinator::tensors_of(const GpuId& consumer) const {
  std::lock_guard lock(mu_);
  std::vector<AquaTensor> out;
  for (const auto& [id, t] : tensors_) {
    if (t.owner == consumer) out.push_back(t);
  }
  return out;
}

std::vector<AquaTensor> Coordinator::all_tensors() const {
  std::lock_guard lock(mu_);
  std::vector<AquaTensor> out;
  for (const auto& [id, t] : tensors_) out.push_back(t);
  return out;
}

OfferState Coordinator::offer_state(const GpuId& producer) const {
  std::lock_guard lock(mu_);
  auto it = offers_.find(producer);
  return it == offers_.end() ? OfferState{} : it->second;
}

std::optional<GpuId> Coordinator::paired_producer(const GpuId& consumer) const {
  std::lock_guard lock(mu_);
  auto it = consumers_.find(consumer);
  if (it == consumers_.end()) throw NotFoundError("unknown consumer " + consumer);
  return it->second;
}

bool Coordinator::has_consumer(const GpuId& consumer) const {
  std::lock_guard lock(mu_);
  return consumers_.count(consumer) > 0;
}

void Coordinator::check_readable(const std::string& tensor_id) const {
  std::lock_guard lock(mu_);
  if (tensor_locked(tensor_id).migration) {
    throw ProtocolError("tensor " + tensor_id + " is migrating and cannot be accessed");
  }
}

void Coordinator::check_invariants() const {
  std::lock_guard lock(mu_);
  check_invariants_locked();
}

void Coordinator::check_invariants_locked() const {
  std::map<GpuId, Bytes> resident;
  std::map<GpuId, Bytes> inbound;
  for (const auto& [id, t] : tensors_) {
    if (!t.location.is_dram()) resident[t.location.gpu] += t.size;
    if (t.migration && !t.migration->dest.is_dram()) inbound[t.migration->dest.gpu] += t.size;
  }
  for (const auto& [gpu, o] : offers_) {
    if (o.allocated < 0 || o.inbound < 0) throw ConsistencyError("negative accounting on " + gpu);
    if (o.allocated + o.inbound > o.offered) {
      throw ConsistencyError("allocated exceeds offered on " + gpu);
    }
    if (o.allocated != resident[gpu]) throw ConsistencyError("allocation drift on " + gpu);
    if (o.inbound != inbound[gpu]) throw ConsistencyError("inbound drift on " + gpu);
  }
  for (const auto& [gpu, bytes] : resident) {
    if (bytes > 0 && offers_.count(gpu) == 0) {
      throw ConsistencyError("tensors on " + gpu + " without an offer");
    }
  }
}

void MonitorConfig::validate() const {
  if (window < 1) throw ConfigError("monitor.window", "must be >= 1");
  if (!(period > 0)) throw ConfigError("monitor.period", "must be positive");
  if (!(rps_window > 0)) throw ConfigError("monitor.rps_window", "must be positive");
  if (!(steady_rps >= 0)) throw ConfigError("monitor.steady_rps", "must be >= 0");
  if (queue_threshold < 0) throw ConfigError("monitor.queue_threshold", "must be >= 0");
}

SteadyStateMonitor::SteadyStateMonitor(MonitorConfig cfg) : cfg_(cfg) { cfg_.validate(); }

MonitorDecision SteadyStateMonitor::observe(const LoadSignal& signal) {
  const bool loaded =
      signal.current_rps > cfg_.steady_rps || signal.queue_length > cfg_.queue_threshold;
  // While offered we count loaded reports, otherwise calm ones.
  if (loaded == offered_) {
    ++streak_;
  } else {
    streak_ = 0;
  }
  if (streak_ < cfg_.window) return MonitorDecision::kNone;
  streak_ = 0;
  offered_ = !offered_;
  return offered_ ? MonitorDecision::kOffer : MonitorDecision::kReclaim;
}

}  // namespace aquasim
