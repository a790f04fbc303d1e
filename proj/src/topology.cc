// Copyright 2026 The aquasim Authors.
// SPDX-License-Identifier: Apache-2.0

#include "aquasim/topology.h"

#include <algorithm>
#include <cmath>
#include <set>

namespace aquasim {

void LinkParams::validate() const {
  if (!(peak_bandwidth > 0)) throw DomainError("link peak_bandwidth must be positive");
  if (!(half_saturation_size >= 0)) throw DomainError("link half_saturation_size must be >= 0");
  if (!(per_transfer_latency >= 0)) throw DomainError("link per_transfer_latency must be >= 0");
}

BytesPerSecond effective_bandwidth(const LinkParams& link, double transfer_size) {
  if (!(transfer_size > 0)) throw DomainError("transfer size must be positive");
  return link.peak_bandwidth * transfer_size / (transfer_size + link.half_saturation_size);
}

LinkParams calibrate_link(const BandwidthSample& first, const BandwidthSample& second,
                          Seconds latency) {
  BandwidthSample lo = first;
  BandwidthSample hi = second;
  if (lo.size > hi.size) std::swap(lo, hi);
  if (!(lo.size > 0) || !(lo.bandwidth > 0) || !(hi.bandwidth > 0)) {
    throw CalibrationError("calibration points must have positive size and bandwidth");
  }
  if (!(lo.size < hi.size)) throw CalibrationError("calibration sizes must be distinct");
  if (!(lo.bandwidth < hi.bandwidth)) {
    throw CalibrationError(
        "bandwidth must strictly increase with size for a saturating curve");
  }
  // b_i = peak * s_i / (s_i + half) for i = 1, 2.
  const double denom = lo.bandwidth * hi.size - hi.bandwidth * lo.size;
  if (!(denom > 0)) {
    throw CalibrationError("points imply a non-positive half-saturation size");
  }
  const double half = lo.size * hi.size * (hi.bandwidth - lo.bandwidth) / denom;
  const double peak = lo.bandwidth * (lo.size + half) / lo.size;
  if (!(half > 0) || peak < hi.bandwidth) {
    throw CalibrationError("inconsistent calibration points");
  }
  LinkParams out{peak, half, latency};
  out.validate();
  return out;
}

ServerTopology::ServerTopology(std::string server_id, std::vector<GpuDevice> gpus,
                               LinkParams gpu_link, LinkParams dram_link, Bytes dram_capacity)
    : server_id_(std::move(server_id)),
      gpus_(std::move(gpus)),
      gpu_link_(gpu_link),
      dram_link_(dram_link),
      dram_capacity_(dram_capacity) {
  gpu_link_.validate();
  dram_link_.validate();
  if (dram_capacity_ < 0) throw TopologyError("dram_capacity must be >= 0");
  std::set<GpuId> seen;
  for (auto& g : gpus_) {
    if (g.hbm_capacity <= 0) throw TopologyError("GPU " + g.gpu_id + ": hbm_capacity must be > 0");
    if (!(g.hbm_bandwidth > 0)) {
      throw TopologyError("GPU " + g.gpu_id + ": hbm_bandwidth must be > 0");
    }
    if (!seen.insert(g.gpu_id).second) throw TopologyError("duplicate gpu_id " + g.gpu_id);
    if (g.server_id.empty()) g.server_id = server_id_;
  }
}

bool ServerTopology::has_gpu(std::string_view id) const {
  return std::any_of(gpus_.begin(), gpus_.end(), [&](const GpuDevice& g) { return g.gpu_id == id; });
}

const GpuDevice& ServerTopology::gpu(std::string_view id) const {
  for (const auto& g : gpus_) {
    if (g.gpu_id == id) return g;
  }
  throw TopologyError("unknown gpu " + std::string(id));
}

const LinkParams& link_for(const LinkPath& path, const ServerTopology& topo) {
  switch (path.kind) {
    case LinkPath::Kind::kGpuToGpu: {
      const auto& a = topo.gpu(path.src);
      const auto& b = topo.gpu(path.dst);
      if (a.gpu_id == b.gpu_id) throw TopologyError("GpuToGpu path needs distinct GPUs");
      if (a.server_id != b.server_id) {
        throw TopologyError("GpuToGpu path crosses servers: " + a.gpu_id + " -> " + b.gpu_id);
      }
      return topo.gpu_link();
    }
    case LinkPath::Kind::kGpuToDram:
      topo.gpu(path.src);
      return topo.dram_link();
    case LinkPath::Kind::kDramToGpu:
      topo.gpu(path.dst);
      return topo.dram_link();
  }
  throw TopologyError("bad path kind");
}

Seconds transfer_time(const LinkPath& path, double total, int num_buffers,
                      const ServerTopology& topo) {
  const LinkParams& link = link_for(path, topo);
  if (!(total > 0)) throw DomainError("transfer total must be positive");
  if (num_buffers < 1) throw DomainError("num_buffers must be >= 1");
  const double each = total / num_buffers;
  return num_buffers * (link.per_transfer_latency + each / effective_bandwidth(link, each));
}

namespace links {

constexpr Seconds kLatency = 10e-6;

LinkParams a100_nvlink() { return {250 * kGB, 16 * kMB, kLatency}; }
// 450 GB/s advertised, scaled by the A100's 250/300 effective ratio.
LinkParams h100_nvlink() { return {375 * kGB, 16 * kMB, kLatency}; }
LinkParams pcie_gen4() { return {25 * kGB, 4 * kMB, kLatency}; }
LinkParams pcie_gen5() { return {50 * kGB, 4 * kMB, kLatency}; }

}  // namespace links

namespace {

std::vector<GpuDevice> make_gpus(const std::string& server, int n, Bytes hbm, BytesPerSecond bw) {
  std::vector<GpuDevice> gpus;
  for (int i = 0; i < n; ++i) gpus.push_back({"g" + std::to_string(i), hbm, bw, server});
  return gpus;
}

}  // namespace

ServerTopology topology_preset(std::string_view name) {
  if (name == "h100x8") {
    return ServerTopology("h100x8", make_gpus("h100x8", 8, gigabytes(80), 3.35 * kTB),
                          links::h100_nvlink(), links::pcie_gen5(), gigabytes(1500));
  }
  if (name == "a100x2") {
    return ServerTopology("a100x2", make_gpus("a100x2", 2, gigabytes(80), 2.0 * kTB),
                          links::a100_nvlink(), links::pcie_gen4(), gigabytes(1500));
  }
  throw ConfigError("topology.preset", "unknown topology preset '" + std::string(name) +
                                           "' (valid: h100x8, a100x2)");
}

std::vector<std::string> topology_preset_names() { return {"h100x8", "a100x2"}; }

}  // namespace aquasim
