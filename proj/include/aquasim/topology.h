// Copyright 2026 The aquasim Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "aquasim/common.h"

namespace aquasim {

// Saturating bandwidth curve of one link class:
//   B(s) = peak_bandwidth * s / (s + half_saturation_size)
// plus a fixed per-transfer setup latency.
struct LinkParams {
  BytesPerSecond peak_bandwidth = 0;
  double half_saturation_size = 0;  // bytes
  Seconds per_transfer_latency = 0;

  void validate() const;
};

struct BandwidthSample {
  double size;  // bytes
  BytesPerSecond bandwidth;
};

// Effective bandwidth for a single transfer of `transfer_size` bytes.
// Throws DomainError for a non-positive size.
BytesPerSecond effective_bandwidth(const LinkParams& link, double transfer_size);

// Fits (peak, half) through two measurements in closed form. The latency of
// the returned link is `latency`.
LinkParams calibrate_link(const BandwidthSample& first, const BandwidthSample& second,
                          Seconds latency = 0);

struct GpuDevice {
  GpuId gpu_id;
  Bytes hbm_capacity = 0;
  BytesPerSecond hbm_bandwidth = 0;
  std::string server_id;
};

// One scale-up domain: every GPU pair shares `gpu_link` (NVSwitch all-to-all),
// and every GPU has its own PCIe link to host DRAM described by `dram_link`.
class ServerTopology {
 public:
  ServerTopology() = default;
  ServerTopology(std::string server_id, std::vector<GpuDevice> gpus, LinkParams gpu_link,
                 LinkParams dram_link, Bytes dram_capacity);

  const std::string& server_id() const { return server_id_; }
  const std::vector<GpuDevice>& gpus() const { return gpus_; }
  const LinkParams& gpu_link() const { return gpu_link_; }
  const LinkParams& dram_link() const { return dram_link_; }
  Bytes dram_capacity() const { return dram_capacity_; }

  bool has_gpu(std::string_view id) const;
  // Throws TopologyError for an unknown id.
  const GpuDevice& gpu(std::string_view id) const;

 private:
  std::string server_id_;
  std::vector<GpuDevice> gpus_;
  LinkParams gpu_link_;
  LinkParams dram_link_;
  Bytes dram_capacity_ = 0;
};

struct LinkPath {
  enum class Kind { kGpuToGpu, kGpuToDram, kDramToGpu };

  Kind kind;
  GpuId src;  // unused for kDramToGpu
  GpuId dst;  // unused for kGpuToDram

  static LinkPath gpu_to_gpu(GpuId src, GpuId dst) {
    return {Kind::kGpuToGpu, std::move(src), std::move(dst)};
  }
  static LinkPath gpu_to_dram(GpuId gpu) { return {Kind::kGpuToDram, std::move(gpu), {}}; }
  static LinkPath dram_to_gpu(GpuId gpu) { return {Kind::kDramToGpu, {}, std::move(gpu)}; }
};

// Validates `path` against `topo` and returns the link class it crosses.
const LinkParams& link_for(const LinkPath& path, const ServerTopology& topo);

// Wire time for moving `total` bytes as `num_buffers` equal transfers:
//   n * (latency + (total/n) / B(total/n))
Seconds transfer_time(const LinkPath& path, double total, int num_buffers,
                      const ServerTopology& topo);

namespace links {
LinkParams a100_nvlink();
LinkParams h100_nvlink();
LinkParams pcie_gen4();
LinkParams pcie_gen5();
}  // namespace links

// Named presets: "h100x8" and "a100x2".
ServerTopology topology_preset(std::string_view name);
std::vector<std::string> topology_preset_names();

}  // namespace aquasim
