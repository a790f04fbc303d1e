// Copyright 2026 The aquasim Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <utility>

#include "aquasim/common.h"

namespace aquasim {

// Physical home of swapped bytes: host DRAM or the HBM of another GPU.
struct Location {
  enum class Kind { kDram, kRemoteGpu };
  Kind kind = Kind::kDram;
  GpuId gpu;

  static Location dram() { return {Kind::kDram, {}}; }
  static Location remote(GpuId g) { return {Kind::kRemoteGpu, std::move(g)}; }
  bool is_dram() const { return kind == Kind::kDram; }
  bool operator==(const Location&) const = default;
  std::string str() const { return is_dram() ? "dram" : "remote_gpu:" + gpu; }
};

}  // namespace aquasim
