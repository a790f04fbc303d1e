// Copyright 2026 The aquasim Authors.
// SPDX-License-Identifier: Apache-2.0

#include "aquasim/topology.h"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

namespace aquasim {
namespace {

constexpr double kMiB4 = 4e6, kMiB64 = 64e6;

TEST(Bandwidth, CalibratedA100PointsExact) {
  const LinkParams l = calibrate_link({kMiB4, 50e9}, {kMiB64, 200e9});
  EXPECT_NEAR(l.half_saturation_size, 16e6, 1e-3);
  EXPECT_NEAR(l.peak_bandwidth, 250e9, 1e-3);
  EXPECT_NEAR(effective_bandwidth(l, kMiB4), 50e9, 1e-3);
  EXPECT_NEAR(effective_bandwidth(l, kMiB64), 200e9, 1e-3);
}

TEST(Bandwidth, SaturatesAtPeak) {
  const LinkParams l = links::a100_nvlink();
  EXPECT_NEAR(effective_bandwidth(l, 1e12) / l.peak_bandwidth, 1.0, 1e-4);
}

TEST(Bandwidth, ZeroSizeIsDomainError) {
  EXPECT_THROW(effective_bandwidth(links::pcie_gen5(), 0), DomainError);
  EXPECT_THROW(effective_bandwidth(links::pcie_gen5(), -1), DomainError);
}

TEST(Bandwidth, CalibrationRejectsFlatPoints) {
  EXPECT_THROW(calibrate_link({1e6, 10e9}, {2e6, 10e9}), CalibrationError);
  EXPECT_THROW(calibrate_link({2e6, 10e9}, {1e6, 20e9}), CalibrationError);
  // Bandwidth growing faster than size has no saturating fit.
  EXPECT_THROW(calibrate_link({1e6, 1e9}, {2e6, 4e9}), CalibrationError);
}

TEST(Bandwidth, SecondWorkedCalibrationRoundTrips) {
  const LinkParams l = calibrate_link({1e6, 12.5e9}, {16e6, 100e9});
  // half = s1 s2 (b2 - b1) / (b1 s2 - b2 s1)
  const double half = 1e6 * 16e6 * (100e9 - 12.5e9) / (12.5e9 * 16e6 - 100e9 * 1e6);
  EXPECT_NEAR(l.half_saturation_size / half, 1.0, 1e-9);
  EXPECT_NEAR(effective_bandwidth(l, 1e6) / 12.5e9, 1.0, 1e-9);
  EXPECT_NEAR(effective_bandwidth(l, 16e6) / 100e9, 1.0, 1e-9);
}

TEST(Bandwidth, PropertyMonotoneBoundedAndRoundTrip) {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> peak(1e9, 1e12), half(1e3, 1e9), logsize(0, 13);
  for (int i = 0; i < 10000; ++i) {
    const LinkParams l{peak(rng), half(rng), 0};
    double a = std::pow(10, logsize(rng)), b = std::pow(10, logsize(rng));
    if (a > b) std::swap(a, b);
    const double ba = effective_bandwidth(l, a), bb = effective_bandwidth(l, b);
    ASSERT_LE(ba, bb * (1 + 1e-12));
    ASSERT_LE(bb, l.peak_bandwidth);
    ASSERT_GT(ba, 0);
    if (b > a * 1.01) {
      const LinkParams r = calibrate_link({a, ba}, {b, bb});
      ASSERT_NEAR(r.peak_bandwidth / l.peak_bandwidth, 1.0, 1e-6) << i;
      ASSERT_NEAR(r.half_saturation_size / l.half_saturation_size, 1.0, 1e-6) << i;
    }
  }
}

TEST(Transfer, ScatteredWorkedExample) {
  const ServerTopology t = topology_preset("a100x2");
  const double s = 2e6;
  const double bw = 250e9 * s / (s + 16e6);
  EXPECT_NEAR(bw, 27.78e9, 0.01e9);
  const double expect = 160 * (10e-6 + s / bw);
  EXPECT_NEAR(transfer_time(LinkPath::gpu_to_gpu("g0", "g1"), 320e6, 160, t), expect, 1e-12);
  EXPECT_NEAR(expect, 13.1e-3, 0.05e-3);
}

TEST(Transfer, GatheredWorkedExample) {
  const ServerTopology t = topology_preset("a100x2");
  const double got = transfer_time(LinkPath::gpu_to_gpu("g0", "g1"), 320e6, 1, t);
  EXPECT_NEAR(got, 10e-6 + 320e6 / (250e9 * 320e6 / 336e6), 1e-12);
  EXPECT_NEAR(got, 1.354e-3, 0.001e-3);
}

TEST(Transfer, OneByteBaseCase) {
  const LinkParams link{50e9, 4e6, 0};
  const ServerTopology t("s", {{"g0", 80'000'000'000, 2e12, "s"}}, link, link, 1'000'000'000'000);
  EXPECT_DOUBLE_EQ(transfer_time(LinkPath::gpu_to_dram("g0"), 1, 1, t), 1 / effective_bandwidth(link, 1));
}

TEST(Transfer, GatheringNeverSlower) {
  const ServerTopology t = topology_preset("h100x8");
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> total(1e3, 1e10);
  std::uniform_int_distribution<int> n(1, 400);
  for (int i = 0; i < 2000; ++i) {
    const double s = total(rng);
    for (const auto& p : {LinkPath::gpu_to_gpu("g0", "g3"), LinkPath::dram_to_gpu("g2")}) {
      ASSERT_LE(transfer_time(p, s, 1, t), transfer_time(p, s, n(rng), t) * (1 + 1e-12));
    }
  }
}

TEST(Transfer, InvalidPaths) {
  const ServerTopology t = topology_preset("h100x8");
  EXPECT_THROW(transfer_time(LinkPath::gpu_to_gpu("g0", "g0"), 1e6, 1, t), TopologyError);
  EXPECT_THROW(transfer_time(LinkPath::gpu_to_gpu("g0", "g9"), 1e6, 1, t), TopologyError);
  EXPECT_THROW(transfer_time(LinkPath::gpu_to_dram("g0"), 0, 1, t), DomainError);
  EXPECT_THROW(transfer_time(LinkPath::gpu_to_dram("g0"), 1e6, 0, t), DomainError);
}

TEST(Topology, PresetsMatchTestbeds) {
  const ServerTopology h = topology_preset("h100x8");
  ASSERT_EQ(h.gpus().size(), 8u);
  for (const auto& g : h.gpus()) EXPECT_EQ(g.hbm_capacity, 80'000'000'000);
  EXPECT_DOUBLE_EQ(h.gpu_link().peak_bandwidth, 375e9);
  EXPECT_DOUBLE_EQ(h.dram_link().peak_bandwidth, 50e9);
  EXPECT_EQ(h.dram_capacity(), 1'500'000'000'000);
  const ServerTopology a = topology_preset("a100x2");
  EXPECT_EQ(a.gpus().size(), 2u);
  EXPECT_DOUBLE_EQ(a.gpu_link().peak_bandwidth, 250e9);
  EXPECT_DOUBLE_EQ(a.dram_link().peak_bandwidth, 25e9);
  EXPECT_THROW(topology_preset("tpu"), ConfigError);
}

TEST(Topology, RejectsDuplicateGpuIds) {
  const LinkParams l = links::pcie_gen5();
  EXPECT_THROW(ServerTopology("s", {{"g0", 1, 1, "s"}, {"g0", 1, 1, "s"}}, l, l, 1), TopologyError);
  EXPECT_THROW(topology_preset("h100x8").gpu("g42"), TopologyError);
}

}  // namespace
}  // namespace aquasim
