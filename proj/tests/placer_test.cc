// Copyright 2026 The aquasim Authors.
// SPDX-License-Identifier: Apache-2.0

#include "aquasim/placer.h"

#include <gtest/gtest.h>

#include <algorithm>
#include <chrono>
#include <random>

#include "support/placement_oracle.h"

namespace aquasim {
namespace {

constexpr Bytes GB = 1'000'000'000;

PlacementInstance four_models() {
  PlacementInstance in;
  in.num_servers = 2;
  in.gpus_per_server = 2;
  in.gpu_mem = 80 * GB;
  in.models = {{"P1", 1, 20 * GB}, {"P2", 1, 15 * GB}, {"C1", 1, -18 * GB}, {"C2", 1, -12 * GB}};
  return in;
}

PlacementAssignment by_model(const PlacementInstance& in, std::vector<int> servers) {
  PlacementAssignment a;
  for (std::size_t m = 0; m < in.models.size(); ++m) {
    for (int k = 0; k < in.models[m].shards; ++k) a.shard_server.push_back(servers[m]);
  }
  return a;
}

std::vector<std::pair<std::string, std::string>> pair_ids(const PlacementInstance& in, const PlacementAssignment& a) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& p : a.pairs) out.emplace_back(in.models[p.producer.model].model_id, in.models[p.consumer.model].model_id);
  std::sort(out.begin(), out.end());
  return out;
}

TEST(Objective, FourModelExample) {
  const PlacementInstance in = four_models();
  EXPECT_EQ(objective(in, by_model(in, {0, 1, 0, 1})), 3 * GB);
  EXPECT_EQ(objective(in, by_model(in, {0, 1, 1, 0})), 8 * GB);
}

TEST(Objective, LoneProducer) {
  PlacementInstance in;
  in.num_servers = 1;
  in.gpus_per_server = 8;
  in.gpu_mem = 80 * GB;
  in.models = {{"P", 1, 30 * GB}};
  EXPECT_EQ(objective(in, by_model(in, {0})), 30 * GB + 80 * GB);
  in.models = {{"C", 1, -30 * GB}};
  EXPECT_EQ(objective(in, by_model(in, {0})), -30 * GB - 80 * GB);
  in.models = {{"N", 1, 0}};
  EXPECT_EQ(objective(in, by_model(in, {0})), 0);
}

TEST(Objective, InfeasibleThrows) {
  const PlacementInstance in = four_models();
  EXPECT_THROW(objective(in, by_model(in, {0, 0, 0, 1})), DomainError);
}

TEST(Feasible, NamesEachViolation) {
  PlacementInstance in;
  in.num_servers = 2;
  in.gpus_per_server = 4;
  in.gpu_mem = 80 * GB;
  in.models = {{"A", 3, 10 * GB}, {"B", 2, -5 * GB}};
  PlacementAssignment a;
  a.shard_server = {0, 0, 0, 0, 0};
  Feasibility f = feasible(in, a);
  ASSERT_FALSE(f.ok);
  ASSERT_EQ(f.violations.size(), 1u);
  EXPECT_NE(f.violations[0].find("server capacity"), std::string::npos);

  a.shard_server = {0, 0, 0, 0, 1};
  f = feasible(in, a);
  ASSERT_FALSE(f.ok);
  EXPECT_NE(f.violations[0].find("shards colocated"), std::string::npos);

  a.shard_server = {0, 0, 0, 5, 5};
  f = feasible(in, a);
  ASSERT_FALSE(f.ok);
  EXPECT_NE(f.violations[0].find("one server per model"), std::string::npos);

  a.shard_server = {0, 0, 0, 1, 1};
  a.shard_gpu = {0, 1, 1, 0, 1};
  f = feasible(in, a);
  ASSERT_FALSE(f.ok);
  EXPECT_NE(f.violations[0].find("one shard per GPU"), std::string::npos);
}

TEST(Feasible, FourModelExampleIsClean) {
  const PlacementInstance in = four_models();
  const Feasibility f = feasible(in, by_model(in, {0, 1, 0, 1}));
  EXPECT_TRUE(f.ok);
  EXPECT_TRUE(f.violations.empty());
}

TEST(Exact, FourModelExample) {
  const PlacementInstance in = four_models();
  const PlacementAssignment a = solve_exact(in);
  EXPECT_EQ(a.objective, 3 * GB);
  EXPECT_EQ(pair_ids(in, a), (std::vector<std::pair<std::string, std::string>>{{"P1", "C1"}, {"P2", "C2"}}));
  EXPECT_TRUE(feasible(in, a).ok);
  EXPECT_TRUE(a.dram_fallback.empty());
}

TEST(Exact, SingleModelSingleServer) {
  PlacementInstance in;
  in.num_servers = 1;
  in.gpus_per_server = 4;
  in.gpu_mem = 80 * GB;
  in.models = {{"P", 2, 15 * GB}};
  const PlacementAssignment a = solve_exact(in);
  EXPECT_EQ(a.shard_server, (std::vector<int>{0, 0}));
  EXPECT_EQ(a.objective, 30 * GB + 2 * 80 * GB);
}

TEST(Exact, SymmetricInstanceGivesLexicographicOptimum) {
  PlacementInstance in;
  in.num_servers = 2;
  in.gpus_per_server = 2;
  in.gpu_mem = 80 * GB;
  in.models = {{"P1", 1, 10 * GB}, {"P2", 1, 10 * GB}, {"C1", 1, -10 * GB}, {"C2", 1, -10 * GB}};
  const PlacementAssignment a = solve_exact(in);
  EXPECT_EQ(a.model_servers(in), (std::vector<int>{0, 1, 0, 1}));
  EXPECT_EQ(a.objective, 0);
  EXPECT_EQ(solve_exact(in).shard_server, a.shard_server);
}

TEST(Exact, GuardsAndInfeasible) {
  PlacementInstance big;
  big.num_servers = 4;
  big.gpus_per_server = 8;
  big.gpu_mem = 80 * GB;
  for (int i = 0; i < 25; ++i) big.models.push_back({"m" + std::to_string(i), 1, GB});
  EXPECT_THROW(solve_exact(big), RangeError);
  EXPECT_NO_THROW(solve_heuristic(big));

  PlacementInstance tight;
  tight.num_servers = 2;
  tight.gpus_per_server = 4;
  tight.gpu_mem = 80 * GB;
  tight.models = {{"A", 3, GB}, {"B", 3, GB}, {"C", 2, GB}};
  EXPECT_THROW(solve_exact(tight), DomainError);
  EXPECT_THROW(solve_heuristic(tight), DomainError);
}

TEST(Exact, MatchesEnumerationOracle) {
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    const PlacementInstance in = testing::random_small_instance(seed);
    const auto oracle = testing::enumerate_placements(in);
    ASSERT_TRUE(oracle.found) << seed;
    const PlacementAssignment a = solve_exact(in);
    ASSERT_TRUE(feasible(in, a).ok) << seed;
    ASSERT_EQ(a.objective, oracle.value) << seed;
    ASSERT_EQ(a.model_servers(in), oracle.servers) << seed;
  }
}

TEST(Heuristic, NearOptimalFeasibleAndDeterministic) {
  int within = 0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    const PlacementInstance in = testing::random_small_instance(seed);
    const PlacementAssignment h = solve_heuristic(in);
    ASSERT_TRUE(feasible(in, h).ok) << seed;
    ASSERT_EQ(h.objective, objective(in, h)) << seed;
    const Bytes opt = solve_exact(in).objective;
    ASSERT_GE(h.objective, opt) << seed;
    // Objectives can be negative; "within 2%" is measured on |opt|.
    if (h.objective - opt <= std::abs(opt) / 50) ++within;
    ASSERT_EQ(solve_heuristic(in).shard_server, h.shard_server) << seed;
  }
  EXPECT_GE(within, 95);
}

TEST(Heuristic, OnlyProducersWithinTwoPercent) {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 30; ++t) {
    PlacementInstance in;
    in.num_servers = 3;
    in.gpus_per_server = 4;
    in.gpu_mem = 80 * GB;
    const int n = 2 + static_cast<int>(rng() % 9);
    for (int i = 0; i < n; ++i) in.models.push_back({"p" + std::to_string(i), 1, static_cast<Bytes>(1 + rng() % 40) * GB});
    const Bytes opt = solve_exact(in).objective;
    const Bytes h = solve_heuristic(in).objective;
    EXPECT_GE(h, opt) << t;
    EXPECT_LE(h - opt, opt / 50) << t;
  }
}

TEST(Heuristic, LargeClusterUnderFiveSeconds) {
  const PlacementInstance in = testing::random_large_instance(1);
  ASSERT_EQ(in.num_servers * in.gpus_per_server, 128);
  ASSERT_EQ(in.models.size(), 100u);
  const auto t0 = std::chrono::steady_clock::now();
  const PlacementAssignment a = solve_heuristic(in);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  EXPECT_LT(secs, 5.0);
  EXPECT_TRUE(feasible(in, a).ok);
}

MatchUnit unit(std::string id, double gb) { return {std::move(id), {}, static_cast<Bytes>(gb * GB)}; }

TEST(Match, RankOrderPairing) {
  const MatchResult r = match_within_server({unit("p10", 10), unit("c8", -8), unit("p30", 30), unit("c25", -25)});
  ASSERT_EQ(r.pairs.size(), 2u);
  EXPECT_EQ(r.pairs[0].first.model_id, "p30");
  EXPECT_EQ(r.pairs[0].second.model_id, "c25");
  EXPECT_EQ(r.pairs[1].first.model_id, "p10");
  EXPECT_EQ(r.pairs[1].second.model_id, "c8");
  EXPECT_TRUE(r.unpaired_producers.empty());
  EXPECT_TRUE(r.unpaired_consumers.empty());
}

TEST(Match, SurplusSides) {
  MatchResult r = match_within_server({unit("p10", 10), unit("c25", -25), unit("c8", -8)});
  ASSERT_EQ(r.pairs.size(), 1u);
  EXPECT_EQ(r.pairs[0].second.model_id, "c25");
  ASSERT_EQ(r.unpaired_consumers.size(), 1u);
  EXPECT_EQ(r.unpaired_consumers[0].model_id, "c8");

  r = match_within_server({unit("p10", 10), unit("p3", 3)});
  EXPECT_TRUE(r.pairs.empty());
  EXPECT_EQ(r.unpaired_producers.size(), 2u);

  r = match_within_server({unit("n", 0), unit("c", -4)});
  EXPECT_TRUE(r.pairs.empty());
  EXPECT_EQ(r.unpaired_consumers.size(), 1u);
  EXPECT_TRUE(r.unpaired_producers.empty());
}

// No producer and consumer would both rather be with each other than with
// their partners (preference: larger counterpart; unpaired is worst).
TEST(Match, PropertyStableByExhaustion) {
  std::mt19937_64 rng(17);
  for (int t = 0; t < 2000; ++t) {
    std::vector<MatchUnit> units;
    const int n = 1 + static_cast<int>(rng() % 8);
    for (int i = 0; i < n; ++i) {
      const double gb = static_cast<double>(static_cast<int>(rng() % 61) - 30);
      units.push_back(unit("u" + std::to_string(i), gb));
    }
    const MatchResult r = match_within_server(units);
    std::map<std::string, Bytes> partner;
    for (const auto& [p, c] : r.pairs) {
      ASSERT_GT(p.r, 0);
      ASSERT_LT(c.r, 0);
      ASSERT_TRUE(partner.emplace(p.model_id, -c.r).second);
      ASSERT_TRUE(partner.emplace(c.model_id, p.r).second);
    }
    for (const auto& p : units) {
      if (p.r <= 0) continue;
      for (const auto& c : units) {
        if (c.r >= 0) continue;
        const bool p_wants = !partner.count(p.model_id) || -c.r > partner[p.model_id];
        const bool c_wants = !partner.count(c.model_id) || p.r > partner[c.model_id];
        ASSERT_FALSE(p_wants && c_wants) << "blocking pair " << p.model_id << "/" << c.model_id << " trial " << t;
      }
    }
  }
}

TEST(Io, InstanceJsonRoundTrip) {
  const PlacementInstance in = four_models();
  const nlohmann::json j = to_json(in);
  EXPECT_EQ(j["servers"], 2);
  EXPECT_EQ(j["models"][2]["r_per_shard_bytes"], -18 * GB);
  const PlacementInstance back = parse_placement_instance(j);
  ASSERT_EQ(back.models.size(), 4u);
  EXPECT_EQ(back.models[3].model_id, "C2");
  EXPECT_EQ(back.gpu_mem, in.gpu_mem);
  nlohmann::json bad = j;
  bad["models"][1]["r_per_shard_bytes"] = 81 * GB;
  EXPECT_THROW(parse_placement_instance(bad), ConfigError);
}

}  // namespace
}  // namespace aquasim
