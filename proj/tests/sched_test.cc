// Copyright 2026 The aquasim Authors.
// SPDX-License-Identifier: Apache-2.0

#include "aquasim/sched.h"

#include <gtest/gtest.h>

#include "aquasim/engine.h"
#include "support/sched_harness.h"

namespace aquasim {
namespace {

using testing::check_plan;

// Four prompts on memory that holds three of them at full prompt length:
// A and B decoding (50 and 10 tokens out), C then D waiting to prefill.
struct FourPrompts {
  RequestState a{InferenceRequest{"A", 0.0, 100, 400, 0}};
  RequestState b{InferenceRequest{"B", 0.1, 100, 400, 0}};
  RequestState c{InferenceRequest{"C", 0.2, 800, 50, 0}};
  RequestState d{InferenceRequest{"D", 0.3, 600, 50, 0}};
  SchedulerState st;

  FourPrompts() {
    for (auto* r : {&a, &b}) {
      r->prefill_done = r->request.prompt_tokens;
      r->phase = Phase::kDecode;
      r->kv_location = KvLocation::kOnGpu;
    }
    a.generated = 50;
    b.generated = 10;
    st.runnable = {&a, &b, &c, &d};
    st.kv_bytes_per_token = 1;
    st.kv_capacity = 1000;  // A 151 + B 111 + D 601 fit; adding C (801) does not
    st.k = 8;
  }
  std::unordered_map<std::string, RequestState*> by_id() { return {{"A", &a}, {"B", &b}, {"C", &c}, {"D", &d}}; }
};

TEST(Partition, FourPromptExact) {
  FourPrompts f;
  const BatchPlan p = partition_batch(f.st, 512);
  EXPECT_EQ(p.decode_slots, (std::vector<std::string>{"B", "A"}));
  EXPECT_EQ(p.prefill_allocs, (std::vector<std::pair<std::string, std::int64_t>>{{"C", 510}}));
  EXPECT_EQ(p.total_tokens, 512);
  EXPECT_FALSE(p.contains("D"));
}

TEST(Partition, WaitingPromptAdmittedByLeastService) {
  FourPrompts f;
  auto by_id = f.by_id();
  RescheduleResult first = reschedule(f.st, 512);
  EXPECT_TRUE(first.page_out.empty());
  std::unordered_set<std::string> window{"A", "B", "C"};
  BatchPlan plan = first.plan;
  for (int i = 0; i < f.st.k; ++i) {
    apply_plan(plan, by_id, 0);
    SchedulerState win = f.st;
    win.runnable = {&f.a, &f.b, &f.c};
    plan = partition_batch(win, 512);
  }
  ASSERT_TRUE(f.c.in_decode());
  ASSERT_EQ(f.d.prefill_done, 0);
  const RescheduleResult next = reschedule(f.st, 512);
  // D has had no service, so it prefills now.
  ASSERT_FALSE(next.plan.prefill_allocs.empty());
  EXPECT_EQ(next.plan.prefill_allocs.front().first, "D");
  // D's 510 tokens next to B, A and C (119 + 152 + 808) overflow 1000 bytes.
  // Evicting A or B alone is not enough; C is the only decode whose eviction
  // makes room, so C goes and the other two keep decoding.
  EXPECT_GT(510 + 119 + 152 + 808 - 152, 1000);
  EXPECT_GT(510 + 119 + 152 + 808 - 119, 1000);
  EXPECT_LE(510 + 119 + 152, 1000);
  EXPECT_EQ(next.plan.decode_slots, (std::vector<std::string>{"B", "A"}));
  EXPECT_EQ(next.plan.prefill_allocs, (std::vector<std::pair<std::string, std::int64_t>>{{"D", 510}}));
  EXPECT_EQ(next.page_out, std::vector<std::string>{"C"});
  EXPECT_EQ(f.c.kv_tokens(), 807);
  EXPECT_EQ(check_plan(f.st, next.plan, 512), "");
}

TEST(Partition, OnlyDecodes) {
  std::vector<RequestState> rs;
  for (int i = 0; i < 5; ++i) {
    rs.emplace_back(InferenceRequest{"r" + std::to_string(i), 0.0, 10, 20, 0});
    rs.back().prefill_done = 10;
    rs.back().generated = 1 + i;
    rs.back().phase = Phase::kDecode;
  }
  SchedulerState st;
  for (auto& r : rs) st.runnable.push_back(&r);
  st.kv_bytes_per_token = 1;
  st.kv_capacity = 1'000'000;
  const BatchPlan p = partition_batch(st, 512);
  EXPECT_EQ(p.decode_slots.size(), 5u);
  EXPECT_TRUE(p.prefill_allocs.empty());
  EXPECT_EQ(p.total_tokens, 5);
}

TEST(Partition, DemandLimitedPrefill) {
  RequestState x(InferenceRequest{"X", 0.0, 100, 5, 0});
  SchedulerState st;
  st.runnable = {&x};
  st.kv_bytes_per_token = 1;
  st.kv_capacity = 10'000;
  const BatchPlan p = partition_batch(st, 512);
  EXPECT_EQ(p.prefill_allocs, (std::vector<std::pair<std::string, std::int64_t>>{{"X", 100}}));
  EXPECT_EQ(p.total_tokens, 100);
}

TEST(Partition, EmptyOnlyWhenNothingRunnable) {
  SchedulerState st;
  st.kv_capacity = 100;
  EXPECT_TRUE(partition_batch(st, 512).empty());
  EXPECT_THROW(partition_batch(st, 0), DomainError);
}

TEST(Partition, FreshPromptsWithSmallBudget) {
  // Thirteen queued prompts all fit, so d = b = 11; the unused decode slots
  // must still reach the prefill queue.
  std::vector<std::unique_ptr<RequestState>> rs;
  SchedulerState st;
  for (int i = 0; i < 13; ++i) {
    rs.push_back(std::make_unique<RequestState>(InferenceRequest{"r" + std::to_string(i), 0.0, 79, 28, 0}));
    st.runnable.push_back(rs.back().get());
  }
  st.kv_bytes_per_token = 1;
  st.kv_capacity = 963;
  const BatchPlan p = partition_batch(st, 11);
  EXPECT_EQ(p.prefill_allocs, (std::vector<std::pair<std::string, std::int64_t>>{{"r0", 11}}));
  EXPECT_EQ(p.total_tokens, 11);
}

TEST(Partition, PropertyLeastServiceBudgetMemory) {
  for (std::uint64_t seed = 1; seed <= 2000; ++seed) {
    auto s = testing::random_snapshot(seed);
    const BatchPlan p = partition_batch(s.state, s.b);
    ASSERT_EQ(check_plan(s.state, p, s.b), "") << "seed " << seed;
  }
}

TEST(Reschedule, PropertyNoStarvation) {
  for (std::uint64_t seed = 1; seed <= 500; ++seed) {
    const auto r = testing::starvation_run(seed);
    ASSERT_EQ(r.error, "") << "seed " << seed;
    ASSERT_LE(r.intervals, r.bound) << "seed " << seed;
  }
}

TEST(Reschedule, PropertyBoundedUnfairnessUnderTightBudget) {
  for (std::uint64_t seed = 1; seed <= 500; ++seed) {
    ASSERT_EQ(testing::starvation_run(seed, true).error, "") << "seed " << seed;
  }
}

TEST(Reschedule, NothingPagedWhenEverythingFits) {
  std::vector<std::unique_ptr<RequestState>> rs;
  SchedulerState st;
  for (int i = 0; i < 6; ++i) {
    rs.push_back(std::make_unique<RequestState>(InferenceRequest{"r" + std::to_string(i), 0.0, 300, 30, 0}));
    st.runnable.push_back(rs.back().get());
  }
  std::unordered_map<std::string, RequestState*> by_id;
  for (auto& r : rs) by_id[r->id()] = r.get();
  st.kv_bytes_per_token = 1;
  st.kv_capacity = 6 * 330 + 100;
  st.k = 4;
  for (int round = 0; round < 40 && !st.runnable.empty(); ++round) {
    const RescheduleResult r = reschedule(st, 512);
    EXPECT_TRUE(r.page_out.empty());
    EXPECT_TRUE(r.page_in.empty());
    apply_plan(r.plan, by_id, 0);
    for (const auto& id : r.plan.decode_slots) EXPECT_FALSE(by_id[id]->finished() && false);
    st.runnable.erase(std::remove_if(st.runnable.begin(), st.runnable.end(), [](auto* x) { return x->finished(); }),
                      st.runnable.end());
  }
  EXPECT_TRUE(st.runnable.empty());
}

TEST(Reschedule, FinishedNeverListed) {
  RequestState a(InferenceRequest{"a", 0.0, 5, 1, 0});
  RequestState b(InferenceRequest{"b", 0.0, 5, 3, 0});
  std::unordered_map<std::string, RequestState*> by_id{{"a", &a}, {"b", &b}};
  SchedulerState st;
  st.runnable = {&a, &b};
  st.kv_bytes_per_token = 1;
  st.kv_capacity = 100;
  apply_plan(reschedule(st, 512).plan, by_id, 1.0);
  ASSERT_TRUE(a.finished());
  st.runnable = {&b};
  const RescheduleResult r = reschedule(st, 512);
  EXPECT_FALSE(r.plan.contains("a"));
  EXPECT_TRUE(std::find(r.page_out.begin(), r.page_out.end(), "a") == r.page_out.end());
}

TEST(Fcfs, AdmitsInOrderUntilFullAndNeverPreempts) {
  std::vector<std::unique_ptr<RequestState>> rs;
  SchedulerState st;
  for (int i = 0; i < 5; ++i) {
    rs.push_back(std::make_unique<RequestState>(InferenceRequest{"r" + std::to_string(i), 0.1 * i, 200, 100, 0}));
    st.runnable.push_back(rs.back().get());
  }
  st.kv_bytes_per_token = 1;
  st.kv_capacity = 3 * 300;
  const BatchPlan p = fcfs_step(st, 512);
  EXPECT_EQ(p.prefill_allocs,
            (std::vector<std::pair<std::string, std::int64_t>>{{"r0", 200}, {"r1", 200}, {"r2", 112}}));
  EXPECT_EQ(rs[3]->kv_location, KvLocation::kNone);
  EXPECT_EQ(fcfs_reserved(st), 900);
  std::unordered_map<std::string, RequestState*> by_id;
  for (auto& r : rs) by_id[r->id()] = r.get();
  apply_plan(p, by_id, 0);
  // Memory is full: only the admitted prompts progress, decodes first.
  const BatchPlan q = fcfs_step(st, 512);
  EXPECT_EQ(q.decode_slots, (std::vector<std::string>{"r0", "r1"}));
  EXPECT_EQ(q.prefill_allocs, (std::vector<std::pair<std::string, std::int64_t>>{{"r2", 88}}));
  EXPECT_EQ(rs[3]->kv_location, KvLocation::kNone);
}

TEST(Fcfs, SinglePromptMatchesPartition) {
  RequestState x(InferenceRequest{"x", 0.0, 700, 5, 0});
  RequestState y = x;
  SchedulerState a, b;
  a.runnable = {&x};
  b.runnable = {&y};
  a.kv_bytes_per_token = b.kv_bytes_per_token = 1;
  a.kv_capacity = b.kv_capacity = 10'000;
  EXPECT_EQ(fcfs_step(a, 512), partition_batch(b, 512));
}

TEST(PageCost, WorkedExamples) {
  const LinkParams nv = links::a100_nvlink();
  const ServerTopology t("s", {{"g0", 80'000'000'000, 2e12, "s"}, {"g1", 80'000'000'000, 2e12, "s"}}, nv,
                         links::pcie_gen5(), 1'500'000'000'000);
  const double kv = 320e6;
  const double bw = 250e9 * kv / (kv + 16e6);
  const double gathered = page_cost_bytes(kv, PageDirection::kOut, Location::remote("g1"), "g0", t, 80, true);
  EXPECT_NEAR(gathered, 2 * kv / 2e12 + 10e-6 + kv / bw, 1e-12);
  EXPECT_NEAR(gathered, 1.67e-3, 0.01e-3);
  const double scattered = page_cost_bytes(kv, PageDirection::kOut, Location::remote("g1"), "g0", t, 80, false);
  EXPECT_NEAR(scattered, 13.1e-3, 0.05e-3);
  const double pcie = page_cost_bytes(kv, PageDirection::kIn, Location::dram(), "g0", t, 80, true);
  EXPECT_NEAR(pcie - 2 * kv / 2e12 - 10e-6, kv / (50e9 * kv / (kv + 4e6)), 1e-12);
  EXPECT_LT(gathered, pcie);
}

TEST(PageCost, UsesShardShareOfKv) {
  ModelProfile m = model_preset("llama-70b", "h100");
  RequestState r(InferenceRequest{"r", 0.0, 1000, 10, 0});
  r.prefill_done = 1000;
  const ServerTopology t = topology_preset("h100x8");
  const double bytes = 1000.0 * m.kv_bytes_per_token / 2;
  EXPECT_DOUBLE_EQ(page_cost(r, PageDirection::kOut, Location::dram(), "g0", t, m),
                   page_cost_bytes(bytes, PageDirection::kOut, Location::dram(), "g0", t, m.num_layers, true));
}

TEST(Fallback, FollowsTensorLocations) {
  EXPECT_EQ(fallback_policy({Location::remote("g2")}), ActivePolicy::kCfs);
  EXPECT_EQ(fallback_policy({Location::remote("g2"), Location::dram()}), ActivePolicy::kFcfs);
  EXPECT_EQ(fallback_policy({}), ActivePolicy::kFcfs);
}

TEST(Policy, NamesRoundTrip) {
  for (const auto& n : policy_names()) EXPECT_EQ(to_string(parse_policy(n)), n);
  try {
    parse_policy("lottery");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("cfs-aqua"), std::string::npos);
  }
}

// With memory never contended, CFS runs the same plan sequence as FCFS.
TEST(Cfs, EqualsFcfsWithoutContention) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto make = [&](Policy p) {
      SimConfig sim;
      sim.topology = topology_preset("h100x8");
      sim.record_plans = true;
      InstanceConfig in;
      in.instance_id = "m";
      in.profile = model_preset("llama-8b", "h100");
      in.gpus = {"g0"};
      in.policy = p;
      in.trace = generate_trace(trace_preset("sharegpt-like", 0.5, 60, seed));
      sim.instances.push_back(in);
      return run(sim);
    };
    const MetricsReport f = make(Policy::kFcfs), c = make(Policy::kCfsDram);
    const auto& fp = f.instance("m").plans;
    const auto& cp = c.instance("m").plans;
    ASSERT_FALSE(fp.empty());
    ASSERT_EQ(fp.size(), cp.size()) << seed;
    for (std::size_t i = 0; i < fp.size(); ++i) {
      ASSERT_EQ(fp[i].plan, cp[i].plan) << "seed " << seed << " iteration " << i;
      ASSERT_EQ(fp[i].start, cp[i].start);
    }
    EXPECT_EQ(c.instance("m").reschedules, 0);
  }
}

}  // namespace
}  // namespace aquasim
