// Copyright 2026 The aquasim Authors.
// SPDX-License-Identifier: Apache-2.0

#include "aquasim/experiment.h"

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

namespace aquasim {
namespace {

using nlohmann::json;

json small_config() {
  return json::parse(R"({
    "name": "pair",
    "topology": "h100x8",
    "seed": 5,
    "models": [
      {"id": "big", "model": "llama-70b", "gpus": ["g0", "g1"], "scheduler": "cfs-aqua", "swap_gb": 10,
       "trace": {"preset": "sharegpt-like", "rate": 1.2, "duration_s": 90}},
      {"id": "small", "model": "llama-8b", "gpus": ["g2"], "offer": {"mode": "static", "gb": 20},
       "trace": {"preset": "sharegpt-like", "rate": 1.0, "duration_s": 90}}
    ],
    "pairings": [["g2", "g0"]]
  })");
}

std::string field_of(const json& j) {
  try {
    parse_experiment(j);
  } catch (const ConfigError& e) {
    return e.field();
  }
  return "<accepted>";
}

TEST(Config, ErrorsCarryFieldPaths) {
  json j = small_config();
  j["models"][1]["scheduler"] = "lottery";
  EXPECT_EQ(field_of(j), "models[1].scheduler");

  j = small_config();
  j["models"][0]["trace"]["rate"] = 0;
  EXPECT_EQ(field_of(j), "models[0].trace.rate");

  j = small_config();
  j["models"][0]["trace"]["burst"] = {{"after_requests", -3}};
  EXPECT_EQ(field_of(j), "models[0].trace.burst.after_requests");

  j = small_config();
  j["models"][1]["colour"] = "red";
  EXPECT_EQ(field_of(j), "models[1].colour");

  j = small_config();
  j["models"][1]["id"] = "big";
  EXPECT_EQ(field_of(j), "models[1].id");

  j = small_config();
  j["topology"] = "tpu-pod";
  EXPECT_EQ(field_of(j), "topology");

  j = small_config();
  j["models"][0].erase("trace");
  EXPECT_EQ(field_of(j), "models[0].trace");

  EXPECT_EQ(field_of(small_config()), "<accepted>");
}

TEST(Config, JsonRoundTrip) {
  const ExperimentConfig c = parse_experiment(small_config());
  const ExperimentConfig back = parse_experiment(to_json(c));
  EXPECT_EQ(to_json(back), to_json(c));
  EXPECT_EQ(back.models[1].offer.bytes_per_shard, 20'000'000'000);
  EXPECT_EQ(subject_of(back), "big");
}

TEST(Scenario, BurstCfsShape) {
  const ExperimentConfig c = scenario("burst-cfs");
  EXPECT_EQ(c.subject, "llama-70b");
  const ModelSpec& m = c.models.front();
  ASSERT_TRUE(m.trace && m.trace->burst);
  EXPECT_EQ(m.trace->burst->after_requests, 25);
  EXPECT_DOUBLE_EQ(m.trace->burst->duration, 60);
  EXPECT_DOUBLE_EQ(m.trace->burst->multiplier, 2);
  EXPECT_EQ(m.scheduler, "cfs-aqua");
}

TEST(Scenario, LongPromptUsesEightKPrompts) {
  const ExperimentConfig c = scenario("long-prompt");
  const Trace t = build_trace(*c.models.front().trace, c.seed, "");
  ASSERT_FALSE(t.empty());
  for (const auto& q : t) EXPECT_EQ(q.prompt_tokens, 8192);
}

TEST(Scenario, AllNamesBuildAndUnknownFails) {
  for (const auto& n : scenario_names()) EXPECT_NO_THROW(build_sim(scenario(n))) << n;
  EXPECT_THROW(scenario("flash-crowd"), ConfigError);
}

TEST(Compare, NeedsTwoPolicies) {
  const ExperimentConfig c = parse_experiment(small_config());
  EXPECT_THROW(compare(c, {"cfs-aqua"}), ConfigError);
  EXPECT_THROW(compare(c, {}), ConfigError);
}

TEST(Compare, IdenticalPoliciesGiveIdenticalRows) {
  const Comparison cmp = compare(parse_experiment(small_config()), {"cfs-dram", "cfs-dram"});
  std::istringstream csv(comparison_csv(cmp));
  std::string header, a, b;
  std::getline(csv, header);
  std::getline(csv, a);
  std::getline(csv, b);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.substr(0, 9), "cfs-dram,");
}

// requests.csv carries enough to recompute every latency aggregate.
TEST(Report, RequestsCsvRoundTrip) {
  const MetricsReport r = run_experiment(parse_experiment(small_config()));
  const std::vector<RequestRow> rows = parse_requests_csv(requests_csv(r));
  std::size_t total = 0;
  for (const InstanceReport& in : r.instances) total += in.requests.size();
  ASSERT_GT(total, 50u);
  ASSERT_EQ(rows.size(), total);
  for (const InstanceReport& in : r.instances) {
    if (in.requests.empty()) continue;
    std::vector<RequestRow> mine;
    for (const RequestRow& row : rows) {
      if (row.instance_id == in.instance_id) mine.push_back(row);
    }
    const std::vector<RequestRow> direct = to_rows(in);
    ASSERT_EQ(mine.size(), direct.size()) << in.instance_id;
    for (std::size_t i = 0; i < mine.size(); ++i) {
      EXPECT_EQ(mine[i].request_id, direct[i].request_id);
      EXPECT_EQ(mine[i].ttft_ms, direct[i].ttft_ms);
      EXPECT_EQ(mine[i].rct_ms, direct[i].rct_ms);
      EXPECT_TRUE(mine[i].tpot_ms == direct[i].tpot_ms || (std::isnan(mine[i].tpot_ms) && std::isnan(direct[i].tpot_ms)));
    }
    const LatencySummary a = summarize(mine), b = in.summary;
    EXPECT_EQ(a.requests, b.requests);
    EXPECT_EQ(a.ttft_p50_ms, b.ttft_p50_ms);
    EXPECT_EQ(a.ttft_p99_ms, b.ttft_p99_ms);
    EXPECT_EQ(a.ttft_mean_ms, b.ttft_mean_ms);
    EXPECT_EQ(a.tpot_mean_ms, b.tpot_mean_ms);
    EXPECT_EQ(a.tpot_p99_ms, b.tpot_p99_ms);
    EXPECT_EQ(a.rct_p99_ms, b.rct_p99_ms);
    EXPECT_EQ(a.output_tokens, b.output_tokens);
  }
}

}  // namespace
}  // namespace aquasim
