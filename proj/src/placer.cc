// Copyright 2026 The aquasim Authors.
// SPDX-License-Identifier: Apache-2.0

#include "aquasim/placer.h"

#include <algorithm>
#include <limits>
#include <numeric>
#include <set>

#include "json_fields.h"

namespace aquasim {

using nlohmann::json;

namespace {

int sign(Bytes r) { return r > 0 ? 1 : (r < 0 ? -1 : 0); }

// Floor/ceil division for possibly negative numerators.
Bytes ceil_div(Bytes a, Bytes b) { return a >= 0 ? (a + b - 1) / b : -((-a) / b); }

// Per-server sums kept incrementally by the solvers.
struct Load {
  std::vector<Bytes> mem;
  std::vector<Bytes> eq;
  std::vector<int> used;

  explicit Load(int servers) : mem(servers, 0), eq(servers, 0), used(servers, 0) {}

  void add(const PlacementModel& m, int s, int dir) {
    mem[s] += dir * m.shards * m.r_per_shard;
    eq[s] += dir * m.shards * sign(m.r_per_shard);
    used[s] += dir * m.shards;
  }

  Bytes value(Bytes gpu_mem) const {
    return *std::max_element(mem.begin(), mem.end()) +
           gpu_mem * *std::max_element(eq.begin(), eq.end());
  }

  // Secondary score for local search: flatter servers first.
  double spread(Bytes gpu_mem) const {
    double s = 0;
    for (std::size_t i = 0; i < mem.size(); ++i) {
      const double m = static_cast<double>(mem[i]);
      const double e = static_cast<double>(eq[i]) * static_cast<double>(gpu_mem);
      s += m * m + e * e;
    }
    return s;
  }
};

PlacementAssignment from_model_servers(const PlacementInstance& inst, const std::vector<int>& ms) {
  PlacementAssignment a;
  for (std::size_t m = 0; m < inst.models.size(); ++m) {
    for (int k = 0; k < inst.models[m].shards; ++k) a.shard_server.push_back(ms[m]);
  }
  finish_assignment(inst, a);
  return a;
}

class BranchAndBound {
 public:
  explicit BranchAndBound(const PlacementInstance& inst)
      : inst_(inst), n_(static_cast<int>(inst.models.size())), load_(inst.num_servers) {
    Bytes tot_mem = 0, tot_eq = 0;
    for (const auto& m : inst.models) {
      tot_mem += m.shards * m.r_per_shard;
      tot_eq += m.shards * sign(m.r_per_shard);
    }
    avg_mem_ = ceil_div(tot_mem, inst.num_servers);
    avg_eq_ = ceil_div(tot_eq, inst.num_servers);
    // Sorted per-shard demand left from depth i onward: a server with f free
    // slots can drop at most by the f most negative of them.
    neg_prefix_.resize(n_ + 1);
    for (int i = 0; i <= n_; ++i) {
      std::vector<Bytes> neg;
      for (int j = i; j < n_; ++j) {
        if (inst.models[j].r_per_shard < 0) {
          neg.insert(neg.end(), inst.models[j].shards, inst.models[j].r_per_shard);
        }
      }
      std::sort(neg.begin(), neg.end());
      neg_prefix_[i].assign(1, 0);
      for (Bytes r : neg) neg_prefix_[i].push_back(neg_prefix_[i].back() + r);
    }
    cur_.assign(n_, -1);
  }

  void seed(Bytes ub) { best_value_ = ub; }

  std::vector<int> run() {
    dfs(0);
    return best_;
  }

 private:
  Bytes lower_bound(int depth) const {
    const auto& pre = neg_prefix_[depth];
    const int avail = static_cast<int>(pre.size()) - 1;
    Bytes lm = avg_mem_, le = avg_eq_;
    for (int s = 0; s < inst_.num_servers; ++s) {
      const int f = std::min(avail, inst_.gpus_per_server - load_.used[s]);
      lm = std::max(lm, load_.mem[s] + pre[f]);
      le = std::max<Bytes>(le, load_.eq[s] - f);
    }
    return lm + inst_.gpu_mem * le;
  }

  void dfs(int i) {
    if (i == n_) {
      const Bytes v = load_.value(inst_.gpu_mem);
      // The first full vector reached at a given value is the smallest one.
      if (found_ ? v < best_value_ : v <= best_value_) {
        best_value_ = v;
        best_ = cur_;
        found_ = true;
      }
      return;
    }
    const Bytes lb = lower_bound(i);
    if (lb > best_value_ || (found_ && lb >= best_value_)) return;
    const PlacementModel& m = inst_.models[i];
    bool tried_empty = false;
    for (int s = 0; s < inst_.num_servers; ++s) {
      if (load_.used[s] + m.shards > inst_.gpus_per_server) continue;
      if (load_.used[s] == 0) {
        // Empty servers are interchangeable; the first one stands for all.
        if (tried_empty) continue;
        tried_empty = true;
      }
      load_.add(m, s, +1);
      cur_[i] = s;
      dfs(i + 1);
      load_.add(m, s, -1);
    }
    cur_[i] = -1;
  }

  const PlacementInstance& inst_;
  int n_;
  Load load_;
  Bytes avg_mem_ = 0, avg_eq_ = 0;
  std::vector<std::vector<Bytes>> neg_prefix_;
  std::vector<int> cur_;
  std::vector<int> best_;
  Bytes best_value_ = std::numeric_limits<Bytes>::max();
  bool found_ = false;
};

// Greedy placement in `order`, each model on the server with the lowest
// objective so far. Empty result if some model finds no room.
std::vector<int> greedy_servers(const PlacementInstance& inst, const std::vector<int>& order) {
  const int S = inst.num_servers;
  Load load(S);
  std::vector<int> where(inst.models.size(), -1);
  for (int i : order) {
    const PlacementModel& m = inst.models[i];
    int best_s = -1;
    Bytes best_v = 0;
    double best_spread = 0;
    for (int s = 0; s < S; ++s) {
      if (load.used[s] + m.shards > inst.gpus_per_server) continue;
      load.add(m, s, +1);
      const Bytes v = load.value(inst.gpu_mem);
      const double sp = load.spread(inst.gpu_mem);
      load.add(m, s, -1);
      if (best_s < 0 || v < best_v || (v == best_v && sp < best_spread)) {
        best_s = s;
        best_v = v;
        best_spread = sp;
      }
    }
    if (best_s < 0) return {};
    load.add(m, best_s, +1);
    where[i] = best_s;
  }
  return where;
}

std::vector<int> heuristic_servers(const PlacementInstance& inst) {
  const int n = static_cast<int>(inst.models.size());
  const int S = inst.num_servers;
  auto weight = [&](int i) { return std::abs(inst.models[i].shards * inst.models[i].r_per_shard); };
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int x, int y) { return weight(x) > weight(y); });
  std::vector<int> where = greedy_servers(inst, order);
  if (where.empty()) {
    // Fragmentation: wide models first, then by weight.
    std::stable_sort(order.begin(), order.end(), [&](int x, int y) {
      return inst.models[x].shards != inst.models[y].shards
                 ? inst.models[x].shards > inst.models[y].shards
                 : weight(x) > weight(y);
    });
    where = greedy_servers(inst, order);
  }
  if (where.empty()) throw DomainError("placement: shards do not pack onto the servers");
  Load load(S);
  for (int i = 0; i < n; ++i) load.add(inst.models[i], where[i], +1);

  // Local search: accept a relocation or swap that lowers the objective, or
  // keeps it and flattens the servers. Both keys only decrease, so it ends.
  const long cap = 10L * n * n;
  Bytes cur_v = load.value(inst.gpu_mem);
  double cur_sp = load.spread(inst.gpu_mem);
  auto better = [&](Bytes v, double sp) { return v < cur_v || (v == cur_v && sp < cur_sp - 1e-6 * std::abs(cur_sp)); };
  for (long iter = 0; iter < cap; ++iter) {
    bool moved = false;
    for (int i = 0; i < n && !moved; ++i) {
      const PlacementModel& m = inst.models[i];
      const int from = where[i];
      for (int s = 0; s < S && !moved; ++s) {
        if (s == from || load.used[s] + m.shards > inst.gpus_per_server) continue;
        load.add(m, from, -1);
        load.add(m, s, +1);
        const Bytes v = load.value(inst.gpu_mem);
        const double sp = load.spread(inst.gpu_mem);
        if (better(v, sp)) {
          where[i] = s;
          cur_v = v;
          cur_sp = sp;
          moved = true;
        } else {
          load.add(m, s, -1);
          load.add(m, from, +1);
        }
      }
    }
    for (int i = 0; i < n && !moved; ++i) {
      for (int j = i + 1; j < n && !moved; ++j) {
        const int si = where[i], sj = where[j];
        if (si == sj) continue;
        const PlacementModel& a = inst.models[i];
        const PlacementModel& b = inst.models[j];
        if (load.used[si] - a.shards + b.shards > inst.gpus_per_server ||
            load.used[sj] - b.shards + a.shards > inst.gpus_per_server) {
          continue;
        }
        load.add(a, si, -1);
        load.add(b, sj, -1);
        load.add(a, sj, +1);
        load.add(b, si, +1);
        const Bytes v = load.value(inst.gpu_mem);
        const double sp = load.spread(inst.gpu_mem);
        if (better(v, sp)) {
          std::swap(where[i], where[j]);
          cur_v = v;
          cur_sp = sp;
          moved = true;
        } else {
          load.add(a, sj, -1);
          load.add(b, si, -1);
          load.add(a, si, +1);
          load.add(b, sj, +1);
        }
      }
    }
    if (!moved) break;
  }
  return where;
}

}  // namespace

void PlacementInstance::validate() const {
  if (num_servers < 1) throw ConfigError("servers", "must be >= 1");
  if (gpus_per_server < 1) throw ConfigError("gpus_per_server", "must be >= 1");
  if (gpu_mem <= 0) throw ConfigError("gpu_mem_bytes", "must be > 0");
  std::set<std::string> ids;
  for (std::size_t i = 0; i < models.size(); ++i) {
    const auto& m = models[i];
    const std::string at = "models[" + std::to_string(i) + "]";
    if (m.model_id.empty()) throw ConfigError(at + ".id", "must not be empty");
    if (!ids.insert(m.model_id).second) throw ConfigError(at + ".id", "duplicate id '" + m.model_id + "'");
    if (m.shards < 1) throw ConfigError(at + ".shards", "must be >= 1");
    if (m.shards > gpus_per_server) {
      throw ConfigError(at + ".shards", "exceeds gpus_per_server; shards must share a server");
    }
    if (m.r_per_shard > gpu_mem || m.r_per_shard < -gpu_mem) {
      throw ConfigError(at + ".r_per_shard_bytes", "magnitude exceeds gpu_mem_bytes");
    }
  }
  if (total_shards() > num_servers * gpus_per_server) {
    throw ConfigError("models", std::to_string(total_shards()) + " shards exceed " +
                                    std::to_string(num_servers * gpus_per_server) + " GPUs");
  }
}

int PlacementInstance::total_shards() const {
  int n = 0;
  for (const auto& m : models) n += m.shards;
  return n;
}

std::vector<std::vector<int>> PlacementInstance::shard_groups() const {
  std::vector<std::vector<int>> out;
  int next = 0;
  for (const auto& m : models) {
    out.emplace_back(m.shards);
    std::iota(out.back().begin(), out.back().end(), next);
    next += m.shards;
  }
  return out;
}

std::vector<int> PlacementAssignment::model_servers(const PlacementInstance& inst) const {
  std::vector<int> out;
  for (const auto& g : inst.shard_groups()) {
    int s = -2;
    for (int i : g) {
      const int here = i < static_cast<int>(shard_server.size()) ? shard_server[i] : -1;
      s = s == -2 ? here : (s == here ? s : -1);
    }
    out.push_back(s == -2 ? -1 : s);
  }
  return out;
}

Feasibility feasible(const PlacementInstance& inst, const PlacementAssignment& a) {
  Feasibility f;
  auto fail = [&](std::string v) {
    f.ok = false;
    f.violations.push_back(std::move(v));
  };
  const int n = inst.total_shards();
  if (static_cast<int>(a.shard_server.size()) != n) {
    fail("one server per model: expected " + std::to_string(n) + " shard entries, got " +
         std::to_string(a.shard_server.size()));
    return f;
  }
  const auto groups = inst.shard_groups();
  for (std::size_t m = 0; m < groups.size(); ++m) {
    const std::string& id = inst.models[m].model_id;
    bool placed = true;
    for (std::size_t k = 0; k < groups[m].size(); ++k) {
      const int s = a.shard_server[groups[m][k]];
      if (s < 0 || s >= inst.num_servers) {
        fail("one server per model: shard " + std::to_string(k) + " of " + id +
             " is not on a valid server");
        placed = false;
      }
    }
    if (!placed) continue;
    for (std::size_t k = 1; k < groups[m].size(); ++k) {
      if (a.shard_server[groups[m][k]] != a.shard_server[groups[m][0]]) {
        fail("shards colocated: " + id + " is split across servers " +
             std::to_string(a.shard_server[groups[m][0]]) + " and " +
             std::to_string(a.shard_server[groups[m][k]]));
        break;
      }
    }
  }
  std::vector<int> used(inst.num_servers, 0);
  for (int s : a.shard_server) {
    if (s >= 0 && s < inst.num_servers) ++used[s];
  }
  for (int s = 0; s < inst.num_servers; ++s) {
    if (used[s] > inst.gpus_per_server) {
      fail("server capacity: server " + std::to_string(s) + " holds " + std::to_string(used[s]) +
           " shards on " + std::to_string(inst.gpus_per_server) + " GPUs");
    }
  }
  if (!a.shard_gpu.empty()) {
    if (static_cast<int>(a.shard_gpu.size()) != n) {
      fail("one shard per GPU: expected " + std::to_string(n) + " GPU entries");
      return f;
    }
    std::set<std::pair<int, int>> taken;
    for (int i = 0; i < n; ++i) {
      const int g = a.shard_gpu[i];
      if (g < 0 || g >= inst.gpus_per_server) {
        fail("one shard per GPU: shard " + std::to_string(i) + " has GPU index " + std::to_string(g));
      } else if (!taken.insert({a.shard_server[i], g}).second) {
        fail("one shard per GPU: server " + std::to_string(a.shard_server[i]) + " GPU " +
             std::to_string(g) + " holds two shards");
      }
    }
  }
  return f;
}

Bytes objective(const PlacementInstance& inst, const std::vector<int>& model_server) {
  if (model_server.size() != inst.models.size()) {
    throw DomainError("objective: expected one server per model");
  }
  Load load(inst.num_servers);
  for (std::size_t m = 0; m < inst.models.size(); ++m) {
    const int s = model_server[m];
    if (s < 0 || s >= inst.num_servers) throw DomainError("objective: model " + inst.models[m].model_id + " unplaced");
    load.add(inst.models[m], s, +1);
  }
  for (int s = 0; s < inst.num_servers; ++s) {
    if (load.used[s] > inst.gpus_per_server) {
      throw DomainError("objective: server " + std::to_string(s) + " over capacity");
    }
  }
  return load.value(inst.gpu_mem);
}

Bytes objective(const PlacementInstance& inst, const PlacementAssignment& a) {
  PlacementAssignment servers_only = a;
  servers_only.shard_gpu.clear();
  const Feasibility f = feasible(inst, servers_only);
  if (!f.ok) throw DomainError("objective: infeasible assignment: " + f.violations.front());
  return objective(inst, a.model_servers(inst));
}

std::vector<int> deficit_servers(const PlacementInstance& inst, const PlacementAssignment& a) {
  std::vector<Bytes> mem(inst.num_servers, 0);
  const auto ms = a.model_servers(inst);
  for (std::size_t m = 0; m < ms.size(); ++m) {
    if (ms[m] >= 0) mem[ms[m]] += inst.models[m].shards * inst.models[m].r_per_shard;
  }
  std::vector<int> out;
  for (int s = 0; s < inst.num_servers; ++s) {
    if (mem[s] < 0) out.push_back(s);
  }
  return out;
}

PlacementAssignment solve_exact(const PlacementInstance& inst) {
  inst.validate();
  if (inst.total_shards() > kExactShardLimit) {
    throw RangeError("exact placement handles at most " + std::to_string(kExactShardLimit) +
                     " shards (got " + std::to_string(inst.total_shards()) +
                     "); use the heuristic mode");
  }
  if (inst.models.empty()) return from_model_servers(inst, {});
  BranchAndBound bb(inst);
  try {
    bb.seed(objective(inst, heuristic_servers(inst)));
  } catch (const DomainError&) {
    // Greedy got stuck on fragmentation; search unbounded.
  }
  const std::vector<int> best = bb.run();
  if (best.empty()) throw DomainError("placement: no feasible assignment");
  return from_model_servers(inst, best);
}

PlacementAssignment solve_heuristic(const PlacementInstance& inst) {
  inst.validate();
  return from_model_servers(inst, heuristic_servers(inst));
}

MatchResult match_within_server(std::vector<MatchUnit> units) {
  std::vector<MatchUnit> producers, consumers;
  for (auto& u : units) {
    if (u.r > 0) {
      producers.push_back(std::move(u));
    } else if (u.r < 0) {
      consumers.push_back(std::move(u));
    }
  }
  auto rank = [](const MatchUnit& x, const MatchUnit& y) {
    const Bytes ax = x.r < 0 ? -x.r : x.r;
    const Bytes ay = y.r < 0 ? -y.r : y.r;
    if (ax != ay) return ax > ay;
    if (x.model_id != y.model_id) return x.model_id < y.model_id;
    return x.where.shard < y.where.shard;
  };
  std::sort(producers.begin(), producers.end(), rank);
  std::sort(consumers.begin(), consumers.end(), rank);
  MatchResult out;
  const std::size_t k = std::min(producers.size(), consumers.size());
  for (std::size_t i = 0; i < k; ++i) out.pairs.emplace_back(producers[i], consumers[i]);
  out.unpaired_producers.assign(producers.begin() + k, producers.end());
  out.unpaired_consumers.assign(consumers.begin() + k, consumers.end());
  return out;
}

void finish_assignment(const PlacementInstance& inst, PlacementAssignment& a) {
  const auto groups = inst.shard_groups();
  a.shard_gpu.assign(a.shard_server.size(), 0);
  std::vector<int> next(inst.num_servers, 0);
  std::vector<std::vector<MatchUnit>> per_server(inst.num_servers);
  for (std::size_t m = 0; m < groups.size(); ++m) {
    for (std::size_t k = 0; k < groups[m].size(); ++k) {
      const int i = groups[m][k];
      const int s = a.shard_server[i];
      a.shard_gpu[i] = next[s]++;
      per_server[s].push_back({inst.models[m].model_id,
                               {static_cast<int>(m), static_cast<int>(k), s, a.shard_gpu[i]},
                               inst.models[m].r_per_shard});
    }
  }
  a.pairs.clear();
  a.dram_fallback.clear();
  for (int s = 0; s < inst.num_servers; ++s) {
    MatchResult r = match_within_server(per_server[s]);
    for (auto& [p, c] : r.pairs) a.pairs.push_back({s, p.where, c.where});
    for (auto& c : r.unpaired_consumers) a.dram_fallback.push_back(c.where);
  }
  a.objective = objective(inst, a.model_servers(inst));
}

PlacementInstance parse_placement_instance(const json& j) {
  detail::Fields f(j, "");
  PlacementInstance inst;
  inst.num_servers = f.need<int>("servers");
  inst.gpus_per_server = f.need<int>("gpus_per_server");
  inst.gpu_mem = f.need<Bytes>("gpu_mem_bytes");
  const json& models = f.raw("models");
  if (!models.is_array()) throw ConfigError("models", "must be an array");
  for (std::size_t i = 0; i < models.size(); ++i) {
    detail::Fields mf(models[i], "models[" + std::to_string(i) + "]");
    PlacementModel m;
    m.model_id = mf.need<std::string>("id");
    m.shards = mf.get<int>("shards", 1);
    m.r_per_shard = mf.need<Bytes>("r_per_shard_bytes");
    mf.done();
    inst.models.push_back(std::move(m));
  }
  f.done();
  inst.validate();
  return inst;
}

json to_json(const PlacementInstance& inst) {
  json models = json::array();
  for (const auto& m : inst.models) {
    models.push_back({{"id", m.model_id}, {"shards", m.shards}, {"r_per_shard_bytes", m.r_per_shard}});
  }
  return {{"servers", inst.num_servers},
          {"gpus_per_server", inst.gpus_per_server},
          {"gpu_mem_bytes", inst.gpu_mem},
          {"models", models}};
}

json to_json(const PlacementInstance& inst, const PlacementAssignment& a) {
  auto shard_json = [&](const PlacedShard& p) {
    return json{{"model", inst.models[p.model].model_id}, {"shard", p.shard}, {"gpu", p.gpu}};
  };
  json models = json::array();
  const auto groups = inst.shard_groups();
  for (std::size_t m = 0; m < groups.size(); ++m) {
    json gpus = json::array();
    for (int i : groups[m]) gpus.push_back(a.shard_gpu.empty() ? -1 : a.shard_gpu[i]);
    models.push_back({{"id", inst.models[m].model_id},
                      {"server", a.shard_server[groups[m].front()]},
                      {"gpus", gpus}});
  }
  json pairs = json::array();
  for (const auto& p : a.pairs) {
    pairs.push_back({{"server", p.server}, {"producer", shard_json(p.producer)}, {"consumer", shard_json(p.consumer)}});
  }
  json fallback = json::array();
  for (const auto& c : a.dram_fallback) fallback.push_back(shard_json(c));
  return {{"objective_bytes", a.objective},
          {"models", models},
          {"pairs", pairs},
          {"dram_fallback", fallback},
          {"deficit_servers", deficit_servers(inst, a)}};
}

}  // namespace aquasim
