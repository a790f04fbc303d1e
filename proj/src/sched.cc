// Copyright 2026 The aquasim Authors.
// SPDX-License-Identifier: Apache-2.0

#include "aquasim/sched.h"

#include <algorithm>
#include <unordered_map>
#include <unordered_set>

namespace aquasim {

RequestState::RequestState(InferenceRequest r) : request(std::move(r)) {
  if (request.cached_prefix_tokens > 0) {
    prefill_done = request.cached_prefix_tokens;
    kv_location = KvLocation::kSwapped;
  }
}

bool BatchPlan::contains(std::string_view id) const {
  for (const auto& d : decode_slots) {
    if (d == id) return true;
  }
  for (const auto& [p, n] : prefill_allocs) {
    if (p == id) return true;
  }
  return false;
}

std::int64_t BatchPlan::prefill_tokens() const {
  std::int64_t n = 0;
  for (const auto& a : prefill_allocs) n += a.second;
  return n;
}

namespace {

bool earlier(const RequestState* a, const RequestState* b) {
  if (a->request.arrival != b->request.arrival) return a->request.arrival < b->request.arrival;
  return a->id() < b->id();
}

}  // namespace

BatchPlan partition_batch(const SchedulerState& state, int b) {
  if (b < 1) throw DomainError("chunk size must be >= 1");
  const Bytes kv = state.kv_bytes_per_token;
  const Bytes cap = state.kv_capacity;

  std::vector<const RequestState*> decodes;
  std::vector<const RequestState*> prefills;
  std::vector<Bytes> needs;
  for (const RequestState* r : state.runnable) {
    if (r->finished()) continue;
    (r->in_decode() ? decodes : prefills).push_back(r);
    needs.push_back((r->kv_tokens() + 1) * kv);
  }
  std::sort(decodes.begin(), decodes.end(), [](auto* x, auto* y) {
    return x->generated != y->generated ? x->generated < y->generated : earlier(x, y);
  });
  std::sort(prefills.begin(), prefills.end(), [](auto* x, auto* y) {
    return x->prefill_done != y->prefill_done ? x->prefill_done < y->prefill_done : earlier(x, y);
  });

  // (1) the most prompts whose current KV (plus one token) fits at once.
  std::sort(needs.begin(), needs.end());
  std::int64_t fit = 0;
  Bytes acc = 0;
  for (Bytes n : needs) {
    if (acc + n > cap) break;
    acc += n;
    ++fit;
  }
  const std::int64_t d = std::min<std::int64_t>(b, fit);

  BatchPlan plan;
  Bytes used = 0;
  // Hands out up to `budget` prefill tokens to prompts not yet in the plan.
  auto admit = [&](std::int64_t budget) {
    for (const RequestState* r : prefills) {
      if (budget == 0) break;
      if (plan.contains(r->id())) continue;
      const std::int64_t room = (cap - used) / kv - r->kv_tokens();
      std::int64_t t = std::min({budget, r->remaining_prefill(), room});
      // Finishing the prompt also emits the first token, which holds KV too.
      if (t == r->remaining_prefill() && t + 1 > room) --t;
      if (t <= 0) continue;
      plan.prefill_allocs.emplace_back(r->id(), t);
      used += (r->kv_tokens() + t + (t == r->remaining_prefill() ? 1 : 0)) * kv;
      budget -= t;
    }
    return budget;
  };
  // (3) prefill budget p, claimed first.
  admit(b - d);
  // (2) decode slots up to d.
  for (const RequestState* r : decodes) {
    if (static_cast<std::int64_t>(plan.decode_slots.size()) == d) break;
    const Bytes need = (r->kv_tokens() + 1) * kv;
    if (used + need > cap) continue;
    plan.decode_slots.push_back(r->id());
    used += need;
  }
  // (4) unused decode slots top up the chosen prefill prompts.
  std::int64_t spare = d - static_cast<std::int64_t>(plan.decode_slots.size());
  for (std::size_t i = 0; i < plan.prefill_allocs.size() && spare > 0; ++i) {
    auto& [id, t] = plan.prefill_allocs[i];
    const RequestState* r = *std::find_if(prefills.begin(), prefills.end(),
                                          [&](auto* x) { return x->id() == id; });
    const std::int64_t left = r->remaining_prefill() - t;
    const std::int64_t room = (cap - used) / kv;
    std::int64_t extra = std::min({spare, left, room});
    if (extra == left && extra + 1 > room) --extra;
    if (extra <= 0) continue;
    t += extra;
    used += (extra + (extra == left ? 1 : 0)) * kv;
    spare -= extra;
  }
  // Slots still unused go to the next prefill prompts in line; without this a
  // batch of only fresh prompts with d == b would come out empty.
  if (spare > 0) admit(spare);

  plan.total_tokens =
      static_cast<std::int64_t>(plan.decode_slots.size()) + plan.prefill_tokens();
  return plan;
}

RescheduleResult reschedule(SchedulerState& state, int b) {
  RescheduleResult out;
  out.plan = partition_batch(state, b);
  std::unordered_map<std::string_view, std::int64_t> planned;
  for (const auto& d : out.plan.decode_slots) planned[d] = 1;
  for (const auto& [id, t] : out.plan.prefill_allocs) planned[id] = t;

  // KV the plan holds after its first iteration, plus decode growth for the
  // rest of the window.
  const Bytes kv = state.kv_bytes_per_token;
  Bytes used = static_cast<Bytes>(out.plan.decode_slots.size()) * (state.k - 1) * kv;
  std::vector<RequestState*> unplanned;
  for (RequestState* r : state.runnable) {
    auto it = planned.find(r->id());
    if (it == planned.end()) {
      if (r->kv_location == KvLocation::kOnGpu) unplanned.push_back(r);
      continue;
    }
    std::int64_t t = r->kv_tokens() + it->second;
    if (!r->in_decode() && it->second == r->remaining_prefill()) ++t;
    used += t * kv;
    if (r->kv_location == KvLocation::kSwapped) out.page_in.push_back(r->id());
    r->kv_location = KvLocation::kOnGpu;
  }

  // Prompts left out only for lack of budget stay resident while they fit;
  // the most served go first when memory runs short.
  std::stable_sort(unplanned.begin(), unplanned.end(), [](auto* x, auto* y) {
    return x->kv_tokens() != y->kv_tokens() ? x->kv_tokens() < y->kv_tokens() : earlier(x, y);
  });
  for (RequestState* r : unplanned) {
    const Bytes need = r->kv_tokens() * kv;
    if (used + need <= state.kv_capacity) {
      used += need;
    } else if (r->kv_tokens() > 0) {
      r->kv_location = KvLocation::kSwapped;
      out.page_out.push_back(r->id());
    } else {
      r->kv_location = KvLocation::kNone;
    }
  }
  // page_out follows arrival order like page_in.
  std::unordered_map<std::string_view, std::size_t> order;
  for (std::size_t i = 0; i < state.runnable.size(); ++i) order[state.runnable[i]->id()] = i;
  std::sort(out.page_out.begin(), out.page_out.end(),
            [&](const std::string& x, const std::string& y) { return order.at(x) < order.at(y); });
  state.iterations_since_reschedule = 0;
  return out;
}

Bytes fcfs_reserved(const SchedulerState& state) {
  Bytes reserved = 0;
  for (const RequestState* r : state.runnable) {
    if (r->kv_location == KvLocation::kOnGpu) reserved += r->projected_tokens() * state.kv_bytes_per_token;
  }
  return reserved;
}

bool memory_uncontended(const SchedulerState& state) {
  Bytes total = 0;
  for (const RequestState* r : state.runnable) total += r->projected_tokens() * state.kv_bytes_per_token;
  return total <= state.kv_capacity;
}

BatchPlan fcfs_step(SchedulerState& state, int b, std::vector<std::string>* paged_in) {
  if (b < 1) throw DomainError("chunk size must be >= 1");
  BatchPlan plan;
  std::int64_t budget = b;
  for (const RequestState* r : state.runnable) {
    if (budget == 0) break;
    if (r->kv_location == KvLocation::kOnGpu && r->in_decode()) {
      plan.decode_slots.push_back(r->id());
      --budget;
    }
  }
  for (const RequestState* r : state.runnable) {
    if (budget == 0) break;
    if (r->kv_location == KvLocation::kOnGpu && !r->in_decode()) {
      const std::int64_t t = std::min(budget, r->remaining_prefill());
      plan.prefill_allocs.emplace_back(r->id(), t);
      budget -= t;
    }
  }
  Bytes reserved = fcfs_reserved(state);
  for (RequestState* r : state.runnable) {
    if (budget == 0) break;
    if (r->kv_location == KvLocation::kOnGpu) continue;
    const Bytes need = r->projected_tokens() * state.kv_bytes_per_token;
    if (reserved + need > state.kv_capacity) break;
    reserved += need;
    if (r->kv_location == KvLocation::kSwapped && paged_in) paged_in->push_back(r->id());
    r->kv_location = KvLocation::kOnGpu;
    if (r->in_decode()) {
      plan.decode_slots.push_back(r->id());
      --budget;
    } else {
      const std::int64_t t = std::min(budget, r->remaining_prefill());
      plan.prefill_allocs.emplace_back(r->id(), t);
      budget -= t;
    }
  }
  plan.total_tokens = b - budget;
  return plan;
}

BatchPlan fcfs_step(SchedulerState& state, int b) { return fcfs_step(state, b, nullptr); }

std::int64_t kv_growth(const BatchPlan& plan,
                       const std::unordered_map<std::string, RequestState*>& by_id) {
  std::int64_t n = plan.total_tokens;
  for (const auto& [id, t] : plan.prefill_allocs) {
    auto it = by_id.find(id);
    if (it == by_id.end()) throw ConsistencyError("plan names unknown request " + id);
    if (t == it->second->remaining_prefill()) ++n;
  }
  return n;
}

std::vector<std::string> apply_plan(const BatchPlan& plan,
                                    const std::unordered_map<std::string, RequestState*>& by_id,
                                    Seconds end) {
  std::vector<std::string> done;
  auto lookup = [&](const std::string& id) -> RequestState& {
    auto it = by_id.find(id);
    if (it == by_id.end()) throw ConsistencyError("plan names unknown request " + id);
    return *it->second;
  };
  auto finish = [&](RequestState& r) {
    if (r.generated == r.request.output_tokens) {
      r.phase = Phase::kFinished;
      r.finish_time = end;
      done.push_back(r.id());
    }
  };
  for (const auto& id : plan.decode_slots) {
    RequestState& r = lookup(id);
    if (!r.in_decode() || r.finished()) throw ConsistencyError("decode slot for non-decoding " + id);
    ++r.generated;
    r.token_emit_times.push_back(end);
    finish(r);
  }
  for (const auto& [id, t] : plan.prefill_allocs) {
    RequestState& r = lookup(id);
    if (t < 1 || t > r.remaining_prefill()) throw ConsistencyError("bad prefill allocation for " + id);
    r.prefill_done += t;
    r.phase = Phase::kPrefill;
    if (r.in_decode()) {
      r.phase = Phase::kDecode;
      r.generated = 1;
      r.first_token_time = end;
      r.token_emit_times.push_back(end);
      finish(r);
    }
  }
  return done;
}

Policy parse_policy(std::string_view name) {
  static const std::pair<std::string_view, Policy> kNames[] = {
      {"fcfs", Policy::kFcfs},
      {"fcfs-aqua", Policy::kFcfsAqua},
      {"cfs-dram", Policy::kCfsDram},
      {"cfs-aqua", Policy::kCfsAqua},
      {"offload-dram", Policy::kOffloadDram},
      {"offload-aqua", Policy::kOffloadAqua},
      {"fcfs-autoscale", Policy::kFcfsAutoscale},
  };
  for (const auto& [n, p] : kNames) {
    if (n == name) return p;
  }
  std::string valid;
  for (const auto& n : policy_names()) valid += (valid.empty() ? "" : ", ") + n;
  throw ConfigError("scheduler", "unknown scheduler '" + std::string(name) + "' (valid: " + valid + ")");
}

std::string_view to_string(Policy policy) {
  switch (policy) {
    case Policy::kFcfs: return "fcfs";
    case Policy::kFcfsAqua: return "fcfs-aqua";
    case Policy::kCfsDram: return "cfs-dram";
    case Policy::kCfsAqua: return "cfs-aqua";
    case Policy::kOffloadDram: return "offload-dram";
    case Policy::kOffloadAqua: return "offload-aqua";
    case Policy::kFcfsAutoscale: return "fcfs-autoscale";
  }
  return "?";
}

std::vector<std::string> policy_names() {
  return {"fcfs", "fcfs-aqua", "cfs-dram", "cfs-aqua", "offload-dram", "offload-aqua", "fcfs-autoscale"};
}

bool uses_aqua(Policy p) {
  return p == Policy::kFcfsAqua || p == Policy::kCfsAqua || p == Policy::kOffloadAqua;
}
bool is_cfs(Policy p) { return p == Policy::kCfsDram || p == Policy::kCfsAqua; }
bool is_offload(Policy p) { return p == Policy::kOffloadDram || p == Policy::kOffloadAqua; }

Seconds page_cost_bytes(double bytes, PageDirection direction, const SwapHome& home,
                        const GpuId& consumer_gpu, const ServerTopology& topo, int num_layers,
                        bool gather) {
  if (!(bytes > 0)) throw DomainError("paging needs a positive byte count");
  LinkPath path = LinkPath::gpu_to_dram(consumer_gpu);
  if (home.kind == Location::Kind::kDram) {
    if (direction == PageDirection::kIn) path = LinkPath::dram_to_gpu(consumer_gpu);
  } else {
    path = direction == PageDirection::kOut ? LinkPath::gpu_to_gpu(consumer_gpu, home.gpu)
                                            : LinkPath::gpu_to_gpu(home.gpu, consumer_gpu);
  }
  if (gather) {
    const double local = bytes / topo.gpu(consumer_gpu).hbm_bandwidth;
    return 2 * local + transfer_time(path, bytes, 1, topo);
  }
  return transfer_time(path, bytes, 2 * num_layers, topo);
}

Seconds page_cost(const RequestState& request, PageDirection direction, const SwapHome& home,
                  const GpuId& consumer_gpu, const ServerTopology& topo,
                  const ModelProfile& profile, bool gather) {
  const double bytes =
      static_cast<double>(kv_bytes(profile, request.kv_tokens())) / profile.num_shards;
  return page_cost_bytes(bytes, direction, home, consumer_gpu, topo, profile.num_layers, gather);
}

ActivePolicy fallback_policy(const std::vector<SwapHome>& tensor_locations) {
  if (tensor_locations.empty()) return ActivePolicy::kFcfs;
  for (const auto& h : tensor_locations) {
    if (h.kind == Location::Kind::kDram) return ActivePolicy::kFcfs;
  }
  return ActivePolicy::kCfs;
}

}  // namespace aquasim
