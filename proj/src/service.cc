// Copyright 2026 The aquasim Authors.
// SPDX-License-Identifier: Apache-2.0

#include "aquasim/service.h"

#include <thread>
#include <vector>

#include <httplib.h>

#include "json_fields.h"

namespace aquasim {

using nlohmann::json;
using detail::Fields;

namespace {

HttpReply error(int status, std::string code, std::string detail) {
  return {status, {{"error", std::move(code)}, {"detail", std::move(detail)}}};
}

std::vector<std::string_view> split_path(std::string_view path) {
  std::vector<std::string_view> out;
  while (!path.empty()) {
    if (path.front() == '/') {
      path.remove_prefix(1);
      continue;
    }
    const auto slash = path.find('/');
    out.push_back(path.substr(0, slash));
    path = slash == std::string_view::npos ? std::string_view{} : path.substr(slash);
  }
  return out;
}

struct NoRoute {};

}  // namespace

json to_json(const Location& loc) {
  if (loc.is_dram()) return {{"kind", "dram"}};
  return {{"kind", "remote_gpu"}, {"gpu_id", loc.gpu}};
}

Location parse_location(const json& j) {
  Fields f(j, "dest");
  const auto kind = f.need<std::string>("kind");
  Location out;
  if (kind == "dram") {
    out = Location::dram();
  } else if (kind == "remote_gpu") {
    out = Location::remote(f.need<std::string>("gpu_id"));
  } else {
    throw ConfigError("dest.kind", "unknown '" + kind + "' (valid: dram, remote_gpu)");
  }
  f.done();
  return out;
}

json to_json(const AquaTensor& t) {
  json j = {{"tensor_id", t.tensor_id}, {"size", t.size}, {"owner", t.owner}, {"location", to_json(t.location)}};
  if (t.migration) {
    j["migration"] = {{"dest", to_json(t.migration->dest)},
                      {"started_at", t.migration->started_at},
                      {"completes_at", t.migration->completes_at}};
  }
  return j;
}

HttpReply CoordinatorService::handle(std::string_view method, std::string_view path,
                                     std::string_view body) {
  json parsed;
  if (!body.empty()) {
    parsed = json::parse(body, nullptr, false);
    if (parsed.is_discarded()) return error(400, "bad_request", "body is not valid JSON");
  }
  try {
    return dispatch(method, path, parsed);
  } catch (const NoRoute&) {
    return error(404, "not_found", std::string(method) + " " + std::string(path) + " is not a route");
  } catch (const ConfigError& e) {
    return error(400, "bad_request", e.what());
  } catch (const NotFoundError& e) {
    return error(404, "not_found", e.what());
  } catch (const OfferRejected& e) {
    HttpReply r = error(409, "offer_rejected", e.what());
    r.body["allocated"] = e.allocated();
    return r;
  } catch (const CapacityError& e) {
    return error(409, "capacity", e.what());
  } catch (const ProtocolError& e) {
    return error(409, "conflict", e.what());
  } catch (const Error& e) {
    return error(500, "internal", e.what());
  }
}

HttpReply CoordinatorService::dispatch(std::string_view method, std::string_view path, const json& body) {
  const auto seg = split_path(path);
  if (seg.size() < 2 || seg[0] != "v1") throw NoRoute{};
  const std::string_view what = seg[1];
  const bool post = method == "POST", get = method == "GET", del = method == "DELETE";
  const json obj = body.is_null() ? json::object() : body;
  auto fields = [&] { return Fields(obj, ""); };

  if (what == "health" && get && seg.size() == 2) return {200, {{"status", "ok"}}};

  if (what == "offers") {
    if (post && seg.size() == 2) {
      Fields f = fields();
      const auto gpu = f.need<std::string>("gpu_id");
      const auto bytes = f.need<Bytes>("bytes");
      f.done();
      if (bytes < 0) throw ConfigError("bytes", "must be >= 0");
      return {200, {{"offered", coord_.offer(gpu, bytes)}}};
    }
    if (seg.size() == 3) {
      const std::string gpu(seg[2]);
      if (!coord_.topology().has_gpu(gpu)) throw NotFoundError("unknown gpu " + gpu);
      if (del) return {202, {{"pending_tensors", coord_.reclaim(gpu)}}};
      if (get) {
        const OfferState o = coord_.offer_state(gpu);
        return {200,
                {{"gpu_id", gpu},
                 {"offered", o.offered},
                 {"allocated", o.allocated},
                 {"inbound", o.inbound},
                 {"reclaiming", o.reclaiming}}};
      }
    }
  }

  if (what == "consumers" && post && seg.size() == 2) {
    Fields f = fields();
    const auto gpu = f.need<std::string>("gpu_id");
    std::optional<GpuId> producer;
    if (f.has("producer")) producer = f.need<std::string>("producer");
    f.done();
    coord_.register_consumer(gpu, producer);
    json j = {{"gpu_id", gpu}};
    if (producer) j["producer"] = *producer;
    return {201, j};
  }

  if (what == "allocations") {
    if (post && seg.size() == 2) {
      Fields f = fields();
      const auto gpu = f.need<std::string>("consumer_gpu");
      const auto bytes = f.need<Bytes>("bytes");
      f.done();
      if (bytes <= 0) throw ConfigError("bytes", "must be > 0");
      const AllocationResult a = coord_.allocate(gpu, bytes);
      return {201, {{"tensor_id", a.tensor_id}, {"location", to_json(a.location)}}};
    }
    if (del && seg.size() == 3) {
      coord_.free(std::string(seg[2]));
      return {204, nullptr};
    }
  }

  if (what == "tensors" && get && seg.size() == 3) return {200, to_json(coord_.tensor(std::string(seg[2])))};

  if (what == "notices" && get && seg.size() == 3) {
    json orders = json::array();
    for (const auto& o : coord_.poll(std::string(seg[2]))) {
      orders.push_back({{"tensor_id", o.tensor_id}, {"dest", to_json(o.dest)}});
    }
    return {200, {{"orders", orders}}};
  }

  if (what == "migrations" && post) {
    if (seg.size() == 2) {
      Fields f = fields();
      const auto id = f.need<std::string>("tensor_id");
      const Location dest = parse_location(f.raw("dest"));
      const auto now = f.get<double>("now", 0.0);
      f.done();
      if (!(now >= 0)) throw ConfigError("now", "must be >= 0");
      const Seconds t = coord_.migrate(id, dest, now);
      return {202, {{"tensor_id", id}, {"transfer_seconds", t}, {"completes_at", now + t}}};
    }
    if (seg.size() == 4 && seg[3] == "complete") {
      const std::string id(seg[2]);
      coord_.complete_migration(id);
      return {200, to_json(coord_.tensor(id))};
    }
  }

  if (what == "load" && post && seg.size() == 2) {
    Fields f = fields();
    LoadSignal s;
    s.gpu_id = f.need<std::string>("gpu_id");
    s.current_rps = f.need<double>("current_rps");
    s.queue_length = f.need<std::int64_t>("queue_length");
    s.reported_at = f.get<double>("reported_at", 0.0);
    f.done();
    try {
      s.validate();
    } catch (const ProtocolError& e) {
      throw ConfigError("", e.what());
    }
    if (!coord_.topology().has_gpu(s.gpu_id)) throw NotFoundError("unknown gpu " + s.gpu_id);
    coord_.report_load(s);
    return {204, nullptr};
  }

  throw NoRoute{};
}

struct HttpCoordinator::Impl {
  explicit Impl(Coordinator& c) : service(c) {
    auto handler = [this](const httplib::Request& req, httplib::Response& res) {
      const HttpReply r = service.handle(req.method, req.path, req.body);
      res.status = r.status;
      if (r.status != 204) res.set_content(r.body.dump(), "application/json");
    };
    server.Get(R"(/.*)", handler);
    server.Post(R"(/.*)", handler);
    server.Delete(R"(/.*)", handler);
  }

  CoordinatorService service;
  httplib::Server server;
  std::thread thread;
};

HttpCoordinator::HttpCoordinator(Coordinator& coord) : impl_(std::make_unique<Impl>(coord)) {}

HttpCoordinator::~HttpCoordinator() { stop(); }

int HttpCoordinator::start(const std::string& host, int port) {
  int bound = port;
  if (port == 0) {
    bound = impl_->server.bind_to_any_port(host);
  } else if (!impl_->server.bind_to_port(host, port)) {
    bound = -1;
  }
  if (bound < 0) throw Error("cannot bind " + host + ":" + std::to_string(port));
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return bound;
}

void HttpCoordinator::listen(const std::string& host, int port) {
  if (!impl_->server.listen(host, port)) throw Error("cannot listen on " + host + ":" + std::to_string(port));
}

void HttpCoordinator::stop() {
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace aquasim
