// Copyright 2026 The aquasim Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>
#include <string>
#include <string_view>

#include <json.hpp>

#include "aquasim/aquamem.h"

namespace aquasim {

struct HttpReply {
  int status = 200;
  nlohmann::json body;  // null for 204
};

// The coordinator's JSON-over-HTTP contract, independent of any transport.
//
//   POST   /v1/offers                {"gpu_id","bytes"}            200 {"offered"} | 409
//   GET    /v1/offers/{gpu}                                        200 offer state
//   DELETE /v1/offers/{gpu}          reclaim                       202 {"pending_tensors"}
//   POST   /v1/consumers             {"gpu_id","producer"?}        201
//   POST   /v1/allocations           {"consumer_gpu","bytes"}      201 {"tensor_id","location"}
//   DELETE /v1/allocations/{id}                                    204
//   GET    /v1/tensors/{id}                                        200 tensor
//   GET    /v1/notices/{gpu}                                       200 {"orders"}
//   POST   /v1/migrations            {"tensor_id","dest","now"?}   202 {"transfer_seconds","completes_at"}
//   POST   /v1/migrations/{id}/complete                            200 tensor
//   POST   /v1/load                  LoadSignal                    204
//   GET    /v1/health                                              200
//
// Errors are {"error","detail"}: 400 for malformed bodies, 404 for unknown
// routes and ids, 409 for protocol conflicts (offer below allocation,
// migrating tensors, full destinations).
class CoordinatorService {
 public:
  explicit CoordinatorService(Coordinator& coord) : coord_(coord) {}

  HttpReply handle(std::string_view method, std::string_view path, std::string_view body);

 private:
  HttpReply dispatch(std::string_view method, std::string_view path, const nlohmann::json& body);

  Coordinator& coord_;
};

nlohmann::json to_json(const Location& loc);
Location parse_location(const nlohmann::json& j);
nlohmann::json to_json(const AquaTensor& t);

// Serves a CoordinatorService over HTTP on a background thread.
class HttpCoordinator {
 public:
  explicit HttpCoordinator(Coordinator& coord);
  ~HttpCoordinator();
  HttpCoordinator(const HttpCoordinator&) = delete;
  HttpCoordinator& operator=(const HttpCoordinator&) = delete;

  // Port 0 picks a free port. Returns the bound port; throws Error on failure.
  int start(const std::string& host, int port);
  // Blocks in the calling thread instead.
  void listen(const std::string& host, int port);
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace aquasim
