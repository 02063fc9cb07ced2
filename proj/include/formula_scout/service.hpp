// Copyright 2026 The Formula Scout Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <thread>

#include "formula_scout/recommender.hpp"

namespace formula_scout {

/// Immutable view served to requests.
struct ServiceState {
  std::shared_ptr<const Models> models;
  std::shared_ptr<const IndexedCorpus> index;
  RecommenderConfig config;
};

/// {"predictions":[{"formula","score","provenance":{...}}]}
std::string predictions_json(std::span<const Prediction> predictions);

struct HttpResponse {
  int status = 200;
  std::string body;  // JSON
};

/// Request handling independent of the transport. Readers take a snapshot
/// pointer; POST /workbooks builds a new index and swaps it in.
class Service {
 public:
  Service(Models models, IndexedCorpus index, RecommenderConfig config);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  std::shared_ptr<const ServiceState> snapshot() const;

  /// Routes GET /health, POST /workbooks, GET /workbooks/{id}, POST /predict.
  HttpResponse handle(std::string_view method, std::string_view path, std::string_view body);

  /// Serves on a background thread; returns the bound port (port 0 picks a
  /// free one). Throws std::runtime_error if binding fails.
  int start(const std::string& host, int port);
  /// Blocks serving on the calling thread.
  void listen(const std::string& host, int port);
  void stop();

 private:
  HttpResponse health() const;
  HttpResponse add_workbook(std::string_view body);
  HttpResponse get_workbook(std::string_view id) const;
  HttpResponse predict_request(std::string_view body) const;

  mutable std::mutex snapshot_mu_;
  std::shared_ptr<const ServiceState> state_;
  std::mutex writer_mu_;

  struct Http;
  std::unique_ptr<Http> http_;
  std::thread thread_;
};

}  // namespace formula_scout
