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

#include "formula_scout/service.hpp"

#include <stdexcept>

#include "formula_scout/error.hpp"
#include "formula_scout/workbook_io.hpp"

// Workbook dumps arrive without a JSON content type from plain clients.
#define CPPHTTPLIB_FORM_URL_ENCODED_PAYLOAD_MAX_LENGTH (256u << 20)
#include "httplib.h"
#include "json.hpp"

namespace formula_scout {

using nlohmann::json;
using nlohmann::ordered_json;

std::string predictions_json(std::span<const Prediction> predictions) {
  ordered_json list = ordered_json::array();
  for (const auto& p : predictions) {
    ordered_json params = ordered_json::array();
    for (const auto& s : p.provenance.parameters) {
      params.push_back({{"reference", to_a1(s.reference)},
                        {"resolved", to_a1(s.resolved)},
                        {"distance", s.distance},
                        {"fallback", s.fallback},
                        {"copied", s.copied}});
    }
    list.push_back({{"formula", p.formula},
                    {"score", p.score},
                    {"provenance",
                     {{"workbook_id", p.provenance.workbook_id},
                      {"sheet", p.provenance.sheet},
                      {"cell", to_a1(p.provenance.cell)},
                      {"reference_formula", p.provenance.reference_formula},
                      {"sheet_distance", p.provenance.sheet_distance},
                      {"region_distance", p.provenance.region_distance},
                      {"parameters", std::move(params)}}}});
  }
  ordered_json out;
  out["predictions"] = std::move(list);
  return out.dump();
}

namespace {

HttpResponse error(int status, const std::string& message) {
  return {status, json{{"error", message}}.dump()};
}

}  // namespace

struct Service::Http {
  httplib::Server server;
};

Service::Service(Models models, IndexedCorpus index, RecommenderConfig config) {
  config.validate();
  state_ = std::make_shared<const ServiceState>(ServiceState{std::make_shared<const Models>(std::move(models)),
                                                             std::make_shared<const IndexedCorpus>(std::move(index)),
                                                             config});
}

Service::~Service() { stop(); }

std::shared_ptr<const ServiceState> Service::snapshot() const {
  std::lock_guard lock(snapshot_mu_);
  return state_;
}

HttpResponse Service::handle(std::string_view method, std::string_view path, std::string_view body) {
  try {
    if (method == "GET" && path == "/health") return health();
    if (method == "POST" && path == "/workbooks") return add_workbook(body);
    if (method == "GET" && path.starts_with("/workbooks/")) return get_workbook(path.substr(11));
    if (method == "POST" && path == "/predict") return predict_request(body);
    return error(404, "no route for " + std::string(method) + " " + std::string(path));
  } catch (const std::exception& e) {
    return error(500, e.what());
  }
}

HttpResponse Service::health() const {
  const auto s = snapshot();
  return {200, ordered_json{{"status", "ok"}, {"sheets", s->index->sheet_count()}, {"formulas", s->index->formula_count()}}
                   .dump()};
}

HttpResponse Service::add_workbook(std::string_view body) {
  Workbook wb;
  try {
    wb = load_workbook(body);
  } catch (const SchemaError& e) {
    return error(400, e.what());
  }
  wb.id = content_hash(wb);
  std::lock_guard writer(writer_mu_);
  const auto current = snapshot();
  if (current->index->workbooks.count(wb.id) == 0) {
    auto next = std::make_shared<IndexedCorpus>(*current->index);
    index_workbook(*next, wb, *current->models);
    auto state = std::make_shared<const ServiceState>(ServiceState{current->models, std::move(next), current->config});
    std::lock_guard lock(snapshot_mu_);
    state_ = std::move(state);
  }
  return {200, json{{"id", wb.id}}.dump()};
}

HttpResponse Service::get_workbook(std::string_view id) const {
  const auto s = snapshot();
  const auto it = s->index->workbooks.find(id);
  if (it == s->index->workbooks.end()) return error(404, "unknown workbook " + std::string(id));
  return {200, dump_workbook(*it->second)};
}

HttpResponse Service::predict_request(std::string_view body) const {
  const auto s = snapshot();
  json req;
  try {
    req = json::parse(body);
  } catch (const json::parse_error& e) {
    return error(400, std::string("malformed JSON: ") + e.what());
  }
  if (!req.is_object()) return error(400, "request must be a JSON object");
  if (!req.contains("sheet") || !req["sheet"].is_string()) return error(400, "missing string field 'sheet'");
  if (!req.contains("cell") || !req["cell"].is_string()) return error(400, "missing string field 'cell'");

  RecommenderConfig cfg = s->config;
  try {
    if (req.contains("top_n")) cfg.top_n = req["top_n"].get<int>();
    if (req.contains("k")) cfg.K = req["k"].get<int>();
    if (req.contains("d")) cfg.d = req["d"].get<int>();
    if (req.contains("theta")) cfg.theta = req["theta"].get<double>();
    cfg.validate();
  } catch (const std::exception& e) {
    return error(400, std::string("bad option: ") + e.what());
  }

  CellAddress cell;
  try {
    cell = parse_a1(req["cell"].get<std::string>());
  } catch (const ParseError& e) {
    return error(400, std::string("bad cell address: ") + e.what());
  }

  std::shared_ptr<const Workbook> wb;
  if (req.contains("workbook")) {
    if (!req["workbook"].is_object()) return error(400, "'workbook' must be a canonical dump object");
    try {
      wb = std::make_shared<const Workbook>(load_workbook(req["workbook"].dump()));
    } catch (const SchemaError& e) {
      return error(400, std::string("/workbook") + e.what());
    }
  } else if (req.contains("workbook_id") && req["workbook_id"].is_string()) {
    const auto it = s->index->workbooks.find(req["workbook_id"].get<std::string>());
    if (it == s->index->workbooks.end()) return error(404, "unknown workbook " + req["workbook_id"].get<std::string>());
    wb = it->second;
  } else {
    return error(400, "one of 'workbook_id' or 'workbook' is required");
  }
  const Sheet* sheet = wb->find_sheet(req["sheet"].get<std::string>());
  if (!sheet) return error(404, "unknown sheet " + req["sheet"].get<std::string>());
  if (!sheet->in_bounds(cell)) return error(422, "cell " + to_a1(cell) + " is outside the sheet");
  const auto preds = predict(*sheet, cell, wb->id, *s->index, *s->models, cfg);
  return {200, predictions_json(preds)};
}

int Service::start(const std::string& host, int port) {
  if (http_) throw std::logic_error("service already started");
  http_ = std::make_unique<Http>();
  auto route = [this](const httplib::Request& req, httplib::Response& res) {
    const HttpResponse r = handle(req.method, req.path, req.body);
    res.status = r.status;
    res.set_content(r.body, "application/json");
  };
  http_->server.Get("/health", route);
  http_->server.Get(R"(/workbooks/.+)", route);
  http_->server.Post("/workbooks", route);
  http_->server.Post("/predict", route);
  int bound = port;
  if (port == 0) {
    bound = http_->server.bind_to_any_port(host);
  } else if (!http_->server.bind_to_port(host, port)) {
    bound = -1;
  }
  if (bound < 0) {
    http_.reset();
    throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
  }
  thread_ = std::thread([this] { http_->server.listen_after_bind(); });
  http_->server.wait_until_ready();
  return bound;
}

void Service::listen(const std::string& host, int port) {
  start(host, port);
  thread_.join();
}

void Service::stop() {
  if (!http_) return;
  http_->server.stop();
  if (thread_.joinable()) thread_.join();
  http_.reset();
}

}  // namespace formula_scout
