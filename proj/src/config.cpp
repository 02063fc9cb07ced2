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

#include "formula_scout/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "formula_scout/error.hpp"
#include "formula_scout/features.hpp"
#include "json.hpp"

namespace formula_scout {

using nlohmann::json;
using nlohmann::ordered_json;

void AppConfig::validate() const {
  model.validate();
  recommender.validate();
  eval.validate();
  if (!(alpha > 0 && alpha < 1)) throw std::invalid_argument("alpha must be in (0, 1)");
  if (augment.p_max < 0 || augment.p_max >= 0.5) throw std::invalid_argument("augment p_max must be in [0, 0.5)");
  if (augment.region_fraction < 0 || augment.region_fraction > 1) {
    throw std::invalid_argument("augment region_fraction must be in [0, 1]");
  }
  if (training.coarse_negatives < 1) throw std::invalid_argument("coarse_negatives must be >= 1");
  if (!(training.validation_fraction >= 0 && training.validation_fraction < 1)) {
    throw std::invalid_argument("validation_fraction must be in [0, 1)");
  }
  if (theta_grid.empty()) throw std::invalid_argument("theta_grid is empty");
  const auto emb = make_embedder(embedder);
  const int want = FeatureLayout{emb->dim(), training.d_pat}.dim();
  if (model.d_cell != want) {
    throw std::invalid_argument("model d_cell " + std::to_string(model.d_cell) + " does not match embedder " +
                                embedder + " with d_pat " + std::to_string(training.d_pat) + " (" +
                                std::to_string(want) + ")");
  }
}

namespace {

template <typename T>
void read(const json& section, const std::string& path, const char* key, T& field) {
  auto it = section.find(key);
  if (it == section.end()) return;
  try {
    it->get_to(field);
  } catch (const json::exception& e) {
    throw SchemaError(path + "/" + key, e.what());
  }
}

const json* section(const json& root, const char* name) {
  auto it = root.find(name);
  if (it == root.end()) return nullptr;
  if (!it->is_object()) throw SchemaError(std::string("/") + name, "expected an object");
  return &*it;
}

}  // namespace

AppConfig parse_config(std::string_view text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw SchemaError("", e.what());
  }
  if (!root.is_object()) throw SchemaError("", "config must be a JSON object");
  AppConfig c;
  if (const json* m = section(root, "model")) {
    try {
      json mj = *m;
      if (!mj.contains("preset")) mj["preset"] = "desk";  // partial sections overlay the app default
      c.model = config_from_json(mj.dump());
    } catch (const SchemaError& e) {
      const std::string what = e.what();
      throw SchemaError("/model" + e.path(), what.substr(std::min(what.size(), e.path().size() + 2)));
    }
  }
  read(root, "", "embedder", c.embedder);
  if (const json* w = section(root, "weak_supervision")) {
    read(*w, "/weak_supervision", "alpha", c.alpha);
    read(*w, "/weak_supervision", "p_max", c.augment.p_max);
    read(*w, "/weak_supervision", "region_fraction", c.augment.region_fraction);
    read(*w, "/weak_supervision", "seed", c.augment.seed);
  }
  if (const json* t = section(root, "training")) {
    read(*t, "/training", "d_pat", c.training.d_pat);
    read(*t, "/training", "coarse_negatives", c.training.coarse_negatives);
    read(*t, "/training", "validation_fraction", c.training.validation_fraction);
    read(*t, "/training", "seed", c.training.seed);
  }
  if (const json* r = section(root, "recommender")) {
    RecommenderConfig& rc = c.recommender;
    read(*r, "/recommender", "K", rc.K);
    read(*r, "/recommender", "d", rc.d);
    read(*r, "/recommender", "theta", rc.theta);
    if (auto it = r->find("theta_sheet"); it != r->end() && !it->is_null()) {
      double v = 0;
      read(*r, "/recommender", "theta_sheet", v);
      rc.theta_sheet = v;
    }
    read(*r, "/recommender", "top_n", rc.top_n);
    read(*r, "/recommender", "fallback_scan", rc.fallback_scan);
    read(*r, "/recommender", "max_scan_cells", rc.max_scan_cells);
    read(*r, "/recommender", "exclude_target_workbook", rc.exclude_target_workbook);
  }
  if (const json* e = section(root, "eval")) {
    std::string mode = c.eval.mode == SplitMode::random ? "random" : "timestamp";
    read(*e, "/eval", "mode", mode);
    if (mode == "random") {
      c.eval.mode = SplitMode::random;
    } else if (mode == "timestamp") {
      c.eval.mode = SplitMode::timestamp;
    } else {
      throw SchemaError("/eval/mode", "expected \"random\" or \"timestamp\"");
    }
    read(*e, "/eval", "test_fraction", c.eval.test_fraction);
    read(*e, "/eval", "per_sheet_cap", c.eval.per_sheet_cap);
    read(*e, "/eval", "cap_per_sheet", c.eval.cap_per_sheet);
    read(*e, "/eval", "seed", c.eval.seed);
    read(*e, "/eval", "theta_grid", c.theta_grid);
  }
  return c;
}

AppConfig load_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string dump_config(const AppConfig& c) {
  ordered_json j;
  j["model"] = ordered_json::parse(config_to_json(c.model));
  j["embedder"] = c.embedder;
  j["weak_supervision"] = {{"alpha", c.alpha},
                           {"p_max", c.augment.p_max},
                           {"region_fraction", c.augment.region_fraction},
                           {"seed", c.augment.seed}};
  j["training"] = {{"d_pat", c.training.d_pat},
                   {"coarse_negatives", c.training.coarse_negatives},
                   {"validation_fraction", c.training.validation_fraction},
                   {"seed", c.training.seed}};
  const RecommenderConfig& r = c.recommender;
  j["recommender"] = {{"K", r.K},
                      {"d", r.d},
                      {"theta", r.theta},
                      {"theta_sheet", r.theta_sheet ? json(*r.theta_sheet) : json(nullptr)},
                      {"top_n", r.top_n},
                      {"fallback_scan", r.fallback_scan},
                      {"max_scan_cells", r.max_scan_cells},
                      {"exclude_target_workbook", r.exclude_target_workbook}};
  j["eval"] = {{"mode", c.eval.mode == SplitMode::random ? "random" : "timestamp"},
               {"test_fraction", c.eval.test_fraction},
               {"per_sheet_cap", c.eval.per_sheet_cap},
               {"cap_per_sheet", c.eval.cap_per_sheet},
               {"seed", c.eval.seed},
               {"theta_grid", c.theta_grid}};
  return j.dump(2);
}

AppConfig resolve_config(const std::optional<std::filesystem::path>& explicit_path) {
  if (explicit_path) return load_config_file(*explicit_path);
  if (const char* env = std::getenv(kConfigEnv); env && *env) return load_config_file(env);
  return AppConfig{};
}

}  // namespace formula_scout
