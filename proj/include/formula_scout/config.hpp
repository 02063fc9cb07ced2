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

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "formula_scout/eval.hpp"
#include "formula_scout/model.hpp"
#include "formula_scout/recommender.hpp"
#include "formula_scout/training.hpp"
#include "formula_scout/weak_supervision.hpp"

namespace formula_scout {

inline constexpr const char* kConfigEnv = "FORMULA_SCOUT_CONFIG";

struct AppConfig {
  ModelConfig model = ModelConfig::desk_scale();
  std::string embedder = "trigram:50:0";
  double alpha = 0.05;
  AugmentConfig augment;
  TrainingSetOptions training;
  RecommenderConfig recommender;
  EvalSplit eval;
  std::vector<double> theta_grid{0.0, 0.05, 0.1, 0.2, 0.3, 0.5, 0.75, 1.0, 1.5, 2.0, 4.0};

  /// Cross-field checks, including d_cell against the embedder width.
  void validate() const;
};

/// Sections "model", "embedder", "weak_supervision", "training",
/// "recommender", "eval"; all optional. Unknown keys are ignored; a field of
/// the wrong type throws SchemaError with its path.
AppConfig parse_config(std::string_view json_text);
AppConfig load_config_file(const std::filesystem::path& path);
std::string dump_config(const AppConfig& c);

/// Explicit path, else $FORMULA_SCOUT_CONFIG, else defaults.
AppConfig resolve_config(const std::optional<std::filesystem::path>& explicit_path);

}  // namespace formula_scout
