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

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "formula_scout/config.hpp"
#include "formula_scout/error.hpp"

using namespace formula_scout;

namespace {

std::string schema_path(const std::string& text) {
  try {
    parse_config(text);
  } catch (const SchemaError& e) {
    return e.path();
  }
  return "<no error>";
}

std::filesystem::path write_temp(const std::string& name, const std::string& text) {
  const auto p = std::filesystem::temp_directory_path() / name;
  std::ofstream(p) << text;
  return p;
}

}  // namespace

TEST(Config, DefaultsAreConsistent) {
  const AppConfig c;
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(c.model, ModelConfig::desk_scale());
  EXPECT_EQ(c.model.d_cell, 82);
  EXPECT_EQ(c.eval.test_fraction, 0.10);
  EXPECT_EQ(c.eval.per_sheet_cap, 10);
}

TEST(Config, EmptyObjectGivesDefaults) {
  EXPECT_EQ(dump_config(parse_config("{}")), dump_config(AppConfig{}));
}

TEST(Config, DumpParseRoundTrip) {
  AppConfig c;
  c.recommender.K = 9;
  c.recommender.theta = 0.35;
  c.recommender.theta_sheet = 1.25;
  c.recommender.fallback_scan = false;
  c.eval.mode = SplitMode::random;
  c.eval.seed = 99;
  c.theta_grid = {0.1, 0.2};
  c.alpha = 0.01;
  c.model.margin = 0.3;
  c.model.patience = 3;
  c.training.validation_fraction = 0.2;
  const AppConfig back = parse_config(dump_config(c));
  EXPECT_EQ(dump_config(back), dump_config(c));
  EXPECT_EQ(back.recommender.theta_sheet, 1.25);
  EXPECT_EQ(back.eval.mode, SplitMode::random);
  EXPECT_EQ(back.model, c.model);
  EXPECT_EQ(back.training.validation_fraction, 0.2);
}

TEST(Config, PartialModelSectionOverlaysDeskPreset) {
  const AppConfig c = parse_config(R"({"model": {"margin": 0.5}})");
  ModelConfig want = ModelConfig::desk_scale();
  want.margin = 0.5;
  EXPECT_EQ(c.model, want);
  EXPECT_EQ(parse_config(R"({"model": {"preset": "paper"}})").model, ModelConfig::paper_scale());
  EXPECT_EQ(schema_path(R"({"model": {"preset": "huge"}})"), "/model/preset");
}

TEST(Config, UnknownKeysIgnored) {
  EXPECT_NO_THROW(parse_config(R"({"colour": "red", "recommender": {"bogus": 1}})"));
}

TEST(Config, WrongTypesReportTheirPath) {
  EXPECT_EQ(schema_path(R"({"recommender": {"K": "ten"}})"), "/recommender/K");
  EXPECT_EQ(schema_path(R"({"eval": {"theta_grid": 3}})"), "/eval/theta_grid");
  EXPECT_EQ(schema_path(R"({"eval": {"mode": "weekly"}})"), "/eval/mode");
  EXPECT_EQ(schema_path(R"({"model": {"n_r": "x"}})"), "/model/n_r");
  EXPECT_EQ(schema_path(R"({"training": []})"), "/training");
  EXPECT_EQ(schema_path(R"([1, 2])"), "");
  EXPECT_EQ(schema_path(R"({"model": )"), "");
}

TEST(Config, ValidateCatchesCrossFieldErrors) {
  AppConfig c;
  c.embedder = "trigram:64:0";
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c.model.d_cell = 82 + 14;
  EXPECT_NO_THROW(c.validate());
  c = AppConfig{};
  c.alpha = 1.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = AppConfig{};
  c.theta_grid.clear();
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = AppConfig{};
  c.eval.per_sheet_cap = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = AppConfig{};
  c.training.validation_fraction = 1.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = AppConfig{};
  c.model.patience = -1;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(Config, ResolutionOrder) {
  const auto env_file = write_temp("fs_config_env.json", R"({"recommender": {"K": 3}})");
  const auto arg_file = write_temp("fs_config_arg.json", R"({"recommender": {"K": 4}})");
  ::unsetenv(kConfigEnv);
  EXPECT_EQ(resolve_config(std::nullopt).recommender.K, AppConfig{}.recommender.K);
  ::setenv(kConfigEnv, env_file.c_str(), 1);
  EXPECT_EQ(resolve_config(std::nullopt).recommender.K, 3);
  EXPECT_EQ(resolve_config(arg_file).recommender.K, 4);
  ::unsetenv(kConfigEnv);
  EXPECT_THROW(load_config_file("/nonexistent/fs.json"), std::runtime_error);
  std::filesystem::remove(env_file);
  std::filesystem::remove(arg_file);
}
