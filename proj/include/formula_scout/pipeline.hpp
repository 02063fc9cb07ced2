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

#include <functional>
#include <span>
#include <vector>

#include "formula_scout/config.hpp"

namespace formula_scout {

struct WeakLabels {
  std::vector<SheetPair> sheet_pairs;
  std::vector<RegionPair> region_pairs;
};

/// Pair generation followed by augmentation, seeded from cfg.augment.seed.
WeakLabels weak_supervise(std::span<const Workbook> corpus, const AppConfig& cfg);

/// Builds triplets from the labels and trains both branches. Pairs touching
/// a random cfg.training.validation_fraction of the workbooks are held out
/// to choose checkpoints, unless that leaves either side without triplets.
TrainedModels train_models(std::span<const Workbook> corpus, const WeakLabels& labels, const AppConfig& cfg,
                           const std::function<void(const EpisodeStats&)>& progress = {});

/// Serving bundle around freshly trained models.
Models make_models(TrainedModels&& trained, const AppConfig& cfg);

}  // namespace formula_scout
