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

// Distance-oracle stub: region distances over raw cell features, with an
// untrained coarse model for sheet retrieval.

#pragma once

#include <memory>

#include "formula_scout/recommender.hpp"

namespace formula_scout::stub {

inline Models raw_feature_models(const ModelConfig& c = ModelConfig::desk_scale()) {
  Models m;
  m.embedder = std::make_shared<HashedTrigramEmbedder>(50);
  m.d_pat = c.d_cell - 50 - FeatureLayout::kTypes - FeatureLayout::kStyle;
  m.coarse = std::make_shared<CoarseModel>(c, 7);
  m.fine = std::make_shared<RawFeatureEncoder>(c.n_r, c.n_c, c.d_cell);
  return m;
}

}  // namespace formula_scout::stub
