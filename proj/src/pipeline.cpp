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

#include "formula_scout/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

namespace formula_scout {

WeakLabels weak_supervise(std::span<const Workbook> corpus, const AppConfig& cfg) {
  const SheetNameStats stats = SheetNameStats::from_corpus(corpus);
  std::mt19937_64 rng(cfg.augment.seed);
  WeakLabels out;
  out.sheet_pairs = generate_sheet_pairs(corpus, stats, cfg.alpha, rng);
  const CorpusView view(corpus);
  out.region_pairs = generate_region_pairs(out.sheet_pairs, view);
  augment_pairs(out.sheet_pairs, out.region_pairs, view, cfg.model.n_r, cfg.model.n_c, cfg.augment);
  return out;
}

namespace {

template <typename Pair>
void split_pairs(const std::vector<Pair>& pairs, const std::set<std::string>& held, std::vector<Pair>& train,
                 std::vector<Pair>& val) {
  for (const auto& p : pairs) {
    (held.count(p.a.workbook_id) || held.count(p.b.workbook_id) ? val : train).push_back(p);
  }
}

}  // namespace

TrainedModels train_models(std::span<const Workbook> corpus, const WeakLabels& labels, const AppConfig& cfg,
                           const std::function<void(const EpisodeStats&)>& progress) {
  cfg.validate();
  const auto embedder = make_embedder(cfg.embedder);
  const CorpusView view(corpus);
  auto build = [&](const WeakLabels& l) {
    return build_training_set(view, l.sheet_pairs, l.region_pairs, *embedder, cfg.model, cfg.training);
  };

  const auto n_val = static_cast<std::size_t>(std::lround(cfg.training.validation_fraction * corpus.size()));
  if (n_val > 0 && n_val < corpus.size() && cfg.model.validate_every > 0) {
    std::vector<std::string> ids;
    for (const auto& w : corpus) ids.push_back(w.id);
    std::sort(ids.begin(), ids.end());
    std::mt19937_64 rng(cfg.training.seed);
    std::shuffle(ids.begin(), ids.end(), rng);
    const std::set<std::string> held(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_val));
    WeakLabels fit, val;
    split_pairs(labels.sheet_pairs, held, fit.sheet_pairs, val.sheet_pairs);
    split_pairs(labels.region_pairs, held, fit.region_pairs, val.region_pairs);
    // Either side may lack triplets on tiny corpora; fall back to no checkpointing.
    std::optional<TrainingSet> fit_set, val_set;
    try {
      fit_set = build(fit);
      val_set = build(val);
    } catch (const std::invalid_argument&) {
      fit_set.reset();
    }
    if (fit_set && val_set) return train(*fit_set, cfg.model, progress, &*val_set);
  }
  return train(build(labels), cfg.model, progress);
}

Models make_models(TrainedModels&& trained, const AppConfig& cfg) {
  Models m;
  m.embedder = make_embedder(cfg.embedder);
  m.d_pat = cfg.training.d_pat;
  m.coarse = std::shared_ptr<const CoarseModel>(std::move(trained.coarse));
  m.fine = std::make_shared<FineModelEncoder>(std::shared_ptr<const FineModel>(std::move(trained.fine)));
  return m;
}

}  // namespace formula_scout
