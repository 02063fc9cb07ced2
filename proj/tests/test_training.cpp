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

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "formula_scout/synth.hpp"
#include "formula_scout/training.hpp"

using namespace formula_scout;

namespace {

struct Fixture {
  std::vector<Workbook> corpus;
  std::vector<SheetPair> sheets;
  std::vector<RegionPair> regions;
};

const Fixture& fixture() {
  static const Fixture f = [] {
    Fixture x;
    x.corpus = synth_corpus({4, 3, 2, 4});
    const auto stats = SheetNameStats::from_corpus(x.corpus);
    std::mt19937_64 rng(1);
    x.sheets = generate_sheet_pairs(x.corpus, stats, 0.05, rng);
    const CorpusView view(x.corpus);
    x.regions = generate_region_pairs(x.sheets, view);
    augment_pairs(x.sheets, x.regions, view, 20, 6, AugmentConfig{});
    return x;
  }();
  return f;
}

const TrainingSet& training_set() {
  static const TrainingSet t = [] {
    const auto& f = fixture();
    HashedTrigramEmbedder e(50);
    return build_training_set(CorpusView(f.corpus), f.sheets, f.regions, e, ModelConfig::desk_scale());
  }();
  return t;
}

}  // namespace

TEST(Mining, SemihardFirstThenSmallestHard) {
  const std::vector<double> losses{0.0, 0.1, 0.25, 0.05, 0.3, 0.2};
  auto r = select_semihard(losses, 0.2, 2);
  EXPECT_EQ(r.selected, (std::vector<std::size_t>{1, 3}));
  EXPECT_EQ(r.semihard, 2);
  r = select_semihard(losses, 0.2, 4);
  EXPECT_EQ(r.selected, (std::vector<std::size_t>{1, 3, 5, 2}));
  r = select_semihard(losses, 0.2, 10);
  EXPECT_EQ(r.selected.size(), 5u);  // the zero-loss triplet never enters
  for (std::size_t i : r.selected) EXPECT_GT(losses[i], 0.0);
}

TEST(Mining, UntrainedModelSelectsSomething) {
  const auto& t = training_set();
  CoarseModel m(ModelConfig::desk_scale(), 1);
  const std::vector<TripletIndex> pool(t.coarse.triplets.begin(),
                                       t.coarse.triplets.begin() + std::min<std::size_t>(32, t.coarse.triplets.size()));
  const auto r = mine_semihard(m, t.coarse, pool, 0.2, 8);
  EXPECT_FALSE(r.selected.empty());
  EXPECT_EQ(r.losses.size(), pool.size());
  for (std::size_t i = 0; i < r.selected.size() && static_cast<int>(i) < r.semihard; ++i) {
    EXPECT_GT(r.losses[r.selected[i]], 0.0);
    EXPECT_LT(r.losses[r.selected[i]], 0.2);
  }
}

TEST(TrainingSet, TripletsReferenceValidTensors) {
  const auto& t = training_set();
  const ModelConfig c = ModelConfig::desk_scale();
  ASSERT_FALSE(t.coarse.triplets.empty());
  ASSERT_FALSE(t.fine.triplets.empty());
  for (const auto* set : {&t.coarse, &t.fine}) {
    for (const auto& x : set->triplets) {
      ASSERT_LT(std::max({x.anchor, x.positive, x.negative}), set->tensors.size());
    }
    for (const auto& w : set->tensors) {
      ASSERT_EQ(w.rows, c.n_r);
      ASSERT_EQ(w.cols, c.n_c);
      ASSERT_EQ(w.depth, c.d_cell);
    }
  }
}

TEST(TrainingSet, RegionTensorMasksAnchor) {
  const Workbook wb = category_count_target();
  HashedTrigramEmbedder e(50);
  const SheetFeatures f(wb.sheets[0], e);
  const auto t = masked_region_tensor(f, parse_a1("D41"), 20, 6);
  const auto center = t.cell(9, 2);
  EXPECT_TRUE(std::equal(center.begin(), center.end(), f.empty().begin()));
  const auto left = t.cell(9, 1);  // C41 holds the category label
  const auto c41 = f.at(41, 3);
  EXPECT_TRUE(std::equal(left.begin(), left.end(), c41.begin()));
}

TEST(TrainingSet, NoNegativesIsAnError) {
  const auto& f = fixture();
  std::vector<SheetPair> pos;
  for (const auto& p : f.sheets) {
    if (p.label == PairLabel::positive) pos.push_back(p);
  }
  HashedTrigramEmbedder e(50);
  EXPECT_THROW(build_training_set(CorpusView(f.corpus), pos, f.regions, e, ModelConfig::desk_scale()),
               std::invalid_argument);
  EXPECT_THROW(train(TrainingSet{}, ModelConfig::desk_scale()), std::invalid_argument);
}

TEST(Train, ZeroEpisodesReturnsInitialization) {
  ModelConfig c = ModelConfig::desk_scale();
  c.episodes = 0;
  const auto m = train(training_set(), c);
  EXPECT_EQ(m.coarse->parameters(), CoarseModel(c, c.seed).parameters());
  EXPECT_EQ(m.fine->parameters(), FineModel(c, c.seed + 1).parameters());
  EXPECT_TRUE(m.log.episodes.empty());
}

TEST(Train, Deterministic) {
  ModelConfig c = ModelConfig::desk_scale();
  c.episodes = 15;
  const auto a = train(training_set(), c);
  const auto b = train(training_set(), c);
  EXPECT_EQ(a.coarse->parameters(), b.coarse->parameters());
  EXPECT_EQ(a.fine->parameters(), b.fine->parameters());
  EXPECT_FALSE(a.coarse->parameters() == CoarseModel(c, c.seed).parameters());
  ASSERT_EQ(a.log.episodes.size(), 15u);
  for (const auto& e : a.log.episodes) {
    EXPECT_LE(e.coarse_selected, c.batch_size);
    EXPECT_LE(e.fine_selected, c.batch_size);
  }
}

TEST(Train, SgdStepDescendsOnItsBatch) {
  const auto& t = training_set();
  CoarseModel m(ModelConfig::desk_scale(), 3);
  std::vector<TripletIndex> batch;
  for (const auto& x : t.coarse.triplets) {
    if (triplet_loss(m.embed(t.coarse.tensors[x.anchor]), m.embed(t.coarse.tensors[x.positive]),
                     m.embed(t.coarse.tensors[x.negative]), 0.2) > 0.01) {
      batch.push_back(x);
    }
    if (batch.size() == 8) break;
  }
  ASSERT_FALSE(batch.empty());
  auto mean_loss = [&] {
    double s = 0;
    for (const auto& x : batch) {
      s += triplet_loss(m.embed(t.coarse.tensors[x.anchor]), m.embed(t.coarse.tensors[x.positive]),
                        m.embed(t.coarse.tensors[x.negative]), 0.2);
    }
    return s / static_cast<double>(batch.size());
  };
  const double before = mean_loss();
  const double reported = sgd_step(m, t.coarse, batch, 0.2, 1e-3);
  EXPECT_NEAR(reported, before, 1e-12);
  EXPECT_LT(mean_loss(), before);
}

TEST(Train, ImprovesOrderingOnTrainingTriplets) {
  ModelConfig c = ModelConfig::desk_scale();
  c.episodes = 150;
  const auto& t = training_set();
  const auto before_c = measure_separation(CoarseModel(c, c.seed), t.coarse);
  const auto before_f = measure_separation(FineModel(c, c.seed + 1), t.fine);
  const auto m = train(t, c);
  const auto after_c = measure_separation(*m.coarse, t.coarse);
  const auto after_f = measure_separation(*m.fine, t.fine);
  EXPECT_GE(after_c.ordered_fraction, before_c.ordered_fraction);
  EXPECT_GE(after_f.ordered_fraction, before_f.ordered_fraction);
  EXPECT_LT(after_c.mean_positive, after_c.mean_negative);
  EXPECT_LT(after_f.mean_positive, after_f.mean_negative);
}

TEST(Train, LogCsvHasOneRowPerEpisode) {
  ModelConfig c = ModelConfig::desk_scale();
  c.episodes = 3;
  const auto m = train(training_set(), c);
  const auto path = std::filesystem::temp_directory_path() / "fs_training_log.csv";
  m.log.write_csv(path);
  std::ifstream in(path);
  std::string line;
  int n = 0;
  std::getline(in, line);
  EXPECT_EQ(line.rfind("episode,", 0), 0u);
  while (std::getline(in, line)) ++n;
  EXPECT_EQ(n, 3);
  std::filesystem::remove(path);
}

TEST(Separation, MeanTripletLossMatchesPerTripletSum) {
  const auto& t = training_set();
  const CoarseModel m(ModelConfig::desk_scale(), 5);
  double s = 0;
  for (const auto& x : t.coarse.triplets) {
    s += triplet_loss(m.embed(t.coarse.tensors[x.anchor]), m.embed(t.coarse.tensors[x.positive]),
                      m.embed(t.coarse.tensors[x.negative]), 0.3);
  }
  EXPECT_NEAR(mean_triplet_loss(m, t.coarse, 0.3), s / static_cast<double>(t.coarse.triplets.size()), 1e-12);
  EXPECT_EQ(mean_triplet_loss(m, TripletSet{}, 0.3), 0.0);
}

TEST(Separation, AnchorsCompareMeanDistances) {
  const auto& t = training_set();
  ASSERT_GE(t.fine.tensors.size(), 9u);
  TripletSet s;
  s.tensors.assign(t.fine.tensors.begin(), t.fine.tensors.begin() + 9);
  s.triplets = {{0, 1, 2}, {0, 3, 4}, {0, 5, 6}, {7, 8, 1}};
  const FineModel m(ModelConfig::desk_scale(), 2);
  auto d = [&](std::size_t i, std::size_t j) { return (m.embed(s.tensors[i]) - m.embed(s.tensors[j])).squaredNorm(); };
  const bool first = d(0, 1) + d(0, 3) + d(0, 5) < d(0, 2) + d(0, 4) + d(0, 6);
  const bool second = d(7, 8) < d(7, 1);
  const Separation sep = measure_separation(m, s);
  EXPECT_EQ(sep.triplets, 4u);
  EXPECT_EQ(sep.anchors, 2u);
  EXPECT_DOUBLE_EQ(sep.anchor_ordered_fraction, (first + second) / 2.0);
}

TEST(Train, CheckpointKeepsTheBestValidationLoss) {
  ModelConfig c = ModelConfig::desk_scale();
  c.episodes = 40;
  c.validate_every = 5;
  c.patience = 0;
  const auto& t = training_set();
  const auto m = train(t, c, {}, &t);
  ASSERT_EQ(m.log.episodes.size(), 40u);
  std::vector<int> checked;
  double best_fine = mean_triplet_loss(FineModel(c, c.seed + 1), t.fine, c.margin);
  int best_at = 0;
  for (const auto& e : m.log.episodes) {
    if (std::isnan(e.fine_val_loss)) continue;
    checked.push_back(e.episode + 1);
    EXPECT_FALSE(std::isnan(e.coarse_val_loss));
    if (e.fine_val_loss < best_fine) {
      best_fine = e.fine_val_loss;
      best_at = e.episode + 1;
    }
  }
  EXPECT_EQ(checked, (std::vector<int>{5, 10, 15, 20, 25, 30, 35, 40}));
  EXPECT_EQ(m.log.fine_kept_episodes, best_at);
  EXPECT_NEAR(mean_triplet_loss(*m.fine, t.fine, c.margin), best_fine, 1e-12);

  // The kept parameters are exactly those of a shorter run.
  ModelConfig shorter = c;
  shorter.episodes = m.log.fine_kept_episodes;
  EXPECT_EQ(train(t, shorter).fine->parameters(), m.fine->parameters());
}

TEST(Train, StopsAfterPatienceRunsOut) {
  ModelConfig c = ModelConfig::desk_scale();
  c.episodes = 120;
  c.validate_every = 2;
  c.patience = 2;
  const auto& t = training_set();
  const auto m = train(t, c, {}, &t);
  double best_c = mean_triplet_loss(CoarseModel(c, c.seed), t.coarse, c.margin);
  double best_f = mean_triplet_loss(FineModel(c, c.seed + 1), t.fine, c.margin);
  int stale_c = 0, stale_f = 0;
  std::size_t expected = m.log.episodes.size();
  for (std::size_t i = 0; i < m.log.episodes.size(); ++i) {
    const auto& e = m.log.episodes[i];
    if (std::isnan(e.coarse_val_loss)) continue;
    stale_c = e.coarse_val_loss < best_c ? 0 : stale_c + 1;
    stale_f = e.fine_val_loss < best_f ? 0 : stale_f + 1;
    best_c = std::min(best_c, e.coarse_val_loss);
    best_f = std::min(best_f, e.fine_val_loss);
    if (stale_c >= 2 && stale_f >= 2) {
      expected = i + 1;
      break;
    }
  }
  EXPECT_EQ(m.log.episodes.size(), expected);
  EXPECT_LE(m.log.coarse_kept_episodes, static_cast<int>(m.log.episodes.size()));
  EXPECT_LE(m.log.fine_kept_episodes, static_cast<int>(m.log.episodes.size()));
}

TEST(Train, NoValidationKeepsTheLastEpisode) {
  ModelConfig c = ModelConfig::desk_scale();
  c.episodes = 10;
  const auto m = train(training_set(), c);
  EXPECT_EQ(m.log.coarse_kept_episodes, 10);
  EXPECT_EQ(m.log.fine_kept_episodes, 10);
  for (const auto& e : m.log.episodes) EXPECT_TRUE(std::isnan(e.fine_val_loss));
}
