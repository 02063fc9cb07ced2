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

#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "formula_scout/features.hpp"
#include "formula_scout/model.hpp"
#include "formula_scout/weak_supervision.hpp"

namespace formula_scout {

/// Indices into a tensor bank.
struct TripletIndex {
  std::size_t anchor = 0;
  std::size_t positive = 0;
  std::size_t negative = 0;

  friend bool operator==(const TripletIndex&, const TripletIndex&) = default;
};

struct TripletSet {
  std::vector<WindowTensor> tensors;
  std::vector<TripletIndex> triplets;
};

struct TrainingSet {
  TripletSet coarse;
  TripletSet fine;
};

struct TrainingSetOptions {
  int d_pat = 16;
  /// Negatives drawn per positive sheet pair for the coarse branch.
  int coarse_negatives = 2;
  /// Share of workbooks whose weak labels are kept out of training and used
  /// to pick the best checkpoint. 0 trains on everything.
  double validation_fraction = 0.1;
  std::uint64_t seed = 0;
};

/// Coarse triplets: (a, b, n) per positive sheet pair, with b's augmentation
/// applied and n a sheet from a file whose names are disjoint from a's file.
/// Fine triplets: (L@s, L@s', L''@s') per positive region pair with a
/// matching negative. Region windows have their anchor cell blanked.
/// Throws std::invalid_argument when either branch ends up with no triplets.
TrainingSet build_training_set(const CorpusView& corpus, std::span<const SheetPair> sheet_pairs,
                               std::span<const RegionPair> region_pairs, const TextEmbedder& embedder,
                               const ModelConfig& config, const TrainingSetOptions& options = {});

/// Window tensor of a region whose anchor cell reads as empty.
WindowTensor masked_region_tensor(const SheetFeatures& features, CellAddress anchor, int n_r, int n_c);

struct MiningResult {
  std::vector<std::size_t> selected;  // positions into the candidate list
  std::vector<double> losses;         // one per candidate
  int semihard = 0;                   // candidates with 0 < loss < m
};

/// Keeps candidates with 0 < loss < m in order, up to batch_size; if fewer
/// qualify, adds the smallest-loss candidates with loss >= m.
MiningResult select_semihard(std::span<const double> losses, double margin, int batch_size);

/// Scores candidates under `model` and applies select_semihard.
MiningResult mine_semihard(const EmbeddingModel& model, const TripletSet& set, std::span<const TripletIndex> candidates,
                           double margin, int batch_size);

struct EpisodeStats {
  int episode = 0;
  double coarse_pool_loss = 0;  // mean loss over the mining pool
  double fine_pool_loss = 0;
  double coarse_batch_loss = 0;  // mean loss over the selected batch
  double fine_batch_loss = 0;
  int coarse_selected = 0;
  int fine_selected = 0;
  int coarse_semihard = 0;
  int fine_semihard = 0;
  /// Mean hinge loss on the validation set; NaN between checkpoints.
  double coarse_val_loss = std::numeric_limits<double>::quiet_NaN();
  double fine_val_loss = std::numeric_limits<double>::quiet_NaN();
};

struct TrainingLog {
  std::vector<EpisodeStats> episodes;
  /// Episodes applied to the returned parameters of each branch.
  int coarse_kept_episodes = 0;
  int fine_kept_episodes = 0;

  void write_csv(const std::filesystem::path& path) const;
};

struct TrainedModels {
  std::unique_ptr<CoarseModel> coarse;
  std::unique_ptr<FineModel> fine;
  TrainingLog log;
};

/// One SGD step on each model per episode, over the mined triplets. Models
/// are initialized from config.seed (coarse) and config.seed + 1 (fine).
/// With a validation set, each branch is scored before training, every
/// config.validate_every episodes and at the end; the lowest-loss parameters
/// are returned (earliest on ties). Training stops early once both branches
/// have gone config.patience checkpoints without a new best.
/// Throws std::invalid_argument if either triplet set is empty.
TrainedModels train(const TrainingSet& data, const ModelConfig& config,
                    const std::function<void(const EpisodeStats&)>& progress = {},
                    const TrainingSet* validation = nullptr);

/// Mean of max(0, d(a,p) - d(a,n) + margin) over the set.
double mean_triplet_loss(const EmbeddingModel& model, const TripletSet& set, double margin);

/// Single SGD step; returns the mean loss over the batch.
double sgd_step(EmbeddingModel& model, const TripletSet& set, std::span<const TripletIndex> batch, double margin,
                double learning_rate);

struct Separation {
  std::size_t triplets = 0;
  /// Fraction of triplets with d(a,p) < d(a,n).
  double ordered_fraction = 0;
  /// Triplets grouped by anchor; fraction of anchors whose mean positive
  /// distance is below their mean negative distance.
  std::size_t anchors = 0;
  double anchor_ordered_fraction = 0;
  double mean_positive = 0;
  double mean_negative = 0;
};

Separation measure_separation(const EmbeddingModel& model, const TripletSet& set);

struct GradientCheckResult {
  double max_relative_error = 0;
  double loss = 0;
  int checked = 0;
  int skipped_kinks = 0;
};

/// Compares analytic parameter gradients of the triplet loss with central
/// differences at `samples_per_layer` random coordinates of every layer.
/// Coordinates where the perturbation changes any ReLU mask, pooling choice
/// or hinge state are skipped. Relative error is |a-n| / max(|a|, |n|, 1e-7).
GradientCheckResult gradient_check(EmbeddingModel& model, const WindowTensor& a, const WindowTensor& p,
                                   const WindowTensor& n, double margin, int samples_per_layer, std::uint64_t seed,
                                   double h = 1e-4);

}  // namespace formula_scout
