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

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "formula_scout/features.hpp"

namespace formula_scout {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Architecture and optimization settings shared by both branches.
struct ModelConfig {
  int n_r = 100;
  int n_c = 10;
  int d_cell = 82;
  int d_hidden = 64;  // first per-cell reduction layer
  int d_reduce = 32;
  std::vector<int> conv_channels{32, 64};
  int conv_kernel = 3;
  int d_coarse = 896;
  int d_fine_per_cell = 16;
  double margin = 0.2;
  double learning_rate = 0.05;
  int batch_size = 16;
  /// Candidate triplets scored per episode before semi-hard selection.
  int mining_pool = 32;
  int episodes = 1000;
  /// Episodes between validation checkpoints; 0 disables checkpointing.
  int validate_every = 25;
  /// Checkpoints without a new best on both branches before training stops;
  /// 0 runs all episodes.
  int patience = 8;
  std::uint64_t seed = 7;

  int d_fine() const { return d_fine_per_cell * n_r * n_c; }
  void validate() const;

  /// 100 x 10 window, 896-d sheet vectors, 16 dims per cell.
  static ModelConfig paper_scale();
  /// 20 x 6 window, d_reduce 16, 64-d sheet vectors, 8 dims per cell.
  static ModelConfig desk_scale();

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct DenseLayer {
  std::string name;
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;
};

/// Named flat parameter set; also used for gradients.
class Parameters {
 public:
  std::vector<DenseLayer> layers;

  std::size_t count() const;
  double& flat(std::size_t i);
  double flat(std::size_t i) const;
  /// Same shapes, all zero.
  Parameters zeros_like() const;
  void set_zero();
  /// this += alpha * other
  void axpy(double alpha, const Parameters& other);
  bool all_finite() const;
  const DenseLayer& layer(std::string_view name) const;

  friend bool operator==(const Parameters& a, const Parameters& b);
};

/// Activations retained by a forward pass for backpropagation.
struct ForwardTrace {
  virtual ~ForwardTrace() = default;
  Eigen::VectorXd output;     // unit-norm embedding
  double pre_norm = 0.0;      // norm before L2 normalization
  std::uint64_t signature = 0;  // hash of ReLU masks and pooling argmaxes
};

/// One representation branch: per-cell reduction layers followed by a
/// branch-specific head, ending in L2 normalization.
class EmbeddingModel {
 public:
  virtual ~EmbeddingModel() = default;

  const ModelConfig& config() const { return config_; }
  Parameters& parameters() { return params_; }
  const Parameters& parameters() const { return params_; }

  virtual std::string_view kind() const = 0;
  virtual int output_dim() const = 0;

  /// Throws std::invalid_argument on a tensor whose shape differs from the
  /// configured window.
  Eigen::VectorXd embed(const WindowTensor& t) const { return forward(t)->output; }
  virtual std::unique_ptr<ForwardTrace> forward(const WindowTensor& t) const = 0;
  /// Accumulates d(loss)/d(params) into `grad` given d(loss)/d(output).
  virtual void backward(const ForwardTrace& trace, const Eigen::VectorXd& grad_output, Parameters& grad) const = 0;

 protected:
  EmbeddingModel(ModelConfig config) : config_(std::move(config)) {}
  void check_shape(const WindowTensor& t) const;

  ModelConfig config_;
  Parameters params_;
};

/// Convolutional branch for whole-sheet similarity.
class CoarseModel final : public EmbeddingModel {
 public:
  CoarseModel(const ModelConfig& config, std::uint64_t seed);

  std::string_view kind() const override { return "coarse"; }
  int output_dim() const override { return config_.d_coarse; }
  std::unique_ptr<ForwardTrace> forward(const WindowTensor& t) const override;
  void backward(const ForwardTrace& trace, const Eigen::VectorXd& grad_output, Parameters& grad) const override;
};

/// Cell-aligned branch for region similarity: a shared per-cell projection,
/// concatenated over the window.
class FineModel final : public EmbeddingModel {
 public:
  FineModel(const ModelConfig& config, std::uint64_t seed);

  std::string_view kind() const override { return "fine"; }
  int output_dim() const override { return config_.d_fine(); }
  std::unique_ptr<ForwardTrace> forward(const WindowTensor& t) const override;
  void backward(const ForwardTrace& trace, const Eigen::VectorXd& grad_output, Parameters& grad) const override;

  /// Pre-normalization code of every row of `cells` (cells x d_cell), i.e. the
  /// slice a cell contributes to the window vector before normalization.
  RowMatrix cell_codes(const RowMatrix& cells) const;
  Eigen::VectorXd cell_code(std::span<const double> features) const;
};

/// max(|a-p|^2 - |a-n|^2 + m, 0). Throws std::invalid_argument on a
/// dimension mismatch.
double triplet_loss(std::span<const double> a, std::span<const double> p, std::span<const double> n, double m);
double triplet_loss(const Eigen::VectorXd& a, const Eigen::VectorXd& p, const Eigen::VectorXd& n, double m);

struct TripletGradient {
  double loss = 0.0;
  Eigen::VectorXd d_anchor;
  Eigen::VectorXd d_positive;
  Eigen::VectorXd d_negative;
};

/// Loss and its gradient with respect to the three embeddings; all zero when
/// the hinge is inactive.
TripletGradient triplet_loss_gradient(const Eigen::VectorXd& a, const Eigen::VectorXd& p, const Eigen::VectorXd& n,
                                      double m);

/// Model files are JSON: format tag, version, branch kind, config echo,
/// embedder description and flat per-layer arrays.
void save_model(const EmbeddingModel& model, const std::string& embedder, const std::filesystem::path& path);

struct LoadedModels {
  std::unique_ptr<CoarseModel> coarse;
  std::unique_ptr<FineModel> fine;
  std::string embedder;
};

/// Loads coarse.json and fine.json from a model directory. Throws SchemaError
/// if the two files disagree on config or embedder, or if `expected` is given
/// and differs from the stored config.
LoadedModels load_models(const std::filesystem::path& dir, const ModelConfig* expected = nullptr);
void save_models(const CoarseModel& coarse, const FineModel& fine, const std::string& embedder,
                 const std::filesystem::path& dir);

std::string config_to_json(const ModelConfig& c);
ModelConfig config_from_json(std::string_view text);

}  // namespace formula_scout
