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
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "formula_scout/features.hpp"
#include "formula_scout/formula.hpp"
#include "formula_scout/index.hpp"
#include "formula_scout/model.hpp"

namespace formula_scout {

struct RecommenderConfig {
  int K = 5;              // candidate similar sheets
  int d = 5;              // neighborhood radius for parameter search
  double theta = 1.0;     // region-distance threshold for references and parameters
  std::optional<double> theta_sheet;
  int top_n = 3;
  /// Full-sheet rescan when the neighborhood search fails.
  bool fallback_scan = true;
  /// Rescans are skipped on sheets with more cells than this.
  long max_scan_cells = 100000;
  bool exclude_target_workbook = true;

  void validate() const;
};

/// Per-cell code function whose window concatenation, L2-normalized, is the
/// region embedding.
class RegionEncoder {
 public:
  virtual ~RegionEncoder() = default;
  virtual int n_r() const = 0;
  virtual int n_c() const = 0;
  virtual int code_dim() const = 0;
  /// cells x d_cell -> cells x code_dim
  virtual RowMatrix encode(const RowMatrix& cells) const = 0;
  int output_dim() const { return n_r() * n_c() * code_dim(); }
};

class FineModelEncoder final : public RegionEncoder {
 public:
  explicit FineModelEncoder(std::shared_ptr<const FineModel> model) : model_(std::move(model)) {}
  int n_r() const override { return model_->config().n_r; }
  int n_c() const override { return model_->config().n_c; }
  int code_dim() const override { return model_->config().d_fine_per_cell; }
  RowMatrix encode(const RowMatrix& cells) const override { return model_->cell_codes(cells); }
  const FineModel& model() const { return *model_; }

 private:
  std::shared_ptr<const FineModel> model_;
};

/// Codes are the raw cell features: region distance on the feature tensor.
class RawFeatureEncoder final : public RegionEncoder {
 public:
  RawFeatureEncoder(int n_r, int n_c, int d_cell) : n_r_(n_r), n_c_(n_c), d_cell_(d_cell) {}
  int n_r() const override { return n_r_; }
  int n_c() const override { return n_c_; }
  int code_dim() const override { return d_cell_; }
  RowMatrix encode(const RowMatrix& cells) const override { return cells; }

 private:
  int n_r_, n_c_, d_cell_;
};

/// Encoded cells of one sheet. Absent and out-of-grid cells read as the
/// encoded empty cell.
class SheetCodes {
 public:
  SheetCodes(const SheetFeatures& features, const RegionEncoder& encoder);

  int n_rows() const { return n_rows_; }
  int n_cols() const { return n_cols_; }
  int n_r() const { return n_r_; }
  int n_c() const { return n_c_; }
  bool in_bounds(CellAddress a) const { return a.row >= 1 && a.col >= 1 && a.row <= n_rows_ && a.col <= n_cols_; }

  /// Row index into codes(); the empty code is the last row.
  Eigen::Index slot(int row, int col) const;
  const RowMatrix& codes() const { return codes_; }
  double sq_norm(Eigen::Index slot) const { return sq_norms_[static_cast<std::size_t>(slot)]; }

  /// Unit region vector centered on `anchor`; the anchor cell reads as empty
  /// when `mask_anchor` is set.
  Eigen::VectorXd region_vector(CellAddress anchor, bool mask_anchor) const;

 private:
  int n_rows_, n_cols_, n_r_, n_c_;
  RowMatrix codes_;
  std::vector<double> sq_norms_;
  std::unordered_map<std::int64_t, Eigen::Index> slots_;
};

/// Squared distance between the unit region vectors centered at `ca` in `a`
/// and `cb` in `b`.
double region_distance(const SheetCodes& a, CellAddress ca, const SheetCodes& b, CellAddress cb);

struct Models {
  std::shared_ptr<const CoarseModel> coarse;
  std::shared_ptr<const RegionEncoder> fine;
  std::shared_ptr<const TextEmbedder> embedder;
  int d_pat = 16;

  /// Trained pair from a model directory.
  static Models from_loaded(LoadedModels loaded);
  SheetFeatures features(const Sheet& s, std::optional<CellAddress> masked = std::nullopt) const {
    return SheetFeatures(s, *embedder, d_pat, masked);
  }
};

/// Reference corpus with both indexes. Workbooks are kept so that parameter
/// search can read the reference sheets.
struct IndexedCorpus {
  CoarseIndex coarse;
  FineIndex fine;
  std::map<std::string, std::shared_ptr<const Workbook>, std::less<>> workbooks;
  std::size_t skipped_formulas = 0;

  std::size_t formula_count() const { return fine.size(); }
  std::size_t sheet_count() const { return coarse.size(); }
};

IndexedCorpus empty_index(const Models& models);

/// Adds one workbook: a coarse entry per sheet and a fine entry per parseable
/// formula cell (anchor masked). Unparseable formulas are counted and skipped.
void index_workbook(IndexedCorpus& index, const Workbook& wb, const Models& models);
IndexedCorpus index_corpus(std::span<const Workbook> corpus, const Models& models);

/// coarse.idx, fine.idx and workbooks/<n>.json.
void save_index(const IndexedCorpus& index, const std::filesystem::path& dir);
IndexedCorpus load_index(const std::filesystem::path& dir);

struct ParameterSource {
  CellAddress reference;
  CellAddress resolved;
  double distance = 0;
  bool fallback = false;
  bool copied = false;  // sheet-qualified, taken verbatim
};

struct Provenance {
  std::string workbook_id;
  std::string sheet;
  CellAddress cell;
  std::string reference_formula;
  double sheet_distance = 0;
  double region_distance = 0;
  std::vector<ParameterSource> parameters;
};

struct Prediction {
  std::string formula;
  FormulaTemplate tmpl;
  ParameterCells params;
  double score = 0;
  Provenance provenance;
};

struct Resolution {
  CellAddress cell;
  double distance = 0;
  bool fallback = false;
};

/// Translates C_r by C_T - C_Fref, searches the (2d+1)^2 square around the
/// result, and rescans the whole target sheet if the translated cell is out
/// of bounds or the best distance exceeds theta. Ties go to the candidate
/// nearest the translated cell, then to reading order. Returns nullopt unless
/// the best distance is <= theta.
std::optional<Resolution> adapt_parameter(const SheetCodes& target, CellAddress c_t, const SheetCodes& reference,
                                          CellAddress c_fref, CellAddress c_r, const RecommenderConfig& cfg);

/// Convenience overload that featurizes both sheets; the target cell reads
/// as empty.
std::optional<Resolution> adapt_parameter(const Sheet& target, CellAddress c_t, const Sheet& reference,
                                          CellAddress c_fref, CellAddress c_r, const Models& models,
                                          const RecommenderConfig& cfg);

/// S1 -> S2 -> S3. An empty result means abstention. Throws
/// std::out_of_range if `c_t` lies outside `target`.
std::vector<Prediction> predict(const Sheet& target, CellAddress c_t, std::string_view target_workbook_id,
                                const IndexedCorpus& index, const Models& models, const RecommenderConfig& cfg);

}  // namespace formula_scout
