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
#include <istream>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "formula_scout/grid.hpp"

namespace formula_scout {

/// Maps cell text to a fixed-dimension vector.
class TextEmbedder {
 public:
  virtual ~TextEmbedder() = default;
  virtual int dim() const = 0;
  virtual std::vector<double> embed(std::string_view text) const = 0;
  /// Identifies the embedder in model files, e.g. "trigram:50:0".
  virtual std::string describe() const = 0;
};

/// Signed feature hashing of character trigrams over the lowercased text
/// padded with boundary marks; the result is L2-normalized. Empty text maps
/// to the zero vector.
class HashedTrigramEmbedder final : public TextEmbedder {
 public:
  explicit HashedTrigramEmbedder(int dim = 50, std::uint64_t seed = 0);
  int dim() const override { return dim_; }
  std::vector<double> embed(std::string_view text) const override;
  std::string describe() const override;

 private:
  int dim_;
  std::uint64_t seed_;
};

/// Mean of word vectors over lowercased tokens; tokens are split on
/// whitespace and punctuation. Text with no known token maps to zero.
class WordVectorEmbedder final : public TextEmbedder {
 public:
  /// One "token v1 ... vd" line per token; d is taken from the first line.
  static WordVectorEmbedder load(std::istream& in, std::string source = "stream");
  static WordVectorEmbedder load_file(const std::filesystem::path& path);

  int dim() const override { return dim_; }
  std::vector<double> embed(std::string_view text) const override;
  std::string describe() const override { return "wordvec:" + source_; }
  std::size_t vocabulary_size() const { return table_.size(); }

 private:
  int dim_ = 0;
  std::string source_;
  std::unordered_map<std::string, std::vector<double>> table_;
};

/// Builds an embedder from a description string as produced by describe().
std::unique_ptr<TextEmbedder> make_embedder(std::string_view description);

std::vector<std::string> tokenize(std::string_view text);

/// Signed-bucket hash of the boundary-padded character trigrams of `text`,
/// L2-normalized (zero for empty text).
std::vector<double> hashed_trigrams(std::string_view text, int dim, std::uint64_t seed);

/// digit -> 'D', ASCII letter -> 'L', whitespace -> 'S', everything else
/// kept; truncated to 32 characters.
std::string syntactic_pattern(std::string_view value);

/// Block layout of a cell feature vector:
/// [semantic | type one-hot (5) | pattern hash | style (11)].
struct FeatureLayout {
  int d_sem = 50;
  int d_pat = 16;

  static constexpr int kTypes = 5;
  static constexpr int kStyle = 11;

  int dim() const { return d_sem + kTypes + d_pat + kStyle; }
  int type_offset() const { return d_sem; }
  int pattern_offset() const { return d_sem + kTypes; }
  int style_offset() const { return d_sem + kTypes + d_pat; }
};

/// Pattern hashing uses a fixed seed distinct from any text embedder.
inline constexpr std::uint64_t kPatternSeed = 0x9e3779b97f4a7c15ull;

std::vector<double> featurize_cell(const Cell& cell, const TextEmbedder& embedder, int d_pat = 16);

enum class WindowMode { sheet_top_left, region_centered };

struct ViewWindow {
  const Sheet* sheet = nullptr;
  CellAddress anchor;
  int n_r = 100;
  int n_c = 10;
  WindowMode mode = WindowMode::sheet_top_left;

  /// Sheet coordinate of window cell (1,1); may be < 1 for centered windows.
  int top() const { return mode == WindowMode::sheet_top_left ? 1 : anchor.row - (n_r + 1) / 2 + 1; }
  int left() const { return mode == WindowMode::sheet_top_left ? 1 : anchor.col - (n_c + 1) / 2 + 1; }
};

ViewWindow sheet_window(const Sheet& sheet, int n_r = 100, int n_c = 10);

/// Anchor sits at window cell (ceil(n_r/2), ceil(n_c/2)). Throws
/// std::out_of_range when `c` is outside the sheet.
ViewWindow region_window(const Sheet& sheet, CellAddress c, int n_r = 100, int n_c = 10);

/// n_r x n_c x depth, row-major with the feature index fastest.
struct WindowTensor {
  int rows = 0;
  int cols = 0;
  int depth = 0;
  std::vector<double> data;

  std::span<const double> cell(int r, int c) const {
    return {data.data() + (static_cast<std::size_t>(r) * cols + c) * depth, static_cast<std::size_t>(depth)};
  }
  std::span<double> cell(int r, int c) {
    return {data.data() + (static_cast<std::size_t>(r) * cols + c) * depth, static_cast<std::size_t>(depth)};
  }
  friend bool operator==(const WindowTensor&, const WindowTensor&) = default;
};

/// Out-of-grid window cells are empty cells (no clamping).
WindowTensor window_tensor(const ViewWindow& w, const TextEmbedder& embedder, int d_pat = 16);

/// Per-sheet cache of cell features. Cells outside the sheet, absent cells
/// and the optional masked cell all read as the empty-cell vector.
class SheetFeatures {
 public:
  SheetFeatures(const Sheet& sheet, const TextEmbedder& embedder, int d_pat = 16,
                std::optional<CellAddress> masked = std::nullopt);

  int depth() const { return depth_; }
  int n_rows() const { return n_rows_; }
  int n_cols() const { return n_cols_; }
  std::span<const double> at(int row, int col) const;
  std::span<const double> empty() const { return empty_; }

  /// Present (non-empty-vector) cells, row-major.
  const std::vector<CellAddress>& present() const { return present_; }

  WindowTensor window(int top, int left, int n_r, int n_c) const;

 private:
  int depth_;
  int n_rows_;
  int n_cols_;
  std::vector<double> empty_;
  std::vector<double> values_;
  std::unordered_map<std::int64_t, std::size_t> slot_;
  std::vector<CellAddress> present_;
};

}  // namespace formula_scout
