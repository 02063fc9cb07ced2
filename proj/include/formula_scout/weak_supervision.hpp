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
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "formula_scout/features.hpp"
#include "formula_scout/grid.hpp"

namespace formula_scout {

/// Sheet-name frequencies over a universe of sheets.
struct SheetNameStats {
  std::map<std::string, std::int64_t, std::less<>> freq;
  std::int64_t total = 0;

  void add(std::string_view name, std::int64_t count = 1);
  static SheetNameStats from_corpus(std::span<const Workbook> corpus);
};

/// freq/total, or 1/total for a name never seen. Throws std::invalid_argument
/// when total is 0.
double name_probability(const SheetNameStats& stats, std::string_view name);
double log_name_probability(const SheetNameStats& stats, std::string_view name);

/// Sum of log name probabilities when both files have the same non-empty
/// sheet-name sequence; nullopt otherwise.
std::optional<double> log_p_value(const Workbook& a, const Workbook& b, const SheetNameStats& stats);

/// Same positional names and a p-value product at or below alpha.
bool similar_file_test(const Workbook& a, const Workbook& b, const SheetNameStats& stats, double alpha = 0.05);

enum class PairLabel { positive, negative };

std::string_view to_string(PairLabel l);

/// Rows and columns deleted from the second sheet of a pair (1-based, sorted).
struct SheetAugmentation {
  std::vector<int> removed_rows;
  std::vector<int> removed_cols;

  bool empty() const { return removed_rows.empty() && removed_cols.empty(); }
  friend bool operator==(const SheetAugmentation&, const SheetAugmentation&) = default;
};

/// Trailing window rows and columns blanked in the second region of a pair.
struct RegionAugmentation {
  int rows = 0;
  int cols = 0;

  friend bool operator==(const RegionAugmentation&, const RegionAugmentation&) = default;
};

struct SheetPair {
  SheetKey a;
  SheetKey b;
  PairLabel label = PairLabel::positive;
  std::optional<SheetAugmentation> augmentation;

  friend bool operator==(const SheetPair&, const SheetPair&) = default;
};

struct RegionKey {
  std::string workbook_id;
  std::string sheet;
  CellAddress cell;

  friend auto operator<=>(const RegionKey&, const RegionKey&) = default;
};

struct RegionPair {
  RegionKey a;
  RegionKey b;
  PairLabel label = PairLabel::positive;
  std::optional<RegionAugmentation> augmentation;

  friend bool operator==(const RegionPair&, const RegionPair&) = default;
};

struct AugmentConfig {
  double p_max = 0.10;
  double region_fraction = 0.20;
  std::uint64_t seed = 0;
};

/// Workbooks by id, for resolving pair keys.
class CorpusView {
 public:
  explicit CorpusView(std::span<const Workbook> corpus);
  const Workbook* workbook(std::string_view id) const;
  /// Throws std::out_of_range for an unknown key.
  const Sheet& sheet(const SheetKey& key) const;
  std::span<const Workbook> all() const { return corpus_; }

 private:
  std::span<const Workbook> corpus_;
  std::map<std::string, std::size_t, std::less<>> by_id_;
};

/// Positives: every aligned sheet pair of every file pair that passes
/// similar_file_test. Negatives: as many sampled cross-file sheet pairs as
/// positives, drawn only from file pairs with disjoint sheet-name sets.
/// Throws std::invalid_argument on an empty corpus.
std::vector<SheetPair> generate_sheet_pairs(std::span<const Workbook> corpus, const SheetNameStats& stats,
                                            double alpha, std::mt19937_64& rng);

/// For each positive sheet pair, a positive region pair per shared formula
/// location with equal normalized formulas, and for each such positive a
/// negative found by scanning the second sheet down the column and then
/// through the following columns for the first formula that differs.
std::vector<RegionPair> generate_region_pairs(std::span<const SheetPair> sheet_pairs, const CorpusView& corpus);

/// Each row and column of `sheet` is removed independently with probability p.
SheetAugmentation draw_sheet_augmentation(const Sheet& sheet, double p, std::mt19937_64& rng);

/// Copy of `sheet` with the listed rows and columns removed and the rest
/// closed up. Formulas are carried as text, unchanged.
Sheet apply_sheet_augmentation(const Sheet& sheet, const SheetAugmentation& aug);

/// Binomial(n_r, p) trailing rows and Binomial(n_c, p) trailing columns,
/// capped so the window center cell always survives.
RegionAugmentation draw_region_augmentation(int n_r, int n_c, double p, std::mt19937_64& rng);

/// Overwrites the trailing rows/columns of a window tensor with `empty`.
void apply_region_augmentation(WindowTensor& t, const RegionAugmentation& aug, std::span<const double> empty);

enum class AugmentKind { sheet, region };

/// Draws p ~ U(0, p_max) and attaches an augmentation of the pair's second
/// element. Labels are unchanged.
SheetPair augment(const SheetPair& pair, const Sheet& b, const AugmentConfig& cfg, std::mt19937_64& rng);
RegionPair augment(const RegionPair& pair, int n_r, int n_c, const AugmentConfig& cfg, std::mt19937_64& rng);

/// Adds one augmented copy of every positive sheet pair, and augments a
/// region_fraction subset of positive region pairs in place.
void augment_pairs(std::vector<SheetPair>& sheet_pairs, std::vector<RegionPair>& region_pairs, const CorpusView& corpus,
                   int n_r, int n_c, const AugmentConfig& cfg);

/// JSON-lines pair files: one object per line.
void write_sheet_pairs(const std::vector<SheetPair>& pairs, const std::filesystem::path& path);
void write_region_pairs(const std::vector<RegionPair>& pairs, const std::filesystem::path& path);
std::vector<SheetPair> read_sheet_pairs(const std::filesystem::path& path);
std::vector<RegionPair> read_region_pairs(const std::filesystem::path& path);

}  // namespace formula_scout
