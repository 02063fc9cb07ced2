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

#include <array>
#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace formula_scout {

/// 1-based grid coordinate; col 1 is "A".
struct CellAddress {
  int row = 1;
  int col = 1;

  friend auto operator<=>(const CellAddress&, const CellAddress&) = default;
};

inline constexpr int kMaxColumn = 16384;  // "XFD"

/// Bijective base-26 column label: 1 -> "A", 27 -> "AA".
std::string column_label(int col);

/// Inverse of column_label; letters are case-insensitive.
int column_index(std::string_view letters);

/// Parses "D41" (case-insensitive, no "$" or sheet qualifier). Throws
/// ParseError naming the offending character.
CellAddress parse_a1(std::string_view s);

std::string to_a1(CellAddress addr);

using Rgb = std::array<int, 3>;

struct Style {
  Rgb bg{0, 0, 0};
  Rgb fg{0, 0, 0};
  bool bold = false;
  bool italic = false;
  double font_size = 0.0;
  double col_width = 0.0;
  double row_height = 0.0;

  friend bool operator==(const Style&, const Style&) = default;
};

enum class ValueType { empty, numeric, text, date, boolean };

std::string_view to_string(ValueType t);
std::optional<ValueType> value_type_from_string(std::string_view s);

struct Cell {
  CellAddress address;
  std::string value;
  ValueType type = ValueType::empty;
  std::optional<std::string> formula;
  Style style;

  friend bool operator==(const Cell&, const Cell&) = default;
};

/// Sparse grid. Absent in-bounds addresses read as empty cells with a zeroed
/// Style.
class Sheet {
 public:
  Sheet() = default;
  Sheet(std::string name, int n_rows, int n_cols)
      : name_(std::move(name)), n_rows_(n_rows), n_cols_(n_cols) {}

  const std::string& name() const noexcept { return name_; }
  int n_rows() const noexcept { return n_rows_; }
  int n_cols() const noexcept { return n_cols_; }

  bool in_bounds(CellAddress a) const noexcept {
    return a.row >= 1 && a.col >= 1 && a.row <= n_rows_ && a.col <= n_cols_;
  }

  /// Stored cell or nullptr.
  const Cell* find(CellAddress a) const;

  /// Stored cell, or an empty cell at `a`.
  Cell cell_at(CellAddress a) const;

  /// Inserts or replaces. Grows the sheet bounds if needed.
  void set(Cell cell);
  void erase(CellAddress a) { cells_.erase(a); }

  void resize(int n_rows, int n_cols);

  /// Row-major order.
  const std::map<CellAddress, Cell>& cells() const noexcept { return cells_; }

  std::vector<CellAddress> formula_cells() const;

  friend bool operator==(const Sheet&, const Sheet&) = default;

 private:
  std::string name_;
  int n_rows_ = 0;
  int n_cols_ = 0;
  std::map<CellAddress, Cell> cells_;
};

struct Workbook {
  std::string id;
  std::vector<Sheet> sheets;
  std::int64_t last_modified = 0;

  const Sheet* find_sheet(std::string_view name) const;
  std::vector<std::string> sheet_names() const;

  friend bool operator==(const Workbook&, const Workbook&) = default;
};

/// (workbook id, sheet name), used as the coarse index key.
struct SheetKey {
  std::string workbook_id;
  std::string sheet;

  friend auto operator<=>(const SheetKey&, const SheetKey&) = default;
};

}  // namespace formula_scout
