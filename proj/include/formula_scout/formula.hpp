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

#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "formula_scout/grid.hpp"

namespace formula_scout {

enum class BinaryOp { add, sub, mul, div, pow, concat, eq, ne, lt, le, gt, ge };
enum class UnaryOp { plus, minus, percent };

std::string_view to_string(BinaryOp op);

/// A reference as written: address plus the "$" flags and an optional sheet
/// qualifier. Flags and qualifier affect printing only.
struct CellRef {
  CellAddress addr;
  bool abs_col = false;
  bool abs_row = false;
  std::optional<std::string> sheet;

  friend bool operator==(const CellRef&, const CellRef&) = default;
};

/// Formula syntax tree node. Children hold function arguments, the two
/// endpoints of a range, or operator operands.
struct FormulaNode {
  enum class Kind {
    function_call,
    cell_ref,
    cell_range,
    number,
    string,
    boolean,
    binary,
    unary,
    paren,
    hole,
  };

  Kind kind = Kind::number;
  /// Function name (uppercase), number lexeme, string contents, TRUE/FALSE.
  std::string text;
  BinaryOp binary_op = BinaryOp::add;
  UnaryOp unary_op = UnaryOp::minus;
  /// cell_ref and hole.
  CellRef ref;
  /// 1-based hole ordinal.
  int hole = 0;
  std::vector<FormulaNode> children;

  friend bool operator==(const FormulaNode&, const FormulaNode&) = default;
};

/// Parses "=..." into a tree. Precedence from tightest: range ":", unary
/// (+,-,%), ^, * /, + -, &, comparisons; all binary levels left-associative.
/// Function names are not validated. Throws ParseError with the offending
/// position.
FormulaNode parse_formula(std::string_view s);

/// Prints with a leading "=", no whitespace, uppercase names and columns.
std::string print_formula(const FormulaNode& ast);

/// parse, drop unary "+", print. The form used for exact-match comparison.
std::string normalize_formula(std::string_view s);

/// Removes every unary "+" node in place.
void strip_unary_plus(FormulaNode& ast);

/// Total node count including leaves; a range counts as 3 (range + endpoints).
int ast_size(const FormulaNode& ast);

using ParameterCells = std::vector<CellAddress>;

struct HoleInfo {
  CellRef ref;             // as written in the source formula
  int range_partner = 0;   // ordinal of the other endpoint, 0 when not a range
  bool range_start = false;
};

/// A formula with every cell reference replaced by a numbered hole.
struct FormulaTemplate {
  FormulaNode root;
  int hole_count = 0;
  /// "=COUNTIF(_:_,_)"; sheet-qualified holes render as "Sheet2!_".
  std::string canonical;
  /// Indexed by ordinal - 1.
  std::vector<HoleInfo> holes;
};

struct ExtractedTemplate {
  FormulaTemplate tmpl;
  ParameterCells params;
};

/// Holes are numbered 1..n in left-to-right source order.
ExtractedTemplate extract_template(const FormulaNode& ast);

/// Fills holes with `params` (keeping each hole's "$" flags and sheet
/// qualifier) and prints. Throws std::invalid_argument on arity mismatch.
std::string instantiate(const FormulaTemplate& t, std::span<const CellAddress> params);

/// Shifts every relative row/column by (drow, dcol). Used to expand shared
/// formulas. Throws std::out_of_range if a reference leaves the grid.
void shift_references(FormulaNode& ast, int drow, int dcol);

enum class FormulaType { conditional, math, string, date, other };

std::string_view to_string(FormulaType t);

/// Function name -> category from the bundled function table.
const std::map<std::string, FormulaType, std::less<>>& function_categories();

/// conditional > date > string > math > other.
FormulaType classify_formula(const FormulaNode& ast);

}  // namespace formula_scout
