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
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "formula_scout/grid.hpp"

namespace formula_scout {

/// Template-family spreadsheet generator. Every family has a fixed two-sheet
/// layout (a row-formula table with totals, and a category list with a
/// COUNTIF/SUMIF summary block); variants jitter the row count by up to
/// 10%, may insert a subtitle row above the header, may append a notes
/// column, and redraw all values.
struct SynthConfig {
  int families = 10;  // at most kSynthFamilies
  int variants = 8;
  std::uint64_t seed = 1;
  /// Keep at most this many formulas per sheet (others become plain values);
  /// 0 keeps all.
  int formulas_per_sheet = 0;
};

inline constexpr int kSynthFamilies = 10;

/// Workbook ids are "fam<FF>-v<VVVV>". last_modified increases with the
/// variant number, so the newest variant of every family is the most recent.
std::vector<Workbook> synth_corpus(const SynthConfig& cfg);

/// Family number encoded in a synthetic workbook id; -1 if not synthetic.
int synth_family(std::string_view workbook_id);

/// Cell of `to` that plays the role `at` plays in `from`, where both sheets
/// come from the same family layout. The title row maps to itself; other rows
/// down to the end of the data body
/// are matched relative to the header row; rows below it relative to the
/// first row after the body. nullopt when `to` has no such cell.
std::optional<CellAddress> synth_aligned_cell(const Sheet& from, CellAddress at, const Sheet& to);

/// Two-sheet category-count example. The target sheet has its header at row
/// 6, colors in C7:C37 and a count block headed at row 40 whose first row
/// holds "=COUNTIF(C7:C37,C41)" in D41. The reference sheet has its header
/// at row 5, colors in C6:C350 and "=COUNTIF(C6:C350,C354)" in D354.
Workbook category_count_target();
Workbook category_count_reference();

}  // namespace formula_scout
