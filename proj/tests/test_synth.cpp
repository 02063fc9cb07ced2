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

#include <set>

#include "formula_scout/formula.hpp"
#include "formula_scout/synth.hpp"

using namespace formula_scout;

namespace {

std::vector<Workbook> family(int f) {
  std::vector<Workbook> out;
  for (auto& wb : synth_corpus({kSynthFamilies, 8, 3, 0})) {
    if (synth_family(wb.id) == f) out.push_back(std::move(wb));
  }
  return out;
}

// Data rows carry a label or row number in column A; totals and summary rows
// do not (the totals label is "Total").
bool in_body(const Sheet& s, int row) {
  const Cell* a = s.find({row, 1});
  return a && a->value != "Total";
}

}  // namespace

TEST(Synth, IdsFamiliesAndTimestamps) {
  const auto corpus = synth_corpus({3, 4, 1, 0});
  ASSERT_EQ(corpus.size(), 12u);
  std::set<std::string> ids;
  for (const auto& wb : corpus) {
    ids.insert(wb.id);
    EXPECT_GE(synth_family(wb.id), 0);
    EXPECT_LT(synth_family(wb.id), 3);
    EXPECT_EQ(wb.sheets.size(), 2u);
  }
  EXPECT_EQ(ids.size(), corpus.size());
  EXPECT_EQ(synth_family("budget.xlsx"), -1);
  EXPECT_EQ(synth_corpus({3, 4, 1, 0}), corpus);
}

TEST(Synth, FormulaCapLimitsEverySheet) {
  for (const auto& wb : synth_corpus({4, 2, 1, 3})) {
    for (const auto& s : wb.sheets) EXPECT_LE(s.formula_cells().size(), 3u);
  }
}

TEST(SynthAlignment, IdentityOnTheSameSheet) {
  for (const auto& wb : family(0)) {
    for (const auto& s : wb.sheets) {
      for (const auto& a : s.formula_cells()) EXPECT_EQ(synth_aligned_cell(s, a, s), a);
    }
  }
}

TEST(SynthAlignment, RowFormulasTranslateByTheHeaderOffset) {
  int compared = 0, shifted = 0;
  for (int f = 0; f < kSynthFamilies; ++f) {
    const auto wbs = family(f);
    for (const auto& x : wbs) {
      for (const auto& y : wbs) {
        const Sheet& s = x.sheets[0];
        const Sheet& t = *y.find_sheet(s.name());
        for (const auto& a : s.formula_cells()) {
          if (!in_body(s, a.row)) continue;
          const std::string& fa = *s.find(a)->formula;
          const auto b = synth_aligned_cell(s, a, t);
          if (!b) continue;
          ASSERT_NE(t.find(*b), nullptr);
          ASSERT_TRUE(t.find(*b)->formula) << x.id << " -> " << y.id;
          FormulaNode ast = parse_formula(fa);
          shift_references(ast, b->row - a.row, 0);
          EXPECT_EQ(print_formula(ast), *t.find(*b)->formula);
          ++compared;
          shifted += b->row != a.row;
        }
      }
    }
  }
  EXPECT_GT(compared, 1000);
  EXPECT_GT(shifted, 100);
}

TEST(SynthAlignment, TotalsAndSummaryRowsKeepTheirRole) {
  int totals = 0, summaries = 0;
  for (int f = 0; f < kSynthFamilies; ++f) {
    const auto wbs = family(f);
    for (std::size_t i = 1; i < wbs.size(); ++i) {
      for (const auto& s : wbs[0].sheets) {
        const Sheet& t = *wbs[i].find_sheet(s.name());
        for (const auto& a : s.formula_cells()) {
          if (in_body(s, a.row)) continue;
          const auto b = synth_aligned_cell(s, a, t);
          ASSERT_TRUE(b);
          const Cell* label_a = s.find({a.row, 1});
          if (label_a && label_a->value == "Total") {
            ASSERT_NE(t.find({b->row, 1}), nullptr);
            EXPECT_EQ(t.find({b->row, 1})->value, "Total");
            ++totals;
          } else {
            // Summary rows: same category label in column C.
            ASSERT_NE(t.find({b->row, 3}), nullptr);
            EXPECT_EQ(t.find({b->row, 3})->value, s.find({a.row, 3})->value);
            ++summaries;
          }
        }
      }
    }
  }
  EXPECT_GT(totals, 0);
  EXPECT_GT(summaries, 0);
}

TEST(SynthAlignment, EveryRowKeepsTheTotalsRowFixed) {
  const auto wbs = family(0);
  for (const auto& x : wbs) {
    for (const auto& y : wbs) {
      const Sheet& s = x.sheets[0];
      const Sheet& t = y.sheets[0];
      for (int r = 1; r <= s.n_rows(); ++r) {
        const auto b = synth_aligned_cell(s, {r, 1}, t);
        if (!b) continue;
        EXPECT_TRUE(t.in_bounds(*b));
        const Cell* ca = s.find({r, 1});
        const Cell* cb = t.find(*b);
        const bool ta = ca && ca->value == "Total", tb = cb && cb->value == "Total";
        EXPECT_EQ(ta, tb) << x.id << " row " << r << " -> " << y.id << " row " << b->row;
      }
    }
  }
}
