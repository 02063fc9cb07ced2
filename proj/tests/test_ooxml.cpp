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

// Fixtures come from tests/fixtures/make_xlsx.py.

#include <gtest/gtest.h>

#include <filesystem>

#include "formula_scout/error.hpp"
#include "formula_scout/workbook_io.hpp"

using namespace formula_scout;

namespace {

const std::filesystem::path kDir = FS_FIXTURES;

struct Imported {
  Workbook wb;
  std::vector<std::string> warnings;
};

Imported import_styled() {
  Imported out;
  out.wb = import_ooxml_file(kDir / "styled.xlsx", [&](const std::string& w) { out.warnings.push_back(w); });
  return out;
}

const Sheet& details(const Imported& i) { return *i.wb.find_sheet("WorkshopDetails"); }

}  // namespace

TEST(Ooxml, SheetOrderFollowsWorkbookNotParts) {
  const auto i = import_styled();
  EXPECT_EQ(i.wb.sheet_names(), (std::vector<std::string>{"Instructions", "WorkshopDetails"}));
  EXPECT_EQ(i.wb.id, "styled");
  EXPECT_EQ(i.wb.last_modified, 1577934245);
  EXPECT_EQ(i.wb.sheets[0].cell_at({1, 1}).value, "Read me first");
}

TEST(Ooxml, NumericAndStoredFormula) {
  const auto i = import_styled();
  const Cell a2 = details(i).cell_at(parse_a1("A2"));
  EXPECT_EQ(a2.type, ValueType::numeric);
  EXPECT_EQ(a2.value, "5");
  const Cell b2 = details(i).cell_at(parse_a1("B2"));
  ASSERT_TRUE(b2.formula);
  EXPECT_EQ(*b2.formula, "=SUM(A1:A2)");
  EXPECT_EQ(b2.value, "5");
  EXPECT_EQ(details(i).cell_at(parse_a1("A3")).value, "0.3");
}

TEST(Ooxml, SharedFormulasExpandWithTranslatedReferences) {
  const auto i = import_styled();
  EXPECT_EQ(details(i).cell_at(parse_a1("C2")).formula.value_or(""), "=A2*2");
  EXPECT_EQ(details(i).cell_at(parse_a1("C3")).formula.value_or(""), "=A3*2");
  EXPECT_EQ(details(i).cell_at(parse_a1("C4")).formula.value_or(""), "=A4*2");
}

TEST(Ooxml, ValueTypes) {
  const auto i = import_styled();
  const Sheet& s = details(i);
  EXPECT_EQ(s.cell_at(parse_a1("D3")).type, ValueType::boolean);
  EXPECT_EQ(s.cell_at(parse_a1("D3")).value, "TRUE");
  EXPECT_EQ(s.cell_at(parse_a1("A4")).type, ValueType::date);
  EXPECT_EQ(s.cell_at(parse_a1("A4")).value, "2020-01-01");
  EXPECT_EQ(s.cell_at(parse_a1("B4")).value, "2020-01-02 12:00:00");
  EXPECT_EQ(s.cell_at(parse_a1("A5")).value, "rich text");
  EXPECT_EQ(s.cell_at(parse_a1("B5")).value, "inline");
  EXPECT_EQ(s.cell_at(parse_a1("C5")).type, ValueType::text);
  EXPECT_EQ(s.cell_at(parse_a1("C5")).formula.value_or(""), "=CONCAT(A5,\"!\")");
  EXPECT_EQ(s.cell_at(parse_a1("B6")).value, "#DIV/0!");
}

TEST(Ooxml, StyleSubset) {
  const auto i = import_styled();
  const Sheet& s = details(i);
  const Style h = s.cell_at(parse_a1("A1")).style;
  EXPECT_TRUE(h.bold);
  EXPECT_FALSE(h.italic);
  EXPECT_DOUBLE_EQ(h.font_size, 14);
  EXPECT_EQ(h.fg, (Rgb{255, 0, 0}));
  EXPECT_EQ(h.bg, (Rgb{0x44, 0x72, 0xC4}));  // theme accent 1
  EXPECT_DOUBLE_EQ(h.row_height, 22);
  EXPECT_DOUBLE_EQ(h.col_width, 9);
  EXPECT_DOUBLE_EQ(s.cell_at(parse_a1("B1")).style.col_width, 20.5);

  const Style plain = s.cell_at(parse_a1("A2")).style;
  EXPECT_EQ(plain.bg, (Rgb{255, 255, 255}));
  EXPECT_EQ(plain.fg, (Rgb{0, 0, 0}));
  EXPECT_DOUBLE_EQ(plain.font_size, 11);
  EXPECT_DOUBLE_EQ(plain.row_height, 15);

  const Style dated = s.cell_at(parse_a1("B4")).style;
  EXPECT_TRUE(dated.italic);
  EXPECT_EQ(dated.fg, (Rgb{0, 0, 255}));  // indexed 12
  EXPECT_DOUBLE_EQ(dated.font_size, 10);
}

TEST(Ooxml, StyledEmptyCellKept) {
  const auto i = import_styled();
  const Cell* c6 = details(i).find(parse_a1("C6"));
  ASSERT_NE(c6, nullptr);
  EXPECT_EQ(c6->type, ValueType::empty);
  EXPECT_TRUE(c6->style.bold);
}

TEST(Ooxml, BadCellSkippedWithWarning) {
  const auto i = import_styled();
  EXPECT_EQ(details(i).find(parse_a1("A6")), nullptr);
  ASSERT_EQ(i.warnings.size(), 1u);
  EXPECT_NE(i.warnings[0].find("WorkshopDetails!A6"), std::string::npos);
}

TEST(Ooxml, ImportedWorkbookSurvivesDumpRoundTrip) {
  const auto i = import_styled();
  EXPECT_EQ(load_workbook(dump_workbook(i.wb)), i.wb);
}

TEST(Ooxml, CorruptArchivesThrowImportError) {
  for (const char* name : {"truncated.xlsx", "crc_damaged.xlsx", "not_zip.xlsx"}) {
    EXPECT_THROW(import_ooxml_file(kDir / name), ImportError) << name;
  }
  EXPECT_THROW(import_ooxml(""), ImportError);
  EXPECT_THROW(import_ooxml_file(kDir / "missing.xlsx"), ImportError);
}
