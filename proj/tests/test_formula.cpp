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

#include "formula_corpus.hpp"
#include "formula_scout/error.hpp"
#include "formula_scout/formula.hpp"

using namespace formula_scout;
using Kind = FormulaNode::Kind;

TEST(Formula, HandCorpusNormalizes) {
  const auto corpus = corpus::hand_corpus();
  ASSERT_EQ(corpus.size(), 50u);
  for (const auto& c : corpus) {
    EXPECT_EQ(normalize_formula(c.source), c.canonical) << c.source;
    EXPECT_EQ(normalize_formula(c.canonical), c.canonical) << c.canonical;
  }
}

TEST(Formula, GeneratedCorpusRoundTrips) {
  corpus::FormulaGenerator gen(11);
  for (int i = 0; i < 2000; ++i) {
    const auto c = gen.next();
    const FormulaNode a = parse_formula(c.source);
    ASSERT_EQ(normalize_formula(c.source), c.canonical) << c.source;
    FormulaNode stripped = a;
    strip_unary_plus(stripped);
    ASSERT_EQ(parse_formula(print_formula(stripped)), stripped) << c.source;
    const auto ex = extract_template(stripped);
    ASSERT_EQ(instantiate(ex.tmpl, ex.params), c.canonical) << c.source;
    ASSERT_EQ(static_cast<int>(ex.params.size()), ex.tmpl.hole_count);
  }
}

TEST(Formula, PrecedenceAndAssociativity) {
  const FormulaNode a = parse_formula("=1+2*3");
  ASSERT_EQ(a.kind, Kind::binary);
  EXPECT_EQ(a.binary_op, BinaryOp::add);
  EXPECT_EQ(a.children[0].text, "1");
  EXPECT_EQ(a.children[1].binary_op, BinaryOp::mul);

  const FormulaNode b = parse_formula("=1-2-3");
  EXPECT_EQ(b.binary_op, BinaryOp::sub);
  EXPECT_EQ(b.children[0].kind, Kind::binary);  // (1-2)-3
  EXPECT_EQ(b.children[1].text, "3");

  const FormulaNode c = parse_formula("=A1&B1=C1");
  EXPECT_EQ(c.binary_op, BinaryOp::eq);  // comparison binds loosest
  EXPECT_EQ(c.children[0].binary_op, BinaryOp::concat);

  const FormulaNode d = parse_formula("=1+2&3");
  EXPECT_EQ(d.binary_op, BinaryOp::concat);

  const FormulaNode e = parse_formula("=-2^2");
  EXPECT_EQ(e.kind, Kind::binary);  // negation binds tighter than ^
  EXPECT_EQ(e.children[0].kind, Kind::unary);

  const FormulaNode f = parse_formula("=A1:B2");
  EXPECT_EQ(f.kind, Kind::cell_range);
}

TEST(Formula, ParsesReferenceParts) {
  const FormulaNode a = parse_formula("='Q1 Data'!$B$7");
  ASSERT_EQ(a.kind, Kind::cell_ref);
  EXPECT_EQ(a.ref.addr, (CellAddress{7, 2}));
  EXPECT_TRUE(a.ref.abs_col);
  EXPECT_TRUE(a.ref.abs_row);
  EXPECT_EQ(a.ref.sheet.value_or(""), "Q1 Data");
  const FormulaNode b = parse_formula("=countif(c7:c37,c41)");
  EXPECT_EQ(b.kind, Kind::function_call);
  EXPECT_EQ(b.text, "COUNTIF");
  EXPECT_EQ(b.children.size(), 2u);
}

TEST(Formula, RejectsMalformedWithPosition) {
  for (const char* bad : {"", "SUM(A1)", "=", "=SUM(A1", "=1+", "=A1:", "=\"open", "=(1))", "=1 2", "=A0",
                          "=SUM(,)", "=#"}) {
    EXPECT_THROW(parse_formula(bad), ParseError) << bad;
  }
  try {
    parse_formula("=SUM(A1,)");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_GE(e.position(), 8u);
  }
}

TEST(Formula, AstSize) {
  EXPECT_EQ(ast_size(parse_formula("=COUNTIF(C7:C37,C41)")), 5);
  EXPECT_EQ(ast_size(parse_formula("=1+2")), 3);
  EXPECT_EQ(ast_size(parse_formula("=A1")), 1);
  EXPECT_EQ(ast_size(parse_formula("=(A1)")), 2);
  EXPECT_EQ(ast_size(parse_formula("=IF(A1,1,\"x\")")), 4);
  EXPECT_EQ(ast_size(parse_formula("=MAX(A1,MIN(B1:B9))")), 6);
  EXPECT_EQ(ast_size(parse_formula("=SUM(A1:B2,C3)")), 5);
}

TEST(Template, CountifExample) {
  const auto ex = extract_template(parse_formula("=COUNTIF(C7:C37,C41)"));
  EXPECT_EQ(ex.tmpl.canonical, "=COUNTIF(_:_,_)");
  EXPECT_EQ(ex.tmpl.hole_count, 3);
  EXPECT_EQ(ex.params, (ParameterCells{parse_a1("C7"), parse_a1("C37"), parse_a1("C41")}));
  EXPECT_TRUE(ex.tmpl.holes[0].range_start);
  EXPECT_EQ(ex.tmpl.holes[0].range_partner, 2);
  EXPECT_EQ(ex.tmpl.holes[1].range_partner, 1);
  EXPECT_EQ(ex.tmpl.holes[2].range_partner, 0);

  const ParameterCells p{parse_a1("C6"), parse_a1("C350"), parse_a1("C354")};
  EXPECT_EQ(instantiate(ex.tmpl, p), "=COUNTIF(C6:C350,C354)");
}

TEST(Template, HoleCounting) {
  EXPECT_EQ(extract_template(parse_formula("=A1+A1")).tmpl.hole_count, 2);
  EXPECT_EQ(extract_template(parse_formula("=A1+A1")).tmpl.canonical, "=_+_");
  const auto none = extract_template(parse_formula("=1+2"));
  EXPECT_EQ(none.tmpl.hole_count, 0);
  EXPECT_EQ(instantiate(none.tmpl, {}), "=1+2");
}

TEST(Template, SheetQualifiedAndAbsoluteHolesKeepDecoration) {
  const auto ex = extract_template(parse_formula("=Sheet2!$A$1+B2"));
  EXPECT_EQ(ex.tmpl.canonical, "=Sheet2!_+_");
  const ParameterCells p{parse_a1("C3"), parse_a1("D4")};
  EXPECT_EQ(instantiate(ex.tmpl, p), "=Sheet2!$C$3+D4");
}

TEST(Template, ArityMismatchThrows) {
  const auto ex = extract_template(parse_formula("=COUNTIF(C7:C37,C41)"));
  const ParameterCells two{parse_a1("A1"), parse_a1("A2")};
  EXPECT_THROW(instantiate(ex.tmpl, two), std::invalid_argument);
}

TEST(Formula, ShiftReferencesRespectsAnchors) {
  FormulaNode a = parse_formula("=A2*2+$B$1+C$1+$D1");
  shift_references(a, 1, 1);
  EXPECT_EQ(print_formula(a), "=B3*2+$B$1+D$1+$D2");
  FormulaNode b = parse_formula("=A1");
  EXPECT_THROW(shift_references(b, -1, 0), std::out_of_range);
}

TEST(Formula, Classification) {
  EXPECT_EQ(classify_formula(parse_formula("=IF(A1>0,1,0)")), FormulaType::conditional);
  EXPECT_EQ(classify_formula(parse_formula("=COUNTIF(C7:C37,C41)")), FormulaType::conditional);
  EXPECT_EQ(classify_formula(parse_formula("=SUM(A1:A3)")), FormulaType::math);
  EXPECT_EQ(classify_formula(parse_formula("=A1*2")), FormulaType::math);
  EXPECT_EQ(classify_formula(parse_formula("=CONCAT(A1,B1)")), FormulaType::string);
  EXPECT_EQ(classify_formula(parse_formula("=A1&B1")), FormulaType::string);
  EXPECT_EQ(classify_formula(parse_formula("=_xlfn.CONCAT(A1,B1)")), FormulaType::string);
  EXPECT_EQ(classify_formula(parse_formula("=TODAY()")), FormulaType::date);
  EXPECT_EQ(classify_formula(parse_formula("=IF(A1,TODAY(),0)")), FormulaType::conditional);
  EXPECT_EQ(classify_formula(parse_formula("=A1")), FormulaType::other);
  EXPECT_EQ(classify_formula(parse_formula("=MYFUNC(A1)")), FormulaType::other);
  EXPECT_EQ(to_string(FormulaType::date), "date");
}
