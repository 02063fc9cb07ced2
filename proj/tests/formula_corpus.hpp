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

// Formula corpora shared by the parser tests and the acceptance binary.
// Each entry pairs a source text with its expected canonical form, which the
// generator derives on its own rather than through the parser.

#pragma once

#include <cctype>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace formula_scout::corpus {

struct FormulaCase {
  std::string source;
  std::string canonical;
};

inline std::vector<FormulaCase> hand_corpus() {
  return {
      {"=COUNTIF(C7:C37,C41)", "=COUNTIF(C7:C37,C41)"},
      {"=countif(c7:c37, c41)", "=COUNTIF(C7:C37,C41)"},
      {"=COUNTIF(C6:C350,C354)", "=COUNTIF(C6:C350,C354)"},
      {"=SUM(A1:A9)", "=SUM(A1:A9)"},
      {"= sum( a1 : a9 )", "=SUM(A1:A9)"},
      {"=1+2*3", "=1+2*3"},
      {"=(1+2)*3", "=(1+2)*3"},
      {"=+A1", "=A1"},
      {"=-A1", "=-A1"},
      {"=A1%", "=A1%"},
      {"=2^3^2", "=2^3^2"},
      {"=A1&\" \"&B1", "=A1&\" \"&B1"},
      {"=IF(A1>0,SUM(B1:B9),0)", "=IF(A1>0,SUM(B1:B9),0)"},
      {"=if(a1 >= 10, \"Big\", \"small\")", "=IF(A1>=10,\"Big\",\"small\")"},
      {"=IF(A1<>B1,TRUE,FALSE)", "=IF(A1<>B1,TRUE,FALSE)"},
      {"=if(a1<=b1,true,false)", "=IF(A1<=B1,TRUE,FALSE)"},
      {"=$A$1+A$2+$A3", "=$A$1+A$2+$A3"},
      {"=SUM($B$2:$B$20)", "=SUM($B$2:$B$20)"},
      {"=Sheet2!A1", "=Sheet2!A1"},
      {"='My Sheet'!B2*2", "='My Sheet'!B2*2"},
      {"=SUM(Data!A1:A10)", "=SUM(Data!A1:A10)"},
      {"=VLOOKUP(A2,Prices!$A$2:$C$100,3,FALSE)", "=VLOOKUP(A2,Prices!$A$2:$C$100,3,FALSE)"},
      {"=AVERAGE(C2:D2)", "=AVERAGE(C2:D2)"},
      {"=ROUND(F5*0.08,2)", "=ROUND(F5*0.08,2)"},
      {"=MAX(C4-8,0)", "=MAX(C4-8,0)"},
      {"=CONCAT(A2,\" \",B2)", "=CONCAT(A2,\" \",B2)"},
      {"=UPPER(LEFT(C2,3))", "=UPPER(LEFT(C2,3))"},
      {"=SUMIF(C7:C37,C41,D7:D37)", "=SUMIF(C7:C37,C41,D7:D37)"},
      {"=COUNTA(A1:A99)", "=COUNTA(A1:A99)"},
      {"=TODAY()", "=TODAY()"},
      {"=NOW()-B2", "=NOW()-B2"},
      {"=DATE(2020,1,1)", "=DATE(2020,1,1)"},
      {"=YEAR(B2)+1", "=YEAR(B2)+1"},
      {"=B2+5", "=B2+5"},
      {"=IFERROR(A1/B1,0)", "=IFERROR(A1/B1,0)"},
      {"=IF(B2<35,\"Young\",IF(B2<60,\"Middle\",\"Senior\"))", "=IF(B2<35,\"Young\",IF(B2<60,\"Middle\",\"Senior\"))"},
      {"=\"He said \"\"hi\"\"\"", "=\"He said \"\"hi\"\"\""},
      {"=1.5e3*A1", "=1.5E3*A1"},
      {"=0.25", "=0.25"},
      {"=-(-A1)", "=-(-A1)"},
      {"=((A1))", "=((A1))"},
      {"=A1=B1", "=A1=B1"},
      {"=SUMPRODUCT(A1:A5,B1:B5)", "=SUMPRODUCT(A1:A5,B1:B5)"},
      {"=INDEX(A1:C9,MATCH(E1,A1:A9,0),2)", "=INDEX(A1:C9,MATCH(E1,A1:A9,0),2)"},
      {"=XFD1048576", "=XFD1048576"},
      {"=aa10*ab11", "=AA10*AB11"},
      {"=LEN(TRIM(A1))", "=LEN(TRIM(A1))"},
      {"=D5-C5", "=D5-C5"},
      {"=ROUND(E2/C2,3)", "=ROUND(E2/C2,3)"},
      {"=MIN(A1:A3, B1:B3 ,C1)", "=MIN(A1:A3,B1:B3,C1)"},
  };
}

/// Random formulas over literals, references, ranges, calls, binary and
/// unary operators. Composite binary operands are always parenthesized, so
/// the canonical text is fixed by construction. The source variant lowercases
/// names and columns and inserts spaces.
class FormulaGenerator {
 public:
  explicit FormulaGenerator(std::uint64_t seed) : rng_(seed) {}

  FormulaCase next() {
    FormulaCase c{"=", "="};
    expr(c, 0);
    return c;
  }

 private:
  int pick(int n) { return std::uniform_int_distribution<int>(0, n - 1)(rng_); }
  bool coin() { return pick(2) == 0; }

  void emit(FormulaCase& c, const std::string& canonical, const std::string& source) {
    c.canonical += canonical;
    c.source += source;
  }
  void both(FormulaCase& c, const std::string& s) { emit(c, s, s); }
  void space(FormulaCase& c) {
    if (pick(3) == 0) c.source += ' ';
  }

  static std::string lower(std::string s) {
    for (char& ch : s) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    return s;
  }

  static std::string upper(std::string s) {
    for (char& ch : s) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
    return s;
  }

  std::string column() {
    const int col = 1 + pick(pick(4) == 0 ? 800 : 26);
    std::string out;
    for (int n = col; n > 0; n = (n - 1) / 26) out.insert(out.begin(), static_cast<char>('A' + (n - 1) % 26));
    return out;
  }

  void ref(FormulaCase& c, bool allow_sheet) {
    if (allow_sheet && pick(8) == 0) {
      static const std::vector<std::pair<std::string, std::string>> sheets{
          {"Sheet2!", "Sheet2!"}, {"'Q1 Data'!", "'Q1 Data'!"}, {"Data!", "Data!"}};
      const auto& s = sheets[static_cast<std::size_t>(pick(3))];
      emit(c, s.first, s.second);
    }
    const std::string col = column();
    const std::string row = std::to_string(1 + pick(pick(4) == 0 ? 100000 : 60));
    const bool abs_c = pick(5) == 0, abs_r = pick(5) == 0;
    const std::string canon = (abs_c ? "$" : "") + col + (abs_r ? "$" : "") + row;
    const std::string src = (abs_c ? "$" : "") + (coin() ? lower(col) : col) + (abs_r ? "$" : "") + row;
    emit(c, canon, src);
  }

  void atom(FormulaCase& c, int depth) {
    switch (pick(depth >= 3 ? 6 : 8)) {
      case 0: {
        static const std::vector<std::string> nums{"0", "1", "2", "10", "0.5", "2.5", "100", "3.14", "1e3", "0.08"};
        const std::string& num = nums[static_cast<std::size_t>(pick(static_cast<int>(nums.size())))];
        emit(c, upper(num), coin() ? num : upper(num));
        return;
      }
      case 1: {
        static const std::vector<std::string> strs{"\"\"", "\"a\"", "\"Pass\"", "\"Hello World\"", "\"x,y\"",
                                                   "\"q\"\"q\""};
        both(c, strs[static_cast<std::size_t>(pick(static_cast<int>(strs.size())))]);
        return;
      }
      case 2:
        if (coin()) {
          emit(c, "TRUE", coin() ? "true" : "TRUE");
        } else {
          emit(c, "FALSE", coin() ? "false" : "FALSE");
        }
        return;
      case 3:
      case 4:
        ref(c, true);
        return;
      case 5:
        ref(c, true);
        space(c);
        both(c, ":");
        space(c);
        ref(c, false);
        return;
      case 6:
        call(c, depth + 1);
        return;
      default:
        both(c, "(");
        expr(c, depth + 1);
        both(c, ")");
        return;
    }
  }

  void call(FormulaCase& c, int depth) {
    static const std::vector<std::string> names{"SUM", "IF", "COUNTIF", "AVERAGE", "MAX", "MIN", "ROUND", "CONCAT",
                                                "LEFT", "DATE", "MYFUNC", "INDEX", "NOW", "ABS", "SUMIF"};
    const std::string name = names[static_cast<std::size_t>(pick(static_cast<int>(names.size())))];
    emit(c, name, coin() ? lower(name) : name);
    both(c, "(");
    const int n = depth >= 3 ? pick(2) : pick(4);
    for (int i = 0; i < n; ++i) {
      if (i) {
        both(c, ",");
        space(c);
      }
      expr(c, depth + 1);
    }
    both(c, ")");
  }

  void expr(FormulaCase& c, int depth) {
    const int kind = depth >= 3 ? 0 : pick(6);
    if (kind <= 2) {
      atom(c, depth);
    } else if (kind == 3) {
      static const std::vector<std::string> ops{"+", "-", "*", "/", "^", "&", "=", "<>", "<", "<=", ">", ">="};
      atom(c, depth + 1);
      space(c);
      both(c, ops[static_cast<std::size_t>(pick(static_cast<int>(ops.size())))]);
      space(c);
      atom(c, depth + 1);
    } else if (kind == 4) {
      both(c, "-");
      atom(c, depth + 1);
    } else {
      atom(c, depth + 1);
      both(c, "%");
    }
  }

  std::mt19937_64 rng_;
};

}  // namespace formula_scout::corpus
