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

#include "formula_scout/formula.hpp"

#include <cctype>
#include <sstream>
#include <stdexcept>

#include "formula_scout/error.hpp"
#include "function_categories_data.hpp"

namespace formula_scout {
namespace {

using Kind = FormulaNode::Kind;

char upper(char c) { return static_cast<char>(std::toupper(static_cast<unsigned char>(c))); }

bool is_word_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.' || c == '$';
}

std::string uppercase(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = upper(c);
  return out;
}

// Tries "$A$1"-style text; nullopt when the word is not a cell reference.
std::optional<CellRef> match_ref(std::string_view w) {
  CellRef r;
  std::size_t i = 0;
  if (i < w.size() && w[i] == '$') {
    r.abs_col = true;
    ++i;
  }
  std::size_t letters = i;
  while (i < w.size() && std::isalpha(static_cast<unsigned char>(w[i]))) ++i;
  if (i == letters || i - letters > 3) return std::nullopt;
  std::string_view col = w.substr(letters, i - letters);
  if (i < w.size() && w[i] == '$') {
    r.abs_row = true;
    ++i;
  }
  std::size_t digits = i;
  while (i < w.size() && std::isdigit(static_cast<unsigned char>(w[i]))) ++i;
  if (i == digits || i != w.size()) return std::nullopt;
  long long row = 0;
  for (char c : w.substr(digits)) {
    row = row * 10 + (c - '0');
    if (row > 1048576) return std::nullopt;
  }
  if (row < 1) return std::nullopt;
  int c = 0;
  try {
    c = column_index(col);
  } catch (const ParseError&) {
    return std::nullopt;
  }
  r.addr = {static_cast<int>(row), c};
  return r;
}

class Parser {
 public:
  explicit Parser(std::string_view s) : s_(s) {}

  FormulaNode parse() {
    skip_ws();
    if (!consume('=')) fail("formula must start with '='");
    skip_ws();
    if (at_end()) fail("empty formula");
    FormulaNode root = comparison();
    skip_ws();
    if (!at_end()) fail(std::string("unexpected character '") + s_[pos_] + "'");
    return root;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const { throw ParseError(msg, pos_); }

  bool at_end() const { return pos_ >= s_.size(); }
  char peek(std::size_t ahead = 0) const { return pos_ + ahead < s_.size() ? s_[pos_ + ahead] : '\0'; }

  void skip_ws() {
    while (!at_end() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  bool consume(char c) {
    if (peek() == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  static FormulaNode binary(BinaryOp op, FormulaNode lhs, FormulaNode rhs) {
    FormulaNode n;
    n.kind = Kind::binary;
    n.binary_op = op;
    n.children.push_back(std::move(lhs));
    n.children.push_back(std::move(rhs));
    return n;
  }

  FormulaNode comparison() {
    FormulaNode lhs = concat();
    for (;;) {
      skip_ws();
      BinaryOp op;
      char c = peek();
      if (c == '=') {
        op = BinaryOp::eq;
        pos_ += 1;
      } else if (c == '<' && peek(1) == '>') {
        op = BinaryOp::ne;
        pos_ += 2;
      } else if (c == '<' && peek(1) == '=') {
        op = BinaryOp::le;
        pos_ += 2;
      } else if (c == '>' && peek(1) == '=') {
        op = BinaryOp::ge;
        pos_ += 2;
      } else if (c == '<') {
        op = BinaryOp::lt;
        pos_ += 1;
      } else if (c == '>') {
        op = BinaryOp::gt;
        pos_ += 1;
      } else {
        return lhs;
      }
      lhs = binary(op, std::move(lhs), concat());
    }
  }

  FormulaNode concat() {
    FormulaNode lhs = additive();
    for (;;) {
      skip_ws();
      if (!consume('&')) return lhs;
      lhs = binary(BinaryOp::concat, std::move(lhs), additive());
    }
  }

  FormulaNode additive() {
    FormulaNode lhs = multiplicative();
    for (;;) {
      skip_ws();
      if (consume('+')) {
        lhs = binary(BinaryOp::add, std::move(lhs), multiplicative());
      } else if (consume('-')) {
        lhs = binary(BinaryOp::sub, std::move(lhs), multiplicative());
      } else {
        return lhs;
      }
    }
  }

  FormulaNode multiplicative() {
    FormulaNode lhs = power();
    for (;;) {
      skip_ws();
      if (consume('*')) {
        lhs = binary(BinaryOp::mul, std::move(lhs), power());
      } else if (consume('/')) {
        lhs = binary(BinaryOp::div, std::move(lhs), power());
      } else {
        return lhs;
      }
    }
  }

  FormulaNode power() {
    FormulaNode lhs = unary();
    for (;;) {
      skip_ws();
      if (!consume('^')) return lhs;
      lhs = binary(BinaryOp::pow, std::move(lhs), unary());
    }
  }

  FormulaNode unary() {
    skip_ws();
    if (peek() == '+' || peek() == '-') {
      UnaryOp op = peek() == '+' ? UnaryOp::plus : UnaryOp::minus;
      ++pos_;
      FormulaNode n;
      n.kind = Kind::unary;
      n.unary_op = op;
      n.children.push_back(unary());
      return n;
    }
    FormulaNode arg = primary();
    for (;;) {
      skip_ws();
      if (!consume('%')) return arg;
      FormulaNode n;
      n.kind = Kind::unary;
      n.unary_op = UnaryOp::percent;
      n.children.push_back(std::move(arg));
      arg = std::move(n);
    }
  }

  std::string word() {
    std::size_t start = pos_;
    while (!at_end() && is_word_char(s_[pos_])) ++pos_;
    return std::string(s_.substr(start, pos_ - start));
  }

  std::string quoted_sheet() {
    ++pos_;  // opening quote
    std::string name;
    for (;;) {
      if (at_end()) fail("unterminated sheet name");
      char c = s_[pos_++];
      if (c == '\'') {
        if (peek() == '\'') {
          name.push_back('\'');
          ++pos_;
          continue;
        }
        break;
      }
      name.push_back(c);
    }
    if (name.empty()) fail("empty sheet name");
    return name;
  }

  CellRef ref_after_qualifier(const std::optional<std::string>& sheet) {
    std::size_t start = pos_;
    std::string w = word();
    auto r = match_ref(w);
    if (!r) {
      pos_ = start;
      fail("expected cell reference");
    }
    r->sheet = sheet;
    return *r;
  }

  FormulaNode ref_or_range(CellRef first) {
    FormulaNode ref;
    ref.kind = Kind::cell_ref;
    ref.ref = std::move(first);
    std::size_t save = pos_;
    skip_ws();
    if (!consume(':')) {
      pos_ = save;
      return ref;
    }
    skip_ws();
    std::optional<std::string> sheet;
    if (peek() == '\'') {
      sheet = quoted_sheet();
      if (!consume('!')) fail("expected '!' after sheet name");
    } else {
      std::size_t wstart = pos_;
      std::string w = word();
      if (peek() == '!') {
        ++pos_;
        sheet = w;
      } else {
        pos_ = wstart;
      }
    }
    CellRef second = ref_after_qualifier(std::nullopt);
    if (sheet && sheet != ref.ref.sheet) fail("range endpoints on different sheets");
    FormulaNode end;
    end.kind = Kind::cell_ref;
    end.ref = std::move(second);
    FormulaNode range;
    range.kind = Kind::cell_range;
    range.children.push_back(std::move(ref));
    range.children.push_back(std::move(end));
    return range;
  }

  FormulaNode primary() {
    skip_ws();
    if (at_end()) fail("unexpected end of formula");
    char c = peek();
    if (c == '(') {
      ++pos_;
      FormulaNode n;
      n.kind = Kind::paren;
      n.children.push_back(comparison());
      skip_ws();
      if (!consume(')')) fail("expected ')'");
      return n;
    }
    if (c == '"') return string_literal();
    if (std::isdigit(static_cast<unsigned char>(c)) ||
        (c == '.' && std::isdigit(static_cast<unsigned char>(peek(1))))) {
      return number();
    }
    if (c == '\'') {
      std::string sheet = quoted_sheet();
      if (!consume('!')) fail("expected '!' after sheet name");
      return ref_or_range(ref_after_qualifier(sheet));
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_' || c == '$') {
      std::size_t start = pos_;
      std::string w = word();
      std::size_t after = pos_;
      skip_ws();
      if (peek() == '(' && w.find('$') == std::string::npos) {
        ++pos_;
        return call(uppercase(w));
      }
      pos_ = after;
      if (peek() == '!') {
        ++pos_;
        return ref_or_range(ref_after_qualifier(w));
      }
      std::string up = uppercase(w);
      if (up == "TRUE" || up == "FALSE") {
        FormulaNode n;
        n.kind = Kind::boolean;
        n.text = up;
        return n;
      }
      if (auto r = match_ref(w)) return ref_or_range(*r);
      pos_ = start;
      fail("unknown identifier '" + w + "'");
    }
    fail(std::string("unexpected character '") + c + "'");
  }

  FormulaNode call(std::string name) {
    FormulaNode n;
    n.kind = Kind::function_call;
    n.text = std::move(name);
    skip_ws();
    if (consume(')')) return n;
    for (;;) {
      n.children.push_back(comparison());
      skip_ws();
      if (consume(')')) return n;
      if (!consume(',')) fail("expected ',' or ')' in argument list");
    }
  }

  FormulaNode string_literal() {
    ++pos_;
    FormulaNode n;
    n.kind = Kind::string;
    for (;;) {
      if (at_end()) fail("unterminated string literal");
      char c = s_[pos_++];
      if (c == '"') {
        if (peek() == '"') {
          n.text.push_back('"');
          ++pos_;
          continue;
        }
        return n;
      }
      n.text.push_back(c);
    }
  }

  FormulaNode number() {
    std::size_t start = pos_;
    while (std::isdigit(static_cast<unsigned char>(peek()))) ++pos_;
    if (peek() == '.') {
      ++pos_;
      while (std::isdigit(static_cast<unsigned char>(peek()))) ++pos_;
    }
    if (peek() == 'e' || peek() == 'E') {
      std::size_t save = pos_;
      ++pos_;
      if (peek() == '+' || peek() == '-') ++pos_;
      if (!std::isdigit(static_cast<unsigned char>(peek()))) {
        pos_ = save;
      } else {
        while (std::isdigit(static_cast<unsigned char>(peek()))) ++pos_;
      }
    }
    FormulaNode n;
    n.kind = Kind::number;
    n.text = uppercase(s_.substr(start, pos_ - start));
    return n;
  }

  std::string_view s_;
  std::size_t pos_ = 0;
};

bool needs_quotes(const std::string& sheet) {
  if (sheet.empty() || std::isdigit(static_cast<unsigned char>(sheet[0]))) return true;
  for (char c : sheet) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '.') return true;
  }
  // A bare name that reads as a cell reference must be quoted.
  return match_ref(sheet).has_value();
}

void print_sheet(std::ostream& os, const std::optional<std::string>& sheet) {
  if (!sheet) return;
  if (needs_quotes(*sheet)) {
    os << '\'';
    for (char c : *sheet) {
      if (c == '\'') os << '\'';
      os << c;
    }
    os << '\'';
  } else {
    os << *sheet;
  }
  os << '!';
}

void print_ref(std::ostream& os, const CellRef& r, bool with_sheet) {
  if (with_sheet) print_sheet(os, r.sheet);
  if (r.abs_col) os << '$';
  os << column_label(r.addr.col);
  if (r.abs_row) os << '$';
  os << r.addr.row;
}

// `canonical` renders holes as "_" for template display.
void print_node(std::ostream& os, const FormulaNode& n, bool range_end, bool canonical) {
  switch (n.kind) {
    case Kind::function_call: {
      os << n.text << '(';
      for (std::size_t i = 0; i < n.children.size(); ++i) {
        if (i) os << ',';
        print_node(os, n.children[i], false, canonical);
      }
      os << ')';
      return;
    }
    case Kind::cell_ref:
      print_ref(os, n.ref, !range_end);
      return;
    case Kind::hole:
      if (canonical) {
        if (!range_end) print_sheet(os, n.ref.sheet);
        os << '_';
      } else {
        print_ref(os, n.ref, !range_end);
      }
      return;
    case Kind::cell_range:
      print_node(os, n.children[0], false, canonical);
      os << ':';
      print_node(os, n.children[1], true, canonical);
      return;
    case Kind::number:
      os << n.text;
      return;
    case Kind::string:
      os << '"';
      for (char c : n.text) {
        if (c == '"') os << '"';
        os << c;
      }
      os << '"';
      return;
    case Kind::boolean:
      os << n.text;
      return;
    case Kind::binary:
      print_node(os, n.children[0], false, canonical);
      os << to_string(n.binary_op);
      print_node(os, n.children[1], false, canonical);
      return;
    case Kind::unary:
      if (n.unary_op == UnaryOp::percent) {
        print_node(os, n.children[0], false, canonical);
        os << '%';
      } else {
        os << (n.unary_op == UnaryOp::plus ? '+' : '-');
        print_node(os, n.children[0], false, canonical);
      }
      return;
    case Kind::paren:
      os << '(';
      print_node(os, n.children[0], false, canonical);
      os << ')';
      return;
  }
}

std::string print_with(const FormulaNode& n, bool canonical) {
  std::ostringstream os;
  os << '=';
  print_node(os, n, false, canonical);
  return os.str();
}

void templatize(FormulaNode& n, FormulaTemplate& t, ParameterCells& params) {
  if (n.kind == Kind::cell_ref) {
    n.kind = Kind::hole;
    n.hole = ++t.hole_count;
    params.push_back(n.ref.addr);
    t.holes.push_back(HoleInfo{n.ref, 0, false});
    return;
  }
  if (n.kind == Kind::cell_range) {
    templatize(n.children[0], t, params);
    templatize(n.children[1], t, params);
    int a = n.children[0].hole;
    int b = n.children[1].hole;
    t.holes[static_cast<std::size_t>(a - 1)].range_partner = b;
    t.holes[static_cast<std::size_t>(a - 1)].range_start = true;
    t.holes[static_cast<std::size_t>(b - 1)].range_partner = a;
    return;
  }
  for (auto& c : n.children) templatize(c, t, params);
}

void fill(FormulaNode& n, std::span<const CellAddress> params) {
  if (n.kind == Kind::hole) {
    n.kind = Kind::cell_ref;
    n.ref.addr = params[static_cast<std::size_t>(n.hole - 1)];
    n.hole = 0;
    return;
  }
  for (auto& c : n.children) fill(c, params);
}

void collect(const FormulaNode& n, std::vector<std::string>& functions, bool& concat, bool& arithmetic) {
  if (n.kind == Kind::function_call) functions.push_back(n.text);
  if (n.kind == Kind::binary) {
    if (n.binary_op == BinaryOp::concat) concat = true;
    if (n.binary_op == BinaryOp::add || n.binary_op == BinaryOp::sub || n.binary_op == BinaryOp::mul ||
        n.binary_op == BinaryOp::div || n.binary_op == BinaryOp::pow) {
      arithmetic = true;
    }
  }
  if (n.kind == Kind::unary && n.unary_op != UnaryOp::plus) arithmetic = true;
  for (const auto& c : n.children) collect(c, functions, concat, arithmetic);
}

}  // namespace

std::string_view to_string(BinaryOp op) {
  switch (op) {
    case BinaryOp::add: return "+";
    case BinaryOp::sub: return "-";
    case BinaryOp::mul: return "*";
    case BinaryOp::div: return "/";
    case BinaryOp::pow: return "^";
    case BinaryOp::concat: return "&";
    case BinaryOp::eq: return "=";
    case BinaryOp::ne: return "<>";
    case BinaryOp::lt: return "<";
    case BinaryOp::le: return "<=";
    case BinaryOp::gt: return ">";
    case BinaryOp::ge: return ">=";
  }
  return "?";
}

FormulaNode parse_formula(std::string_view s) { return Parser(s).parse(); }

std::string print_formula(const FormulaNode& ast) { return print_with(ast, false); }

void strip_unary_plus(FormulaNode& ast) {
  for (auto& c : ast.children) strip_unary_plus(c);
  while (ast.kind == Kind::unary && ast.unary_op == UnaryOp::plus) {
    FormulaNode inner = std::move(ast.children[0]);
    ast = std::move(inner);
  }
}

std::string normalize_formula(std::string_view s) {
  FormulaNode ast = parse_formula(s);
  strip_unary_plus(ast);
  return print_formula(ast);
}

int ast_size(const FormulaNode& ast) {
  int n = 1;
  for (const auto& c : ast.children) n += ast_size(c);
  return n;
}

ExtractedTemplate extract_template(const FormulaNode& ast) {
  ExtractedTemplate out;
  out.tmpl.root = ast;
  templatize(out.tmpl.root, out.tmpl, out.params);
  out.tmpl.canonical = print_with(out.tmpl.root, true);
  return out;
}

std::string instantiate(const FormulaTemplate& t, std::span<const CellAddress> params) {
  if (static_cast<int>(params.size()) != t.hole_count) {
    throw std::invalid_argument("template has " + std::to_string(t.hole_count) + " holes but " +
                                std::to_string(params.size()) + " parameters were given");
  }
  FormulaNode filled = t.root;
  fill(filled, params);
  return print_formula(filled);
}

void shift_references(FormulaNode& ast, int drow, int dcol) {
  if (ast.kind == Kind::cell_ref || ast.kind == Kind::hole) {
    CellAddress a = ast.ref.addr;
    if (!ast.ref.abs_row) a.row += drow;
    if (!ast.ref.abs_col) a.col += dcol;
    if (a.row < 1 || a.col < 1 || a.col > kMaxColumn || a.row > 1048576) {
      throw std::out_of_range("shifted reference leaves the grid");
    }
    ast.ref.addr = a;
    return;
  }
  for (auto& c : ast.children) shift_references(c, drow, dcol);
}

std::string_view to_string(FormulaType t) {
  switch (t) {
    case FormulaType::conditional: return "conditional";
    case FormulaType::math: return "math";
    case FormulaType::string: return "string";
    case FormulaType::date: return "date";
    case FormulaType::other: return "other";
  }
  return "other";
}

const std::map<std::string, FormulaType, std::less<>>& function_categories() {
  static const auto table = [] {
    std::map<std::string, FormulaType, std::less<>> m;
    std::istringstream in{std::string(kFunctionCategoriesTsv)};
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#') continue;
      auto tab = line.find('\t');
      if (tab == std::string::npos) continue;
      std::string name = uppercase(line.substr(0, tab));
      std::string cat = line.substr(tab + 1);
      while (!cat.empty() && std::isspace(static_cast<unsigned char>(cat.back()))) cat.pop_back();
      FormulaType t = FormulaType::other;
      if (cat == "conditional") t = FormulaType::conditional;
      else if (cat == "math") t = FormulaType::math;
      else if (cat == "string") t = FormulaType::string;
      else if (cat == "date") t = FormulaType::date;
      m.emplace(std::move(name), t);
    }
    return m;
  }();
  return table;
}

FormulaType classify_formula(const FormulaNode& ast) {
  std::vector<std::string> functions;
  bool concat = false;
  bool arithmetic = false;
  collect(ast, functions, concat, arithmetic);
  const auto& table = function_categories();
  bool has[5] = {false, false, false, false, false};
  for (const auto& f : functions) {
    // Newer functions are stored with a prefix in OOXML, e.g. "_XLFN.CONCAT".
    std::string_view name = f;
    if (name.starts_with("_XLFN.")) name.remove_prefix(6);
    auto it = table.find(name);
    if (it != table.end()) has[static_cast<int>(it->second)] = true;
  }
  if (has[static_cast<int>(FormulaType::conditional)]) return FormulaType::conditional;
  if (has[static_cast<int>(FormulaType::date)]) return FormulaType::date;
  if (has[static_cast<int>(FormulaType::string)] || concat) return FormulaType::string;
  if (has[static_cast<int>(FormulaType::math)] || arithmetic) return FormulaType::math;
  return FormulaType::other;
}

}  // namespace formula_scout
