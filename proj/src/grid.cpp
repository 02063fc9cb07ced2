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

#include "formula_scout/grid.hpp"

#include <algorithm>
#include <cctype>
#include <stdexcept>

#include "formula_scout/error.hpp"

namespace formula_scout {

std::string column_label(int col) {
  if (col < 1) throw std::invalid_argument("column must be >= 1");
  std::string out;
  while (col > 0) {
    int rem = (col - 1) % 26;
    out.push_back(static_cast<char>('A' + rem));
    col = (col - 1) / 26;
  }
  std::reverse(out.begin(), out.end());
  return out;
}

int column_index(std::string_view letters) {
  if (letters.empty()) throw ParseError("empty column label", 0);
  long long col = 0;
  for (std::size_t i = 0; i < letters.size(); ++i) {
    char c = letters[i];
    if (c >= 'a' && c <= 'z') c = static_cast<char>(c - 'a' + 'A');
    if (c < 'A' || c > 'Z') {
      throw ParseError(std::string("unexpected character '") + letters[i] + "' in column label", i);
    }
    col = col * 26 + (c - 'A' + 1);
    if (col > kMaxColumn) throw ParseError("column out of range", i);
  }
  return static_cast<int>(col);
}

CellAddress parse_a1(std::string_view s) {
  std::size_t i = 0;
  while (i < s.size() && std::isalpha(static_cast<unsigned char>(s[i]))) ++i;
  if (i == 0) {
    if (s.empty()) throw ParseError("empty cell address", 0);
    throw ParseError(std::string("unexpected character '") + s[0] + "', expected column letter", 0);
  }
  if (i == s.size()) throw ParseError("missing row number", i);
  int col = column_index(s.substr(0, i));
  long long row = 0;
  for (std::size_t j = i; j < s.size(); ++j) {
    char c = s[j];
    if (c < '0' || c > '9') {
      throw ParseError(std::string("unexpected character '") + c + "', expected digit", j);
    }
    row = row * 10 + (c - '0');
    if (row > 1048576) throw ParseError("row out of range", j);
  }
  if (row < 1) throw ParseError("row must be >= 1", i);
  return {static_cast<int>(row), col};
}

std::string to_a1(CellAddress addr) {
  if (addr.row < 1) throw std::invalid_argument("row must be >= 1");
  return column_label(addr.col) + std::to_string(addr.row);
}

std::string_view to_string(ValueType t) {
  switch (t) {
    case ValueType::empty: return "empty";
    case ValueType::numeric: return "numeric";
    case ValueType::text: return "text";
    case ValueType::date: return "date";
    case ValueType::boolean: return "boolean";
  }
  return "empty";
}

std::optional<ValueType> value_type_from_string(std::string_view s) {
  if (s == "empty") return ValueType::empty;
  if (s == "numeric") return ValueType::numeric;
  if (s == "text") return ValueType::text;
  if (s == "date") return ValueType::date;
  if (s == "boolean") return ValueType::boolean;
  return std::nullopt;
}

const Cell* Sheet::find(CellAddress a) const {
  auto it = cells_.find(a);
  return it == cells_.end() ? nullptr : &it->second;
}

Cell Sheet::cell_at(CellAddress a) const {
  if (const Cell* c = find(a)) return *c;
  Cell empty;
  empty.address = a;
  return empty;
}

void Sheet::set(Cell cell) {
  n_rows_ = std::max(n_rows_, cell.address.row);
  n_cols_ = std::max(n_cols_, cell.address.col);
  CellAddress a = cell.address;
  cells_.insert_or_assign(a, std::move(cell));
}

void Sheet::resize(int n_rows, int n_cols) {
  n_rows_ = n_rows;
  n_cols_ = n_cols;
  std::erase_if(cells_, [&](const auto& kv) { return !in_bounds(kv.first); });
}

std::vector<CellAddress> Sheet::formula_cells() const {
  std::vector<CellAddress> out;
  for (const auto& [addr, cell] : cells_) {
    if (cell.formula) out.push_back(addr);
  }
  return out;
}

const Sheet* Workbook::find_sheet(std::string_view name) const {
  for (const auto& s : sheets) {
    if (s.name() == name) return &s;
  }
  return nullptr;
}

std::vector<std::string> Workbook::sheet_names() const {
  std::vector<std::string> out;
  out.reserve(sheets.size());
  for (const auto& s : sheets) out.push_back(s.name());
  return out;
}

}  // namespace formula_scout
