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

#include "formula_scout/workbook_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "formula_scout/error.hpp"
#include "formula_scout/hash.hpp"
#include "json.hpp"

namespace formula_scout {
namespace {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

const json& require(const json& obj, const char* field, const std::string& path) {
  auto it = obj.find(field);
  if (it == obj.end()) throw SchemaError(path + "/" + field, "missing required field");
  return *it;
}

std::string get_string(const json& v, const std::string& path) {
  if (!v.is_string()) throw SchemaError(path, "expected string");
  return v.get<std::string>();
}

std::int64_t get_int(const json& v, const std::string& path) {
  if (!v.is_number_integer()) throw SchemaError(path, "expected integer");
  return v.get<std::int64_t>();
}

double get_number(const json& v, const std::string& path) {
  if (!v.is_number()) throw SchemaError(path, "expected number");
  double d = v.get<double>();
  if (!std::isfinite(d) || d < 0) throw SchemaError(path, "expected finite non-negative number");
  return d;
}

bool get_bool(const json& v, const std::string& path) {
  if (!v.is_boolean()) throw SchemaError(path, "expected boolean");
  return v.get<bool>();
}

Rgb get_rgb(const json& v, const std::string& path) {
  if (!v.is_array() || v.size() != 3) throw SchemaError(path, "expected [r,g,b]");
  Rgb out{};
  for (std::size_t i = 0; i < 3; ++i) {
    std::int64_t c = get_int(v[i], path + "/" + std::to_string(i));
    if (c < 0 || c > 255) throw SchemaError(path + "/" + std::to_string(i), "color out of [0,255]");
    out[i] = static_cast<int>(c);
  }
  return out;
}

Style parse_style(const json& v, const std::string& path) {
  if (!v.is_object()) throw SchemaError(path, "expected object");
  Style s;
  if (auto it = v.find("bg"); it != v.end()) s.bg = get_rgb(*it, path + "/bg");
  if (auto it = v.find("fg"); it != v.end()) s.fg = get_rgb(*it, path + "/fg");
  if (auto it = v.find("bold"); it != v.end()) s.bold = get_bool(*it, path + "/bold");
  if (auto it = v.find("italic"); it != v.end()) s.italic = get_bool(*it, path + "/italic");
  if (auto it = v.find("font_size"); it != v.end()) s.font_size = get_number(*it, path + "/font_size");
  if (auto it = v.find("col_width"); it != v.end()) s.col_width = get_number(*it, path + "/col_width");
  if (auto it = v.find("row_height"); it != v.end()) s.row_height = get_number(*it, path + "/row_height");
  return s;
}

Cell parse_cell(const json& v, const std::string& path, const Sheet& sheet) {
  if (!v.is_object()) throw SchemaError(path, "expected object");
  Cell c;
  std::string addr = get_string(require(v, "addr", path), path + "/addr");
  try {
    c.address = parse_a1(addr);
  } catch (const ParseError& e) {
    throw SchemaError(path + "/addr", e.what());
  }
  if (!sheet.in_bounds(c.address)) throw SchemaError(path + "/addr", "address outside sheet bounds");
  if (auto it = v.find("value"); it != v.end()) c.value = get_string(*it, path + "/value");
  std::string type = get_string(require(v, "type", path), path + "/type");
  auto vt = value_type_from_string(type);
  if (!vt) throw SchemaError(path + "/type", "unknown value type '" + type + "'");
  c.type = *vt;
  if (c.type == ValueType::empty && !c.value.empty()) {
    throw SchemaError(path + "/value", "empty cell must have empty value");
  }
  if (auto it = v.find("formula"); it != v.end() && !it->is_null()) {
    std::string f = get_string(*it, path + "/formula");
    if (f.empty() || f.front() != '=') throw SchemaError(path + "/formula", "formula must begin with '='");
    c.formula = std::move(f);
  }
  if (auto it = v.find("style"); it != v.end()) c.style = parse_style(*it, path + "/style");
  return c;
}

ordered_json style_json(const Style& s) {
  ordered_json o;
  o["bg"] = s.bg;
  o["fg"] = s.fg;
  o["bold"] = s.bold;
  o["italic"] = s.italic;
  o["font_size"] = s.font_size;
  o["col_width"] = s.col_width;
  o["row_height"] = s.row_height;
  return o;
}

ordered_json workbook_json(const Workbook& wb, bool with_id) {
  ordered_json root;
  if (with_id) root["id"] = wb.id;
  root["last_modified"] = wb.last_modified;
  ordered_json sheets = ordered_json::array();
  for (const auto& sheet : wb.sheets) {
    ordered_json s;
    s["name"] = sheet.name();
    s["n_rows"] = sheet.n_rows();
    s["n_cols"] = sheet.n_cols();
    ordered_json cells = ordered_json::array();
    for (const auto& [addr, cell] : sheet.cells()) {
      ordered_json c;
      c["addr"] = to_a1(addr);
      c["value"] = cell.value;
      c["type"] = std::string(to_string(cell.type));
      if (cell.formula) c["formula"] = *cell.formula;
      c["style"] = style_json(cell.style);
      cells.push_back(std::move(c));
    }
    s["cells"] = std::move(cells);
    sheets.push_back(std::move(s));
  }
  root["sheets"] = std::move(sheets);
  return root;
}

}  // namespace

Workbook load_workbook(std::string_view json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw SchemaError("", std::string("invalid JSON: ") + e.what());
  }
  if (!root.is_object()) throw SchemaError("", "expected object");
  Workbook wb;
  wb.id = get_string(require(root, "id", ""), "/id");
  if (auto it = root.find("last_modified"); it != root.end() && !it->is_null()) {
    wb.last_modified = get_int(*it, "/last_modified");
  }
  const json& sheets = require(root, "sheets", "");
  if (!sheets.is_array()) throw SchemaError("/sheets", "expected array");
  std::set<std::string> names;
  for (std::size_t i = 0; i < sheets.size(); ++i) {
    std::string path = "/sheets/" + std::to_string(i);
    const json& s = sheets[i];
    if (!s.is_object()) throw SchemaError(path, "expected object");
    std::string name = get_string(require(s, "name", path), path + "/name");
    if (!names.insert(name).second) throw SchemaError(path + "/name", "duplicate sheet name '" + name + "'");
    std::int64_t rows = get_int(require(s, "n_rows", path), path + "/n_rows");
    std::int64_t cols = get_int(require(s, "n_cols", path), path + "/n_cols");
    if (rows < 0 || cols < 0 || cols > kMaxColumn || rows > 1048576) {
      throw SchemaError(path, "sheet dimensions out of range");
    }
    Sheet sheet(name, static_cast<int>(rows), static_cast<int>(cols));
    const json& cells = require(s, "cells", path);
    if (!cells.is_array()) throw SchemaError(path + "/cells", "expected array");
    for (std::size_t j = 0; j < cells.size(); ++j) {
      std::string cpath = path + "/cells/" + std::to_string(j);
      Cell c = parse_cell(cells[j], cpath, sheet);
      if (sheet.find(c.address)) throw SchemaError(cpath + "/addr", "duplicate cell address");
      sheet.set(std::move(c));
    }
    wb.sheets.push_back(std::move(sheet));
  }
  return wb;
}

std::string dump_workbook(const Workbook& wb) {
  return workbook_json(wb, true).dump(2) + "\n";
}

Workbook load_workbook_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return load_workbook(ss.str());
}

void save_workbook_file(const Workbook& wb, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << dump_workbook(wb);
}

std::vector<Workbook> load_corpus(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<Workbook> out;
  out.reserve(files.size());
  for (const auto& f : files) out.push_back(load_workbook_file(f));
  return out;
}

std::string content_hash(const Workbook& wb) {
  return hex64(fnv1a64(workbook_json(wb, false).dump()));
}

}  // namespace formula_scout
