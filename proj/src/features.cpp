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

#include "formula_scout/features.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "formula_scout/hash.hpp"

namespace formula_scout {
namespace {

std::uint64_t mix(std::uint64_t x) {
  // splitmix64 finalizer
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

void l2_normalize(std::vector<double>& v) {
  double n = 0;
  for (double x : v) n += x * x;
  if (n <= 0) return;
  n = std::sqrt(n);
  for (double& x : v) x /= n;
}

std::string lowercase(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::int64_t slot_key(int row, int col) { return (static_cast<std::int64_t>(row) << 20) | col; }

}  // namespace

std::vector<double> hashed_trigrams(std::string_view text, int dim, std::uint64_t seed) {
  std::vector<double> v(static_cast<std::size_t>(dim), 0.0);
  if (text.empty()) return v;
  std::string padded;
  padded.reserve(text.size() + 2);
  padded.push_back('\x01');
  padded.append(text);
  padded.push_back('\x02');
  for (std::size_t i = 0; i + 3 <= padded.size(); ++i) {
    std::uint64_t h = mix(fnv1a64(std::string_view(padded).substr(i, 3)) ^ seed);
    std::size_t bucket = static_cast<std::size_t>(h % static_cast<std::uint64_t>(dim));
    v[bucket] += (h >> 63) ? -1.0 : 1.0;
  }
  l2_normalize(v);
  return v;
}

HashedTrigramEmbedder::HashedTrigramEmbedder(int dim, std::uint64_t seed) : dim_(dim), seed_(seed) {
  if (dim < 1) throw std::invalid_argument("embedding dimension must be >= 1");
}

std::vector<double> HashedTrigramEmbedder::embed(std::string_view text) const {
  return hashed_trigrams(lowercase(text), dim_, seed_);
}

std::string HashedTrigramEmbedder::describe() const {
  return "trigram:" + std::to_string(dim_) + ":" + std::to_string(seed_);
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    auto u = static_cast<unsigned char>(ch);
    if (std::isalnum(u) || u >= 0x80) {
      cur.push_back(static_cast<char>(std::tolower(u)));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

WordVectorEmbedder WordVectorEmbedder::load(std::istream& in, std::string source) {
  WordVectorEmbedder e;
  e.source_ = std::move(source);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string token;
    if (!(ls >> token)) continue;
    std::vector<double> v;
    double x;
    while (ls >> x) v.push_back(x);
    if (e.dim_ == 0) {
      if (v.empty()) throw std::runtime_error("word-vector line 1 has no values");
      e.dim_ = static_cast<int>(v.size());
    }
    if (static_cast<int>(v.size()) != e.dim_) {
      throw std::runtime_error("word-vector line " + std::to_string(line_no) + " has " +
                               std::to_string(v.size()) + " values, expected " + std::to_string(e.dim_));
    }
    e.table_.insert_or_assign(lowercase(token), std::move(v));
  }
  if (e.dim_ == 0) throw std::runtime_error("word-vector file is empty");
  return e;
}

WordVectorEmbedder WordVectorEmbedder::load_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return load(in, path.string());
}

std::vector<double> WordVectorEmbedder::embed(std::string_view text) const {
  std::vector<double> v(static_cast<std::size_t>(dim_), 0.0);
  int hits = 0;
  for (const auto& tok : tokenize(text)) {
    auto it = table_.find(tok);
    if (it == table_.end()) continue;
    for (std::size_t i = 0; i < v.size(); ++i) v[i] += it->second[i];
    ++hits;
  }
  if (hits > 0) {
    for (double& x : v) x /= hits;
  }
  return v;
}

std::unique_ptr<TextEmbedder> make_embedder(std::string_view description) {
  if (description.starts_with("trigram:")) {
    std::string rest(description.substr(8));
    auto colon = rest.find(':');
    int dim = std::stoi(rest.substr(0, colon));
    std::uint64_t seed = colon == std::string::npos ? 0 : std::stoull(rest.substr(colon + 1));
    return std::make_unique<HashedTrigramEmbedder>(dim, seed);
  }
  if (description.starts_with("wordvec:")) {
    return std::make_unique<WordVectorEmbedder>(WordVectorEmbedder::load_file(std::string(description.substr(8))));
  }
  throw std::invalid_argument("unknown embedder '" + std::string(description) + "'");
}

std::string syntactic_pattern(std::string_view value) {
  std::string out;
  for (char ch : value) {
    if (out.size() == 32) break;
    auto u = static_cast<unsigned char>(ch);
    if (u < 0x80 && std::isdigit(u)) {
      out.push_back('D');
    } else if (u < 0x80 && std::isalpha(u)) {
      out.push_back('L');
    } else if (u < 0x80 && std::isspace(u)) {
      out.push_back('S');
    } else {
      out.push_back(ch);
    }
  }
  return out;
}

std::vector<double> featurize_cell(const Cell& cell, const TextEmbedder& embedder, int d_pat) {
  FeatureLayout layout{embedder.dim(), d_pat};
  std::vector<double> f(static_cast<std::size_t>(layout.dim()), 0.0);
  if (!cell.value.empty()) {
    std::vector<double> sem = embedder.embed(cell.value);
    std::copy(sem.begin(), sem.end(), f.begin());
    std::vector<double> pat = hashed_trigrams(syntactic_pattern(cell.value), d_pat, kPatternSeed);
    std::copy(pat.begin(), pat.end(), f.begin() + layout.pattern_offset());
  }
  f[static_cast<std::size_t>(layout.type_offset() + static_cast<int>(cell.type))] = 1.0;
  const Style& s = cell.style;
  auto st = f.begin() + layout.style_offset();
  st[0] = s.bg[0] / 255.0;
  st[1] = s.bg[1] / 255.0;
  st[2] = s.bg[2] / 255.0;
  st[3] = s.fg[0] / 255.0;
  st[4] = s.fg[1] / 255.0;
  st[5] = s.fg[2] / 255.0;
  st[6] = s.bold ? 1.0 : 0.0;
  st[7] = s.italic ? 1.0 : 0.0;
  st[8] = s.font_size / 72.0;
  st[9] = s.col_width / 255.0;
  st[10] = s.row_height / 255.0;
  return f;
}

ViewWindow sheet_window(const Sheet& sheet, int n_r, int n_c) {
  if (n_r < 1 || n_c < 1) throw std::invalid_argument("window dimensions must be >= 1");
  return ViewWindow{&sheet, {1, 1}, n_r, n_c, WindowMode::sheet_top_left};
}

ViewWindow region_window(const Sheet& sheet, CellAddress c, int n_r, int n_c) {
  if (n_r < 1 || n_c < 1) throw std::invalid_argument("window dimensions must be >= 1");
  if (!sheet.in_bounds(c)) throw std::out_of_range("region anchor " + to_a1(c) + " outside sheet");
  return ViewWindow{&sheet, c, n_r, n_c, WindowMode::region_centered};
}

WindowTensor window_tensor(const ViewWindow& w, const TextEmbedder& embedder, int d_pat) {
  FeatureLayout layout{embedder.dim(), d_pat};
  WindowTensor t{w.n_r, w.n_c, layout.dim(), {}};
  t.data.assign(static_cast<std::size_t>(w.n_r) * w.n_c * layout.dim(), 0.0);
  Cell empty;
  std::vector<double> empty_f = featurize_cell(empty, embedder, d_pat);
  int top = w.top();
  int left = w.left();
  for (int r = 0; r < w.n_r; ++r) {
    for (int c = 0; c < w.n_c; ++c) {
      CellAddress a{top + r, left + c};
      const Cell* cell = (a.row >= 1 && a.col >= 1) ? w.sheet->find(a) : nullptr;
      auto dst = t.cell(r, c);
      if (cell && w.sheet->in_bounds(a)) {
        auto f = featurize_cell(*cell, embedder, d_pat);
        std::copy(f.begin(), f.end(), dst.begin());
      } else {
        std::copy(empty_f.begin(), empty_f.end(), dst.begin());
      }
    }
  }
  return t;
}

SheetFeatures::SheetFeatures(const Sheet& sheet, const TextEmbedder& embedder, int d_pat,
                             std::optional<CellAddress> masked)
    : depth_(FeatureLayout{embedder.dim(), d_pat}.dim()), n_rows_(sheet.n_rows()), n_cols_(sheet.n_cols()) {
  empty_ = featurize_cell(Cell{}, embedder, d_pat);
  values_.reserve(sheet.cells().size() * static_cast<std::size_t>(depth_));
  for (const auto& [addr, cell] : sheet.cells()) {
    if (masked && addr == *masked) continue;
    auto f = featurize_cell(cell, embedder, d_pat);
    if (f == empty_) continue;
    slot_.emplace(slot_key(addr.row, addr.col), values_.size() / static_cast<std::size_t>(depth_));
    values_.insert(values_.end(), f.begin(), f.end());
    present_.push_back(addr);
  }
}

std::span<const double> SheetFeatures::at(int row, int col) const {
  if (row < 1 || col < 1 || row > n_rows_ || col > n_cols_) return empty_;
  auto it = slot_.find(slot_key(row, col));
  if (it == slot_.end()) return empty_;
  return {values_.data() + it->second * static_cast<std::size_t>(depth_), static_cast<std::size_t>(depth_)};
}

WindowTensor SheetFeatures::window(int top, int left, int n_r, int n_c) const {
  WindowTensor t{n_r, n_c, depth_, {}};
  t.data.resize(static_cast<std::size_t>(n_r) * n_c * depth_);
  for (int r = 0; r < n_r; ++r) {
    for (int c = 0; c < n_c; ++c) {
      auto src = at(top + r, left + c);
      std::copy(src.begin(), src.end(), t.cell(r, c).begin());
    }
  }
  return t;
}

}  // namespace formula_scout
