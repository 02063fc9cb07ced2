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

#include "formula_scout/index.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "formula_scout/error.hpp"

namespace formula_scout {
namespace {

constexpr char kMagic[4] = {'F', 'S', 'V', 'I'};
constexpr std::uint32_t kVersion = 1;
constexpr char kSep = '\x1f';

template <typename T>
void put(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::ifstream& in, const std::string& what) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw SchemaError(what, "truncated header");
  return v;
}

std::vector<std::string_view> split(std::string_view s) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == kSep) {
      parts.push_back(s.substr(start, i - start));
      start = i + 1;
    }
  }
  return parts;
}

}  // namespace

std::size_t VectorIndex::find(std::string_view key) const {
  auto it = slots_.find(std::string(key));
  return it == slots_.end() ? size() : it->second;
}

std::size_t VectorIndex::add(std::string key, std::span<const double> v) {
  if (static_cast<int>(v.size()) != dim_) {
    throw std::invalid_argument("vector dimension " + std::to_string(v.size()) + " != index dimension " +
                                std::to_string(dim_));
  }
  double n2 = 0;
  for (double x : v) n2 += x * x;
  if (!std::isfinite(n2) || std::abs(std::sqrt(n2) - 1.0) > kNormTolerance) {
    throw std::invalid_argument("index vectors must be unit norm (got " + std::to_string(std::sqrt(n2)) + ")");
  }
  if (key.find('\0') != std::string::npos) throw std::invalid_argument("index keys must not contain NUL");
  std::size_t id;
  if (auto it = slots_.find(key); it != slots_.end()) {
    id = it->second;
  } else {
    id = keys_.size();
    slots_.emplace(key, id);
    keys_.push_back(std::move(key));
    data_.resize(data_.size() + static_cast<std::size_t>(dim_));
  }
  float* dst = data_.data() + id * static_cast<std::size_t>(dim_);
  for (int i = 0; i < dim_; ++i) dst[i] = static_cast<float>(v[static_cast<std::size_t>(i)]);
  return id;
}

double VectorIndex::distance(std::size_t id, std::span<const double> q) const {
  const float* v = data_.data() + id * static_cast<std::size_t>(dim_);
  double d = 0;
  for (int i = 0; i < dim_; ++i) {
    const double x = q[static_cast<std::size_t>(i)] - static_cast<double>(v[i]);
    d += x * x;
  }
  return d;
}

std::vector<Hit> VectorIndex::rank(std::vector<Hit> hits, int k, double theta) const {
  auto kept = std::remove_if(hits.begin(), hits.end(), [&](const Hit& h) { return h.distance > theta; });
  hits.erase(kept, hits.end());
  auto less = [](const Hit& a, const Hit& b) { return a.distance < b.distance || (a.distance == b.distance && a.id < b.id); };
  const std::size_t n = std::min(hits.size(), static_cast<std::size_t>(k));
  std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(n), hits.end(), less);
  hits.resize(n);
  for (auto& h : hits) h.key = keys_[h.id];
  return hits;
}

std::vector<Hit> VectorIndex::topk(std::span<const double> q, int k) const {
  return topk_threshold(q, k, std::numeric_limits<double>::infinity());
}

std::vector<Hit> VectorIndex::topk_threshold(std::span<const double> q, int k, double theta) const {
  if (k < 1) throw std::invalid_argument("k must be >= 1");
  if (static_cast<int>(q.size()) != dim_) throw std::invalid_argument("query dimension mismatch");
  std::vector<Hit> hits(size());
  for (std::size_t i = 0; i < hits.size(); ++i) hits[i] = {i, {}, distance(i, q)};
  return rank(std::move(hits), k, theta);
}

std::vector<Hit> VectorIndex::topk_among(std::span<const std::size_t> ids, std::span<const double> q, int k,
                                         double theta) const {
  if (k < 1) throw std::invalid_argument("k must be >= 1");
  if (static_cast<int>(q.size()) != dim_) throw std::invalid_argument("query dimension mismatch");
  std::vector<Hit> hits;
  hits.reserve(ids.size());
  for (std::size_t id : ids) hits.push_back({id, {}, distance(id, q)});
  return rank(std::move(hits), k, theta);
}

void VectorIndex::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  std::size_t width = 8;
  for (const auto& k : keys_) width = std::max(width, k.size() + 1);
  width = (width + 7) / 8 * 8;
  out.write(kMagic, 4);
  put<std::uint32_t>(out, kVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(dim_));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(width));
  put<std::uint64_t>(out, keys_.size());
  std::string buf(width, '\0');
  for (std::size_t i = 0; i < keys_.size(); ++i) {
    std::fill(buf.begin(), buf.end(), '\0');
    std::memcpy(buf.data(), keys_[i].data(), keys_[i].size());
    out.write(buf.data(), static_cast<std::streamsize>(width));
    out.write(reinterpret_cast<const char*>(data_.data() + i * static_cast<std::size_t>(dim_)),
              static_cast<std::streamsize>(sizeof(float) * static_cast<std::size_t>(dim_)));
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

VectorIndex VectorIndex::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  const std::string where = path.string();
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) throw SchemaError(where, "not an index file");
  if (get<std::uint32_t>(in, where) != kVersion) throw SchemaError(where, "unsupported index version");
  const auto dim = get<std::uint32_t>(in, where);
  const auto width = get<std::uint32_t>(in, where);
  const auto count = get<std::uint64_t>(in, where);
  VectorIndex idx(static_cast<int>(dim));
  idx.keys_.reserve(count);
  idx.data_.resize(count * dim);
  std::string buf(width, '\0');
  for (std::uint64_t i = 0; i < count; ++i) {
    if (!in.read(buf.data(), width)) throw SchemaError(where, "truncated record " + std::to_string(i));
    std::string key(buf.c_str());
    if (!in.read(reinterpret_cast<char*>(idx.data_.data() + i * dim), static_cast<std::streamsize>(sizeof(float) * dim))) {
      throw SchemaError(where, "truncated record " + std::to_string(i));
    }
    if (!idx.slots_.emplace(key, i).second) throw SchemaError(where, "duplicate key in record " + std::to_string(i));
    idx.keys_.push_back(std::move(key));
  }
  return idx;
}

std::string coarse_key(const SheetKey& k) { return k.workbook_id + kSep + k.sheet; }

SheetKey parse_coarse_key(std::string_view key) {
  auto p = split(key);
  if (p.size() != 2) throw SchemaError(std::string(key), "malformed sheet key");
  return {std::string(p[0]), std::string(p[1])};
}

std::string fine_key(const FineEntry& e) {
  return e.sheet.workbook_id + kSep + e.sheet.sheet + kSep + to_a1(e.cell) + kSep + e.formula;
}

FineEntry parse_fine_key(std::string_view key) {
  auto p = split(key);
  if (p.size() != 4) throw SchemaError(std::string(key), "malformed region key");
  return {{std::string(p[0]), std::string(p[1])}, parse_a1(p[2]), std::string(p[3])};
}

FineIndex::FineIndex(VectorIndex index) : index_(std::move(index)) {
  entries_.reserve(index_.size());
  for (std::size_t i = 0; i < index_.size(); ++i) {
    entries_.push_back(parse_fine_key(index_.key(i)));
    by_sheet_[entries_.back().sheet].push_back(i);
  }
}

void FineIndex::add(const FineEntry& entry, const Eigen::VectorXd& v) {
  const std::size_t before = index_.size();
  const std::size_t id = index_.add(fine_key(entry), v);
  if (id == before) {
    entries_.push_back(entry);
    by_sheet_[entry.sheet].push_back(id);
  }
}

std::span<const std::size_t> FineIndex::sheet_entries(const SheetKey& key) const {
  auto it = by_sheet_.find(key);
  if (it == by_sheet_.end()) return {};
  return it->second;
}

}  // namespace formula_scout
