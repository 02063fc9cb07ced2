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

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "formula_scout/grid.hpp"

namespace formula_scout {

inline std::span<const double> as_span(const Eigen::VectorXd& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

struct Hit {
  std::size_t id = 0;  // insertion slot
  std::string key;
  double distance = 0;  // squared L2

  friend bool operator==(const Hit&, const Hit&) = default;
};

/// Exact squared-L2 search over unit vectors stored as float32. Ties are
/// broken by insertion slot.
class VectorIndex {
 public:
  static constexpr double kNormTolerance = 1e-4;

  explicit VectorIndex(int dim = 0) : dim_(dim) {}

  int dim() const { return dim_; }
  std::size_t size() const { return keys_.size(); }
  const std::string& key(std::size_t id) const { return keys_[id]; }
  std::span<const float> vector(std::size_t id) const {
    return {data_.data() + id * static_cast<std::size_t>(dim_), static_cast<std::size_t>(dim_)};
  }
  /// Slot of `key`, or size() when absent.
  std::size_t find(std::string_view key) const;

  /// Appends, or overwrites the vector of an existing key in place. Throws
  /// std::invalid_argument on a wrong dimension or a norm off 1 by more than
  /// kNormTolerance.
  std::size_t add(std::string key, std::span<const double> v);
  std::size_t add(std::string key, const Eigen::VectorXd& v) {
    return add(std::move(key), std::span<const double>(v.data(), static_cast<std::size_t>(v.size())));
  }

  double distance(std::size_t id, std::span<const double> q) const;

  /// min(k, size) nearest, ascending. Throws std::invalid_argument for k < 1
  /// or a query of the wrong dimension.
  std::vector<Hit> topk(std::span<const double> q, int k) const;
  /// topk restricted to distance <= theta.
  std::vector<Hit> topk_threshold(std::span<const double> q, int k, double theta) const;
  /// Same ranking restricted to the given slots.
  std::vector<Hit> topk_among(std::span<const std::size_t> ids, std::span<const double> q, int k,
                              double theta) const;

  /// Layout: "FSVI" magic, u32 version, u32 dim, u32 key width, u64 count,
  /// then `count` records of a NUL-padded key followed by dim float32.
  void save(const std::filesystem::path& path) const;
  static VectorIndex load(const std::filesystem::path& path);

  friend bool operator==(const VectorIndex& a, const VectorIndex& b) {
    return a.dim_ == b.dim_ && a.keys_ == b.keys_ && a.data_ == b.data_;
  }

 private:
  std::vector<Hit> rank(std::vector<Hit> hits, int k, double theta) const;

  int dim_;
  std::vector<std::string> keys_;
  std::vector<float> data_;
  std::unordered_map<std::string, std::size_t> slots_;
};

std::string coarse_key(const SheetKey& k);
SheetKey parse_coarse_key(std::string_view key);

/// One sheet per entry.
class CoarseIndex {
 public:
  explicit CoarseIndex(int dim = 0) : index_(dim) {}
  explicit CoarseIndex(VectorIndex index) : index_(std::move(index)) {}

  void add(const SheetKey& key, const Eigen::VectorXd& v) { index_.add(coarse_key(key), v); }
  std::size_t size() const { return index_.size(); }
  const VectorIndex& vectors() const { return index_; }

 private:
  VectorIndex index_;
};

struct FineEntry {
  SheetKey sheet;
  CellAddress cell;
  std::string formula;

  friend bool operator==(const FineEntry&, const FineEntry&) = default;
};

std::string fine_key(const FineEntry& e);
FineEntry parse_fine_key(std::string_view key);

/// One formula cell per entry, grouped by sheet for candidate-restricted
/// search.
class FineIndex {
 public:
  explicit FineIndex(int dim = 0) : index_(dim) {}
  explicit FineIndex(VectorIndex index);

  void add(const FineEntry& entry, const Eigen::VectorXd& v);
  std::size_t size() const { return index_.size(); }
  const VectorIndex& vectors() const { return index_; }
  const FineEntry& entry(std::size_t id) const { return entries_[id]; }
  /// Slots of the entries on one sheet, in insertion order.
  std::span<const std::size_t> sheet_entries(const SheetKey& key) const;

 private:
  VectorIndex index_;
  std::vector<FineEntry> entries_;
  std::map<SheetKey, std::vector<std::size_t>> by_sheet_;
};

}  // namespace formula_scout
