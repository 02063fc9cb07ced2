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

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>

#include "formula_scout/error.hpp"
#include "formula_scout/index.hpp"

using namespace formula_scout;

namespace {

Eigen::VectorXd random_unit(std::mt19937_64& rng, int d) {
  std::normal_distribution<double> g;
  Eigen::VectorXd v(d);
  for (int i = 0; i < d; ++i) v[i] = g(rng);
  return v.normalized();
}

Eigen::VectorXd basis(int d, int i) {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(d);
  v[i] = 1;
  return v;
}

}  // namespace

TEST(VectorIndex, SelfRetrievalAndOrthogonalDistance) {
  VectorIndex idx(4);
  idx.add("x", basis(4, 0));
  idx.add("y", basis(4, 1));
  const auto hits = idx.topk(as_span(basis(4, 0)), 1);
  ASSERT_EQ(hits.size(), 1u);
  EXPECT_EQ(hits[0].key, "x");
  EXPECT_EQ(hits[0].distance, 0.0);
  EXPECT_DOUBLE_EQ(idx.topk(as_span(basis(4, 0)), 2)[1].distance, 2.0);
}

TEST(VectorIndex, DuplicateKeyReplacesInPlace) {
  VectorIndex idx(3);
  idx.add("a", basis(3, 0));
  idx.add("b", basis(3, 1));
  EXPECT_EQ(idx.add("a", basis(3, 2)), 0u);
  EXPECT_EQ(idx.size(), 2u);
  EXPECT_EQ(idx.topk(as_span(basis(3, 2)), 1)[0].key, "a");
  EXPECT_EQ(idx.find("b"), 1u);
  EXPECT_EQ(idx.find("zzz"), idx.size());
}

TEST(VectorIndex, RejectsBadVectorsAndQueries) {
  VectorIndex idx(3);
  EXPECT_THROW(idx.add("a", Eigen::Vector2d(1, 0)), std::invalid_argument);
  EXPECT_THROW(idx.add("a", Eigen::Vector3d(1, 1, 0)), std::invalid_argument);
  EXPECT_THROW(idx.add(std::string("a\0b", 3), Eigen::Vector3d(1, 0, 0)), std::invalid_argument);
  idx.add("a", basis(3, 0));
  EXPECT_THROW(idx.topk(as_span(basis(3, 0)), 0), std::invalid_argument);
  const Eigen::Vector2d q(1, 0);
  EXPECT_THROW(idx.topk(as_span(q), 1), std::invalid_argument);
}

TEST(VectorIndex, KLargerThanSizeReturnsAll) {
  VectorIndex idx(2);
  idx.add("a", basis(2, 0));
  EXPECT_EQ(idx.topk(as_span(basis(2, 1)), 10).size(), 1u);
  EXPECT_TRUE(VectorIndex(2).topk(as_span(basis(2, 1)), 3).empty());
}

TEST(VectorIndex, MatchesBruteForceSort) {
  const int d = 32;
  std::mt19937_64 rng(8);
  VectorIndex idx(d);
  std::vector<Eigen::VectorXd> stored;
  for (int i = 0; i < 3000; ++i) {
    stored.push_back(random_unit(rng, d));
    idx.add("k" + std::to_string(i), stored.back());
  }
  for (int q = 0; q < 30; ++q) {
    const auto query = random_unit(rng, d);
    std::vector<std::pair<double, int>> all;
    for (int i = 0; i < 3000; ++i) {
      double s = 0;
      for (int j = 0; j < d; ++j) {
        const double x = query[j] - static_cast<double>(static_cast<float>(stored[static_cast<std::size_t>(i)][j]));
        s += x * x;
      }
      all.emplace_back(s, i);
    }
    std::sort(all.begin(), all.end());
    const auto hits = idx.topk(as_span(query), 10);
    ASSERT_EQ(hits.size(), 10u);
    for (int r = 0; r < 10; ++r) {
      EXPECT_EQ(hits[static_cast<std::size_t>(r)].key, "k" + std::to_string(all[static_cast<std::size_t>(r)].second));
      EXPECT_NEAR(hits[static_cast<std::size_t>(r)].distance, all[static_cast<std::size_t>(r)].first, 1e-12);
    }
  }
}

TEST(VectorIndex, Thresholds) {
  VectorIndex idx(2);
  idx.add("near", Eigen::Vector2d(std::cos(0.2), std::sin(0.2)));  // distance 2-2cos(0.2) ~ 0.0399
  idx.add("far", Eigen::Vector2d(std::cos(1.0), std::sin(1.0)));   // ~ 0.9194
  const Eigen::Vector2d q(1, 0);
  EXPECT_EQ(idx.topk_threshold(as_span(q), 5, 4.0), idx.topk(as_span(q), 5));
  EXPECT_TRUE(idx.topk_threshold(as_span(q), 5, 0.0).empty());
  const auto mid = idx.topk_threshold(as_span(q), 5, 0.5);
  ASSERT_EQ(mid.size(), 1u);
  EXPECT_EQ(mid[0].key, "near");
  const std::vector<std::size_t> only_far{1};
  EXPECT_EQ(idx.topk_among(only_far, as_span(q), 5, 4.0)[0].key, "far");
  EXPECT_TRUE(idx.topk_among(only_far, as_span(q), 5, 0.5).empty());
}

TEST(VectorIndex, TiesBreakByInsertionOrder) {
  VectorIndex idx(2);
  idx.add("second", basis(2, 1));
  idx.add("first", basis(2, 1));
  const auto hits = idx.topk(as_span(basis(2, 0)), 2);
  EXPECT_EQ(hits[0].key, "second");
  EXPECT_EQ(hits[1].key, "first");
}

TEST(VectorIndex, SaveLoadRoundTrip) {
  std::mt19937_64 rng(1);
  VectorIndex idx(5);
  for (int i = 0; i < 20; ++i) idx.add("key-" + std::to_string(i * 37), random_unit(rng, 5));
  const auto path = std::filesystem::temp_directory_path() / "fs_index_test.bin";
  idx.save(path);
  EXPECT_EQ(VectorIndex::load(path), idx);
  {
    std::ofstream out(path, std::ios::binary);
    out << "JUNK";
  }
  EXPECT_THROW(VectorIndex::load(path), SchemaError);
  std::filesystem::remove(path);
}

TEST(Keys, RoundTrip) {
  const SheetKey s{"wb-1", "Paint Stock"};
  EXPECT_EQ(parse_coarse_key(coarse_key(s)), s);
  const FineEntry e{s, parse_a1("D41"), "=COUNTIF(C7:C37,C41)"};
  EXPECT_EQ(parse_fine_key(fine_key(e)), e);
  EXPECT_THROW(parse_coarse_key("no separator"), SchemaError);
}

TEST(FineIndex, GroupsEntriesBySheet) {
  FineIndex idx(2);
  const SheetKey a{"w", "A"}, b{"w", "B"};
  idx.add({a, {1, 1}, "=1"}, basis(2, 0));
  idx.add({b, {1, 1}, "=2"}, basis(2, 1));
  idx.add({a, {2, 1}, "=3"}, basis(2, 1));
  idx.add({a, {1, 1}, "=1"}, basis(2, 1));  // same key: replaced
  EXPECT_EQ(idx.size(), 3u);
  const auto sa = idx.sheet_entries(a);
  EXPECT_EQ(std::vector<std::size_t>(sa.begin(), sa.end()), (std::vector<std::size_t>{0, 2}));
  EXPECT_TRUE(idx.sheet_entries({"w", "C"}).empty());
  const FineIndex reloaded(idx.vectors());
  EXPECT_EQ(reloaded.entry(1), idx.entry(1));
  EXPECT_EQ(reloaded.sheet_entries(a).size(), 2u);
}
