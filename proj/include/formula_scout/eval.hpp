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

#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "formula_scout/formula.hpp"
#include "formula_scout/grid.hpp"
#include "formula_scout/recommender.hpp"

namespace formula_scout {

enum class SplitMode { random, timestamp };

struct EvalSplit {
  SplitMode mode = SplitMode::timestamp;
  double test_fraction = 0.10;
  int per_sheet_cap = 10;
  /// The cap applies per sheet instead of per workbook.
  bool cap_per_sheet = false;
  std::uint64_t seed = 0;

  void validate() const;
};

struct TestCase {
  std::string workbook_id;
  std::string sheet;
  CellAddress cell;
  std::string truth;

  friend bool operator==(const TestCase&, const TestCase&) = default;
};

using Warn = std::function<void(const std::string&)>;

struct CorpusSplit {
  std::vector<Workbook> reference;
  std::vector<Workbook> test;
  std::vector<TestCase> cases;
  /// Formulas in test workbooks the parser rejects; never sampled.
  std::size_t unparseable = 0;
};

/// Test workbooks number round(test_fraction * N), clamped to
/// [1, N-1]. Timestamp mode takes the most recent (ties by id); with all
/// timestamps zero it warns and takes the last ids in sorted order.
CorpusSplit split_corpus(std::vector<Workbook> corpus, const EvalSplit& split, const Warn& warn = {});

/// Canonical-form equality. A prediction that does not parse never matches;
/// an unparseable truth throws ParseError.
bool exact_match(std::string_view predicted, std::string_view truth);
bool exact_match(const Prediction& predicted, std::string_view truth);

struct CaseRecord {
  TestCase test;
  std::optional<std::string> predicted;
  double score = 0;
  bool hit = false;
  int sheet_rows = 0;
  int formula_length = 0;  // AST nodes of the truth
  FormulaType formula_type = FormulaType::other;
};

struct EvalResult {
  int n = 0;
  int n_pred = 0;
  int n_hit = 0;
  std::size_t excluded = 0;  // unparseable truths
  std::vector<CaseRecord> cases;
};

struct Scores {
  double recall = 0;
  double precision = 0;
  double f1 = 0;
};

Scores score(int n, int n_pred, int n_hit);
inline Scores score(const EvalResult& r) { return score(r.n, r.n_pred, r.n_hit); }

struct Suggestion {
  std::string formula;
  double score = 0;
};

/// Top-1 suggestion for a test cell. `target` is the test sheet with the test
/// cell erased.
using Predictor =
    std::function<std::optional<Suggestion>(const Sheet& target, const TestCase& test, double theta)>;

/// predict() with `cfg`, theta overridden per call.
Predictor recommender_predictor(const IndexedCorpus& index, const Models& models, RecommenderConfig cfg);

/// Cases run on up to `threads` workers (0: hardware concurrency); records
/// keep the order of `cases`.
EvalResult evaluate(std::span<const TestCase> cases, std::span<const Workbook> test_workbooks,
                    const Predictor& predictor, double theta, int threads = 0, const Warn& warn = {});

struct PrPoint {
  double theta = 0;
  int n = 0;
  int n_pred = 0;
  int n_hit = 0;
  Scores scores;
};

std::vector<PrPoint> pr_sweep(std::span<const TestCase> cases, std::span<const Workbook> test_workbooks,
                              const Predictor& predictor, std::span<const double> theta_grid, int threads = 0);

enum class BucketKey { sheet_rows, formula_length, formula_type };
std::string_view to_string(BucketKey k);

/// Lower edges of every bucket after the first.
struct BucketEdges {
  std::vector<int> rows{40, 100, 500};
  std::vector<int> length{4, 7, 11};
};

struct Bucket {
  std::string label;
  int n = 0;
  int n_pred = 0;
  int n_hit = 0;
  Scores scores;
};

/// Every configured bucket is reported, empty ones included.
std::vector<Bucket> bucketize(const EvalResult& result, BucketKey key, const BucketEdges& edges = {});

struct EvalReport {
  EvalSplit split;
  std::size_t reference_workbooks = 0;
  std::size_t test_workbooks = 0;
  double theta = 0;
  EvalResult result;
  std::vector<PrPoint> pr;
  BucketEdges edges;
};

std::string report_json(const EvalReport& report);
void write_cases_csv(const EvalResult& result, std::ostream& out);
void write_pr_csv(std::span<const PrPoint> pr, std::ostream& out);
/// Precision against recall, one marker per theta.
void write_pr_svg(std::span<const PrPoint> pr, std::ostream& out);

}  // namespace formula_scout
