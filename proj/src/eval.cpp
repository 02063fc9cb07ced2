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

#include "formula_scout/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iterator>
#include <map>
#include <mutex>
#include <random>
#include <stdexcept>
#include <thread>

#include "formula_scout/error.hpp"
#include "json.hpp"

namespace formula_scout {

void EvalSplit::validate() const {
  if (!(test_fraction > 0 && test_fraction < 1)) throw std::invalid_argument("test_fraction must be in (0, 1)");
  if (per_sheet_cap < 1) throw std::invalid_argument("per_sheet_cap must be >= 1");
}

namespace {

struct Candidate {
  std::size_t sheet = 0;
  CellAddress cell;
  std::string formula;
};

bool parses(const std::string& f) {
  try {
    parse_formula(f);
    return true;
  } catch (const ParseError&) {
    return false;
  }
}

void sample_into(std::vector<Candidate>& pool, int cap, std::mt19937_64& rng, const Workbook& wb,
                 std::vector<TestCase>& out) {
  std::vector<Candidate> picked;
  std::sample(pool.begin(), pool.end(), std::back_inserter(picked), static_cast<std::size_t>(cap), rng);
  for (auto& c : picked) out.push_back({wb.id, wb.sheets[c.sheet].name(), c.cell, std::move(c.formula)});
}

}  // namespace

CorpusSplit split_corpus(std::vector<Workbook> corpus, const EvalSplit& split, const Warn& warn) {
  split.validate();
  const std::size_t n = corpus.size();
  if (n < 2) throw std::invalid_argument("split needs at least two workbooks");
  const auto n_test = std::clamp<std::size_t>(static_cast<std::size_t>(std::llround(split.test_fraction * static_cast<double>(n))),
                                              1, n - 1);

  std::sort(corpus.begin(), corpus.end(), [](const Workbook& a, const Workbook& b) { return a.id < b.id; });
  std::mt19937_64 rng(split.seed);
  if (split.mode == SplitMode::random) {
    std::shuffle(corpus.begin(), corpus.end(), rng);
  } else {
    const bool all_zero =
        std::all_of(corpus.begin(), corpus.end(), [](const Workbook& w) { return w.last_modified == 0; });
    if (all_zero) {
      if (warn) warn("all last_modified timestamps are zero; timestamp split falls back to id order");
    } else {
      std::stable_sort(corpus.begin(), corpus.end(),
                       [](const Workbook& a, const Workbook& b) { return a.last_modified < b.last_modified; });
    }
  }
  // The test set is the tail.
  CorpusSplit out;
  out.reference.assign(std::make_move_iterator(corpus.begin()),
                       std::make_move_iterator(corpus.end() - static_cast<std::ptrdiff_t>(n_test)));
  out.test.assign(std::make_move_iterator(corpus.end() - static_cast<std::ptrdiff_t>(n_test)),
                  std::make_move_iterator(corpus.end()));
  std::sort(out.test.begin(), out.test.end(), [](const Workbook& a, const Workbook& b) { return a.id < b.id; });

  std::mt19937_64 sampler(split.seed ^ 0x5bd1e995ull);
  for (const auto& wb : out.test) {
    std::vector<Candidate> pool;
    for (std::size_t s = 0; s < wb.sheets.size(); ++s) {
      for (const auto& addr : wb.sheets[s].formula_cells()) {
        const std::string& f = *wb.sheets[s].find(addr)->formula;
        if (!parses(f)) {
          ++out.unparseable;
          continue;
        }
        pool.push_back({s, addr, f});
      }
      if (split.cap_per_sheet) {
        sample_into(pool, split.per_sheet_cap, sampler, wb, out.cases);
        pool.clear();
      }
    }
    if (!split.cap_per_sheet) sample_into(pool, split.per_sheet_cap, sampler, wb, out.cases);
  }
  return out;
}

bool exact_match(std::string_view predicted, std::string_view truth) {
  const std::string t = normalize_formula(truth);
  try {
    return normalize_formula(predicted) == t;
  } catch (const ParseError&) {
    return false;
  }
}

bool exact_match(const Prediction& predicted, std::string_view truth) { return exact_match(predicted.formula, truth); }

Scores score(int n, int n_pred, int n_hit) {
  if (n < 1) throw std::invalid_argument("score needs n >= 1");
  if (n_hit < 0 || n_hit > n_pred || n_pred > n) throw std::invalid_argument("score needs 0 <= n_hit <= n_pred <= n");
  Scores s;
  s.recall = static_cast<double>(n_hit) / n;
  s.precision = n_pred == 0 ? 0.0 : static_cast<double>(n_hit) / n_pred;
  const double sum = s.precision + s.recall;
  s.f1 = sum == 0 ? 0.0 : 2 * s.precision * s.recall / sum;
  return s;
}

Predictor recommender_predictor(const IndexedCorpus& index, const Models& models, RecommenderConfig cfg) {
  return [&index, &models, cfg](const Sheet& target, const TestCase& test, double theta) -> std::optional<Suggestion> {
    RecommenderConfig c = cfg;
    c.theta = theta;
    const auto preds = predict(target, test.cell, test.workbook_id, index, models, c);
    if (preds.empty()) return std::nullopt;
    return Suggestion{preds.front().formula, preds.front().score};
  };
}

EvalResult evaluate(std::span<const TestCase> cases, std::span<const Workbook> test_workbooks,
                    const Predictor& predictor, double theta, int threads, const Warn& warn) {
  std::map<std::string_view, const Workbook*> books;
  for (const auto& wb : test_workbooks) books.emplace(wb.id, &wb);

  std::vector<CaseRecord> records(cases.size());
  std::vector<char> valid(cases.size(), 0);
  for (std::size_t i = 0; i < cases.size(); ++i) {
    CaseRecord& r = records[i];
    r.test = cases[i];
    try {
      const FormulaNode ast = parse_formula(cases[i].truth);
      r.formula_length = ast_size(ast);
      r.formula_type = classify_formula(ast);
      valid[i] = 1;
    } catch (const ParseError& e) {
      if (warn) warn("excluding " + cases[i].workbook_id + "!" + to_a1(cases[i].cell) + ": " + e.what());
    }
  }

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto worker = [&] {
    for (std::size_t i = next++; i < cases.size(); i = next++) {
      if (!valid[i]) continue;
      try {
        const TestCase& tc = cases[i];
        const auto it = books.find(tc.workbook_id);
        if (it == books.end()) throw std::out_of_range("unknown test workbook " + tc.workbook_id);
        const Sheet* s = it->second->find_sheet(tc.sheet);
        if (!s) throw std::out_of_range("unknown test sheet " + tc.sheet);
        Sheet target = *s;
        target.erase(tc.cell);
        records[i].sheet_rows = s->n_rows();
        if (auto sug = predictor(target, tc, theta)) {
          records[i].predicted = sug->formula;
          records[i].score = sug->score;
          records[i].hit = exact_match(sug->formula, tc.truth);
        }
      } catch (...) {
        std::lock_guard lock(failure_mu);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const auto n_threads = std::min<std::size_t>(threads > 0 ? static_cast<std::size_t>(threads) : hw, cases.size());
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  EvalResult out;
  for (std::size_t i = 0; i < cases.size(); ++i) {
    if (!valid[i]) {
      ++out.excluded;
      continue;
    }
    ++out.n;
    if (records[i].predicted) ++out.n_pred;
    if (records[i].hit) ++out.n_hit;
    out.cases.push_back(std::move(records[i]));
  }
  return out;
}

std::vector<PrPoint> pr_sweep(std::span<const TestCase> cases, std::span<const Workbook> test_workbooks,
                              const Predictor& predictor, std::span<const double> theta_grid, int threads) {
  if (theta_grid.empty()) throw std::invalid_argument("theta grid is empty");
  std::vector<PrPoint> out;
  for (double theta : theta_grid) {
    const EvalResult r = evaluate(cases, test_workbooks, predictor, theta, threads);
    PrPoint p{theta, r.n, r.n_pred, r.n_hit, {}};
    if (r.n > 0) p.scores = score(r);
    out.push_back(p);
  }
  return out;
}

std::string_view to_string(BucketKey k) {
  switch (k) {
    case BucketKey::sheet_rows:
      return "sheet_rows";
    case BucketKey::formula_length:
      return "formula_length";
    case BucketKey::formula_type:
      return "formula_type";
  }
  return "?";
}

namespace {

std::vector<std::string> range_labels(const std::vector<int>& edges) {
  std::vector<std::string> labels;
  if (edges.empty()) return {"all"};
  labels.push_back("<" + std::to_string(edges.front()));
  for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
    labels.push_back(std::to_string(edges[i]) + "-" + std::to_string(edges[i + 1] - 1));
  }
  labels.push_back(">=" + std::to_string(edges.back()));
  return labels;
}

std::size_t range_bucket(const std::vector<int>& edges, int v) {
  return static_cast<std::size_t>(std::upper_bound(edges.begin(), edges.end(), v) - edges.begin());
}

}  // namespace

std::vector<Bucket> bucketize(const EvalResult& result, BucketKey key, const BucketEdges& edges) {
  std::vector<Bucket> out;
  std::vector<std::string> labels;
  if (key == BucketKey::formula_type) {
    for (auto t : {FormulaType::conditional, FormulaType::math, FormulaType::string, FormulaType::date,
                   FormulaType::other}) {
      labels.emplace_back(to_string(t));
    }
  } else {
    labels = range_labels(key == BucketKey::sheet_rows ? edges.rows : edges.length);
  }
  for (auto& l : labels) out.push_back({std::move(l), 0, 0, 0, {}});
  for (const auto& c : result.cases) {
    std::size_t b = 0;
    switch (key) {
      case BucketKey::sheet_rows:
        b = range_bucket(edges.rows, c.sheet_rows);
        break;
      case BucketKey::formula_length:
        b = range_bucket(edges.length, c.formula_length);
        break;
      case BucketKey::formula_type:
        b = static_cast<std::size_t>(c.formula_type);
        break;
    }
    Bucket& k = out[b];
    ++k.n;
    if (c.predicted) ++k.n_pred;
    if (c.hit) ++k.n_hit;
  }
  for (auto& k : out) {
    if (k.n > 0) k.scores = score(k.n, k.n_pred, k.n_hit);
  }
  return out;
}

namespace {

nlohmann::ordered_json scores_json(const Scores& s) {
  return {{"recall", s.recall}, {"precision", s.precision}, {"f1", s.f1}};
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::string report_json(const EvalReport& report) {
  nlohmann::ordered_json j;
  j["split"] = {{"mode", report.split.mode == SplitMode::random ? "random" : "timestamp"},
                {"test_fraction", report.split.test_fraction},
                {"per_sheet_cap", report.split.per_sheet_cap},
                {"cap_per_sheet", report.split.cap_per_sheet},
                {"seed", report.split.seed},
                {"reference_workbooks", report.reference_workbooks},
                {"test_workbooks", report.test_workbooks}};
  const EvalResult& r = report.result;
  j["theta"] = report.theta;
  j["n"] = r.n;
  j["n_pred"] = r.n_pred;
  j["n_hit"] = r.n_hit;
  j["excluded"] = r.excluded;
  j["scores"] = r.n > 0 ? scores_json(score(r)) : scores_json({});
  auto pr = nlohmann::ordered_json::array();
  for (const auto& p : report.pr) {
    pr.push_back({{"theta", p.theta}, {"n", p.n}, {"n_pred", p.n_pred}, {"n_hit", p.n_hit},
                  {"recall", p.scores.recall}, {"precision", p.scores.precision}, {"f1", p.scores.f1}});
  }
  j["pr"] = std::move(pr);
  auto buckets = nlohmann::ordered_json::object();
  for (auto key : {BucketKey::sheet_rows, BucketKey::formula_length, BucketKey::formula_type}) {
    auto rows = nlohmann::ordered_json::array();
    for (const auto& b : bucketize(r, key, report.edges)) {
      rows.push_back({{"bucket", b.label}, {"n", b.n}, {"n_pred", b.n_pred}, {"n_hit", b.n_hit},
                      {"scores", scores_json(b.scores)}});
    }
    buckets[std::string(to_string(key))] = std::move(rows);
  }
  j["buckets"] = std::move(buckets);
  return j.dump(2);
}

void write_cases_csv(const EvalResult& result, std::ostream& out) {
  out << "workbook_id,sheet,cell,truth,predicted,score,hit,sheet_rows,formula_length,formula_type\n";
  for (const auto& c : result.cases) {
    out << csv_field(c.test.workbook_id) << ',' << csv_field(c.test.sheet) << ',' << to_a1(c.test.cell) << ','
        << csv_field(c.test.truth) << ',' << csv_field(c.predicted.value_or("")) << ',' << c.score << ','
        << (c.hit ? 1 : 0) << ',' << c.sheet_rows << ',' << c.formula_length << ',' << to_string(c.formula_type)
        << '\n';
  }
}

void write_pr_csv(std::span<const PrPoint> pr, std::ostream& out) {
  out << "theta,n,n_pred,n_hit,precision,recall,f1\n";
  for (const auto& p : pr) {
    out << p.theta << ',' << p.n << ',' << p.n_pred << ',' << p.n_hit << ',' << p.scores.precision << ','
        << p.scores.recall << ',' << p.scores.f1 << '\n';
  }
}

void write_pr_svg(std::span<const PrPoint> pr, std::ostream& out) {
  constexpr double W = 480, H = 360, L = 60, R = 20, T = 20, B = 50;
  auto x = [&](double recall) { return L + recall * (W - L - R); };
  auto y = [&](double precision) { return H - B - precision * (H - T - B); };
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<line x1=\"" << L << "\" y1=\"" << y(0) << "\" x2=\"" << x(1) << "\" y2=\"" << y(0)
      << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << L << "\" y1=\"" << y(0) << "\" x2=\"" << L << "\" y2=\"" << y(1)
      << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double v = i / 4.0;
    out << "<text x=\"" << x(v) << "\" y=\"" << y(0) + 18 << "\" font-size=\"11\" text-anchor=\"middle\">" << v
        << "</text>\n";
    out << "<text x=\"" << L - 8 << "\" y=\"" << y(v) + 4 << "\" font-size=\"11\" text-anchor=\"end\">" << v
        << "</text>\n";
  }
  out << "<text x=\"" << x(0.5) << "\" y=\"" << H - 10 << "\" font-size=\"12\" text-anchor=\"middle\">recall</text>\n";
  out << "<text x=\"15\" y=\"" << y(0.5) << "\" font-size=\"12\" transform=\"rotate(-90 15 " << y(0.5)
      << ")\" text-anchor=\"middle\">precision</text>\n";
  std::vector<PrPoint> sorted(pr.begin(), pr.end());
  std::sort(sorted.begin(), sorted.end(), [](const PrPoint& a, const PrPoint& b) { return a.theta < b.theta; });
  out << "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"2\" points=\"";
  for (const auto& p : sorted) out << x(p.scores.recall) << ',' << y(p.scores.precision) << ' ';
  out << "\"/>\n";
  for (const auto& p : sorted) {
    out << "<circle cx=\"" << x(p.scores.recall) << "\" cy=\"" << y(p.scores.precision)
        << "\" r=\"3\" fill=\"steelblue\"><title>theta=" << p.theta << "</title></circle>\n";
  }
  out << "</svg>\n";
}

}  // namespace formula_scout
