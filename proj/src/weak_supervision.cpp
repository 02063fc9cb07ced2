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

#include "formula_scout/weak_supervision.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <stdexcept>

#include "formula_scout/error.hpp"
#include "formula_scout/formula.hpp"
#include "json.hpp"

namespace formula_scout {
namespace {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

std::optional<std::string> normalized(const Cell& c) {
  if (!c.formula) return std::nullopt;
  try {
    return normalize_formula(*c.formula);
  } catch (const ParseError&) {
    return std::nullopt;
  }
}

ordered_json sheet_key_json(const SheetKey& k) { return ordered_json{{"workbook", k.workbook_id}, {"sheet", k.sheet}}; }

ordered_json region_key_json(const RegionKey& k) {
  return ordered_json{{"workbook", k.workbook_id}, {"sheet", k.sheet}, {"addr", to_a1(k.cell)}};
}

PairLabel label_from(const json& j, const std::string& where) {
  std::string s = j.at("label").get<std::string>();
  if (s == "positive") return PairLabel::positive;
  if (s == "negative") return PairLabel::negative;
  throw SchemaError(where + "/label", "expected positive or negative, got '" + s + "'");
}

template <typename F>
void read_lines(const std::filesystem::path& path, F&& each) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    std::string where = path.string() + ":" + std::to_string(n);
    try {
      each(json::parse(line), where);
    } catch (const json::exception& e) {
      throw SchemaError(where, e.what());
    }
  }
}

}  // namespace

void SheetNameStats::add(std::string_view name, std::int64_t count) {
  auto it = freq.find(name);
  if (it == freq.end()) {
    freq.emplace(std::string(name), count);
  } else {
    it->second += count;
  }
  total += count;
}

SheetNameStats SheetNameStats::from_corpus(std::span<const Workbook> corpus) {
  SheetNameStats s;
  for (const auto& wb : corpus) {
    for (const auto& sh : wb.sheets) s.add(sh.name());
  }
  return s;
}

double name_probability(const SheetNameStats& stats, std::string_view name) {
  return std::exp(log_name_probability(stats, name));
}

double log_name_probability(const SheetNameStats& stats, std::string_view name) {
  if (stats.total <= 0) throw std::invalid_argument("sheet-name universe is empty");
  auto it = stats.freq.find(name);
  double f = (it == stats.freq.end() || it->second <= 0) ? 1.0 : static_cast<double>(it->second);
  return std::log(f) - std::log(static_cast<double>(stats.total));
}

std::optional<double> log_p_value(const Workbook& a, const Workbook& b, const SheetNameStats& stats) {
  if (a.sheets.empty() || a.sheets.size() != b.sheets.size()) return std::nullopt;
  double lp = 0;
  for (std::size_t i = 0; i < a.sheets.size(); ++i) {
    if (a.sheets[i].name() != b.sheets[i].name()) return std::nullopt;
    lp += log_name_probability(stats, a.sheets[i].name());
  }
  return lp;
}

bool similar_file_test(const Workbook& a, const Workbook& b, const SheetNameStats& stats, double alpha) {
  auto lp = log_p_value(a, b, stats);
  return lp && *lp <= std::log(alpha);
}

std::string_view to_string(PairLabel l) { return l == PairLabel::positive ? "positive" : "negative"; }

CorpusView::CorpusView(std::span<const Workbook> corpus) : corpus_(corpus) {
  for (std::size_t i = 0; i < corpus.size(); ++i) by_id_.emplace(corpus[i].id, i);
}

const Workbook* CorpusView::workbook(std::string_view id) const {
  auto it = by_id_.find(id);
  return it == by_id_.end() ? nullptr : &corpus_[it->second];
}

const Sheet& CorpusView::sheet(const SheetKey& key) const {
  const Workbook* wb = workbook(key.workbook_id);
  if (!wb) throw std::out_of_range("unknown workbook '" + key.workbook_id + "'");
  const Sheet* s = wb->find_sheet(key.sheet);
  if (!s) throw std::out_of_range("workbook '" + key.workbook_id + "' has no sheet '" + key.sheet + "'");
  return *s;
}

std::vector<SheetPair> generate_sheet_pairs(std::span<const Workbook> corpus, const SheetNameStats& stats,
                                            double alpha, std::mt19937_64& rng) {
  if (corpus.empty()) throw std::invalid_argument("corpus is empty");
  std::vector<SheetPair> out;

  // Files can only pass the test against files with the same name sequence.
  std::map<std::vector<std::string>, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (!corpus[i].sheets.empty()) groups[corpus[i].sheet_names()].push_back(i);
  }
  for (const auto& [names, members] : groups) {
    if (members.size() < 2) continue;
    for (std::size_t x = 0; x < members.size(); ++x) {
      for (std::size_t y = x + 1; y < members.size(); ++y) {
        const Workbook& fa = corpus[members[x]];
        const Workbook& fb = corpus[members[y]];
        if (!similar_file_test(fa, fb, stats, alpha)) continue;
        for (const auto& n : names) out.push_back({{fa.id, n}, {fb.id, n}, PairLabel::positive, std::nullopt});
      }
    }
  }

  const std::size_t n_pos = out.size();
  std::vector<std::set<std::string>> name_sets;
  name_sets.reserve(corpus.size());
  for (const auto& wb : corpus) {
    auto n = wb.sheet_names();
    name_sets.emplace_back(n.begin(), n.end());
  }
  auto disjoint = [&](std::size_t i, std::size_t j) {
    for (const auto& n : name_sets[i]) {
      if (name_sets[j].count(n)) return false;
    }
    return true;
  };
  std::uniform_int_distribution<std::size_t> pick(0, corpus.size() - 1);
  std::size_t made = 0;
  const std::size_t budget = 100 * n_pos + 1000;
  for (std::size_t attempt = 0; made < n_pos && attempt < budget; ++attempt) {
    std::size_t i = pick(rng);
    std::size_t j = pick(rng);
    if (i == j || corpus[i].sheets.empty() || corpus[j].sheets.empty() || !disjoint(i, j)) continue;
    std::uniform_int_distribution<std::size_t> si(0, corpus[i].sheets.size() - 1);
    std::uniform_int_distribution<std::size_t> sj(0, corpus[j].sheets.size() - 1);
    out.push_back({{corpus[i].id, corpus[i].sheets[si(rng)].name()},
                   {corpus[j].id, corpus[j].sheets[sj(rng)].name()},
                   PairLabel::negative,
                   std::nullopt});
    ++made;
  }
  return out;
}

std::vector<RegionPair> generate_region_pairs(std::span<const SheetPair> sheet_pairs, const CorpusView& corpus) {
  std::vector<RegionPair> out;
  for (const auto& sp : sheet_pairs) {
    if (sp.label != PairLabel::positive || sp.augmentation) continue;
    const Sheet& s = corpus.sheet(sp.a);
    const Sheet& t = corpus.sheet(sp.b);
    for (const auto& [addr, cell] : s.cells()) {
      auto f = normalized(cell);
      if (!f) continue;
      const Cell* other = t.find(addr);
      if (!other) continue;
      auto g = normalized(*other);
      if (!g || *g != *f) continue;
      RegionKey a{sp.a.workbook_id, sp.a.sheet, addr};
      out.push_back({a, {sp.b.workbook_id, sp.b.sheet, addr}, PairLabel::positive, std::nullopt});
      // Reading order from the matched location: down, then later columns.
      std::optional<CellAddress> neg;
      for (int col = addr.col; col <= t.n_cols() && !neg; ++col) {
        for (int row = (col == addr.col ? addr.row + 1 : 1); row <= t.n_rows(); ++row) {
          const Cell* c = t.find({row, col});
          if (!c) continue;
          auto h = normalized(*c);
          if (h && *h != *f) {
            neg = CellAddress{row, col};
            break;
          }
        }
      }
      if (neg) out.push_back({a, {sp.b.workbook_id, sp.b.sheet, *neg}, PairLabel::negative, std::nullopt});
    }
  }
  return out;
}

SheetAugmentation draw_sheet_augmentation(const Sheet& sheet, double p, std::mt19937_64& rng) {
  SheetAugmentation aug;
  std::bernoulli_distribution drop(std::clamp(p, 0.0, 1.0));
  for (int r = 1; r <= sheet.n_rows(); ++r) {
    if (drop(rng)) aug.removed_rows.push_back(r);
  }
  for (int c = 1; c <= sheet.n_cols(); ++c) {
    if (drop(rng)) aug.removed_cols.push_back(c);
  }
  return aug;
}

Sheet apply_sheet_augmentation(const Sheet& sheet, const SheetAugmentation& aug) {
  auto shift = [](const std::vector<int>& removed, int x) {
    // Count of removed indices below x; -1 when x itself is removed.
    auto it = std::lower_bound(removed.begin(), removed.end(), x);
    if (it != removed.end() && *it == x) return -1;
    return static_cast<int>(it - removed.begin());
  };
  int rows = sheet.n_rows() - static_cast<int>(aug.removed_rows.size());
  int cols = sheet.n_cols() - static_cast<int>(aug.removed_cols.size());
  Sheet out(sheet.name(), std::max(rows, 0), std::max(cols, 0));
  for (const auto& [addr, cell] : sheet.cells()) {
    int dr = shift(aug.removed_rows, addr.row);
    int dc = shift(aug.removed_cols, addr.col);
    if (dr < 0 || dc < 0) continue;
    Cell c = cell;
    c.address = {addr.row - dr, addr.col - dc};
    out.set(std::move(c));
  }
  return out;
}

RegionAugmentation draw_region_augmentation(int n_r, int n_c, double p, std::mt19937_64& rng) {
  double q = std::clamp(p, 0.0, 1.0);
  std::binomial_distribution<int> br(n_r, q);
  std::binomial_distribution<int> bc(n_c, q);
  RegionAugmentation aug{br(rng), bc(rng)};
  // The center sits at index ceil(n/2); everything after it may go.
  aug.rows = std::min(aug.rows, n_r - (n_r + 1) / 2);
  aug.cols = std::min(aug.cols, n_c - (n_c + 1) / 2);
  return aug;
}

void apply_region_augmentation(WindowTensor& t, const RegionAugmentation& aug, std::span<const double> empty) {
  if (static_cast<int>(empty.size()) != t.depth) throw std::invalid_argument("empty-cell vector has wrong depth");
  for (int r = 0; r < t.rows; ++r) {
    for (int c = 0; c < t.cols; ++c) {
      if (r >= t.rows - aug.rows || c >= t.cols - aug.cols) std::copy(empty.begin(), empty.end(), t.cell(r, c).begin());
    }
  }
}

SheetPair augment(const SheetPair& pair, const Sheet& b, const AugmentConfig& cfg, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, cfg.p_max);
  double p = u(rng);
  SheetPair out = pair;
  out.augmentation = draw_sheet_augmentation(b, p, rng);
  return out;
}

RegionPair augment(const RegionPair& pair, int n_r, int n_c, const AugmentConfig& cfg, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, cfg.p_max);
  double p = u(rng);
  RegionPair out = pair;
  out.augmentation = draw_region_augmentation(n_r, n_c, p, rng);
  return out;
}

void augment_pairs(std::vector<SheetPair>& sheet_pairs, std::vector<RegionPair>& region_pairs, const CorpusView& corpus,
                   int n_r, int n_c, const AugmentConfig& cfg) {
  if (cfg.p_max < 0 || cfg.p_max > 1) throw std::invalid_argument("p_max must lie in [0,1]");
  std::mt19937_64 rng(cfg.seed);
  const std::size_t n = sheet_pairs.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (sheet_pairs[i].label != PairLabel::positive || sheet_pairs[i].augmentation) continue;
    sheet_pairs.push_back(augment(sheet_pairs[i], corpus.sheet(sheet_pairs[i].b), cfg, rng));
  }
  std::bernoulli_distribution pick(std::clamp(cfg.region_fraction, 0.0, 1.0));
  for (auto& rp : region_pairs) {
    if (rp.label == PairLabel::positive && pick(rng)) rp = augment(rp, n_r, n_c, cfg, rng);
  }
}

void write_sheet_pairs(const std::vector<SheetPair>& pairs, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& p : pairs) {
    ordered_json j;
    j["label"] = std::string(to_string(p.label));
    j["a"] = sheet_key_json(p.a);
    j["b"] = sheet_key_json(p.b);
    if (p.augmentation) {
      j["augment"] = ordered_json{{"rows", p.augmentation->removed_rows}, {"cols", p.augmentation->removed_cols}};
    }
    out << j.dump() << "\n";
  }
}

void write_region_pairs(const std::vector<RegionPair>& pairs, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& p : pairs) {
    ordered_json j;
    j["label"] = std::string(to_string(p.label));
    j["a"] = region_key_json(p.a);
    j["b"] = region_key_json(p.b);
    if (p.augmentation) j["augment"] = ordered_json{{"rows", p.augmentation->rows}, {"cols", p.augmentation->cols}};
    out << j.dump() << "\n";
  }
}

std::vector<SheetPair> read_sheet_pairs(const std::filesystem::path& path) {
  std::vector<SheetPair> out;
  read_lines(path, [&](const json& j, const std::string& where) {
    SheetPair p;
    p.label = label_from(j, where);
    p.a = {j.at("a").at("workbook").get<std::string>(), j.at("a").at("sheet").get<std::string>()};
    p.b = {j.at("b").at("workbook").get<std::string>(), j.at("b").at("sheet").get<std::string>()};
    if (auto it = j.find("augment"); it != j.end()) {
      p.augmentation = SheetAugmentation{it->at("rows").get<std::vector<int>>(), it->at("cols").get<std::vector<int>>()};
    }
    out.push_back(std::move(p));
  });
  return out;
}

std::vector<RegionPair> read_region_pairs(const std::filesystem::path& path) {
  std::vector<RegionPair> out;
  read_lines(path, [&](const json& j, const std::string& where) {
    RegionPair p;
    p.label = label_from(j, where);
    auto key = [&](const json& k) {
      return RegionKey{k.at("workbook").get<std::string>(), k.at("sheet").get<std::string>(),
                       parse_a1(k.at("addr").get<std::string>())};
    };
    p.a = key(j.at("a"));
    p.b = key(j.at("b"));
    if (auto it = j.find("augment"); it != j.end()) {
      p.augmentation = RegionAugmentation{it->at("rows").get<int>(), it->at("cols").get<int>()};
    }
    out.push_back(std::move(p));
  });
  return out;
}

}  // namespace formula_scout
