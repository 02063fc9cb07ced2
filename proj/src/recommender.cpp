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

#include "formula_scout/recommender.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <stdexcept>
#include <tuple>

#include "formula_scout/error.hpp"
#include "formula_scout/workbook_io.hpp"
#include "json.hpp"

namespace formula_scout {
namespace {

std::int64_t cell_slot_key(int row, int col) { return (static_cast<std::int64_t>(row) << 20) | col; }

int window_top(CellAddress anchor, int n_r) { return anchor.row - (n_r + 1) / 2 + 1; }
int window_left(CellAddress anchor, int n_c) { return anchor.col - (n_c + 1) / 2 + 1; }

// Candidate ordering: distance, then closeness to the translated cell, then
// reading order.
struct Candidate {
  double distance = std::numeric_limits<double>::infinity();
  int proximity = std::numeric_limits<int>::max();
  CellAddress cell{0, 0};

  bool better_than(const Candidate& o) const {
    return std::tie(distance, proximity, cell.row, cell.col) < std::tie(o.distance, o.proximity, o.cell.row, o.cell.col);
  }
};

}  // namespace

void RecommenderConfig::validate() const {
  if (K < 1) throw std::invalid_argument("K must be >= 1");
  if (d < 0) throw std::invalid_argument("d must be >= 0");
  if (top_n < 1) throw std::invalid_argument("top_n must be >= 1");
  if (!(theta >= 0)) throw std::invalid_argument("theta must be >= 0");
  if (theta_sheet && !(*theta_sheet >= 0)) throw std::invalid_argument("theta_sheet must be >= 0");
}

SheetCodes::SheetCodes(const SheetFeatures& features, const RegionEncoder& encoder)
    : n_rows_(features.n_rows()), n_cols_(features.n_cols()), n_r_(encoder.n_r()), n_c_(encoder.n_c()) {
  const auto& present = features.present();
  RowMatrix cells(static_cast<Eigen::Index>(present.size()) + 1, features.depth());
  for (std::size_t i = 0; i < present.size(); ++i) {
    auto f = features.at(present[i].row, present[i].col);
    cells.row(static_cast<Eigen::Index>(i)) = Eigen::Map<const Eigen::RowVectorXd>(f.data(), features.depth());
    slots_.emplace(cell_slot_key(present[i].row, present[i].col), static_cast<Eigen::Index>(i));
  }
  auto e = features.empty();
  cells.row(cells.rows() - 1) = Eigen::Map<const Eigen::RowVectorXd>(e.data(), features.depth());
  codes_ = encoder.encode(cells);
  sq_norms_.resize(static_cast<std::size_t>(codes_.rows()));
  for (Eigen::Index i = 0; i < codes_.rows(); ++i) sq_norms_[static_cast<std::size_t>(i)] = codes_.row(i).squaredNorm();
}

Eigen::Index SheetCodes::slot(int row, int col) const {
  if (row < 1 || col < 1 || row > n_rows_ || col > n_cols_) return codes_.rows() - 1;
  auto it = slots_.find(cell_slot_key(row, col));
  return it == slots_.end() ? codes_.rows() - 1 : it->second;
}

Eigen::VectorXd SheetCodes::region_vector(CellAddress anchor, bool mask_anchor) const {
  const Eigen::Index d = codes_.cols();
  Eigen::VectorXd v(static_cast<Eigen::Index>(n_r_) * n_c_ * d);
  const int top = window_top(anchor, n_r_);
  const int left = window_left(anchor, n_c_);
  for (int i = 0; i < n_r_; ++i) {
    for (int j = 0; j < n_c_; ++j) {
      const bool center = mask_anchor && top + i == anchor.row && left + j == anchor.col;
      const Eigen::Index s = center ? codes_.rows() - 1 : slot(top + i, left + j);
      v.segment((static_cast<Eigen::Index>(i) * n_c_ + j) * d, d) = codes_.row(s).transpose();
    }
  }
  const double n = v.norm();
  if (n > 0) v /= n;
  return v;
}

double region_distance(const SheetCodes& a, CellAddress ca, const SheetCodes& b, CellAddress cb) {
  if (a.n_r() != b.n_r() || a.n_c() != b.n_c() || a.codes().cols() != b.codes().cols()) {
    throw std::invalid_argument("region distance between differently encoded sheets");
  }
  const int ta = window_top(ca, a.n_r());
  const int la = window_left(ca, a.n_c());
  const int tb = window_top(cb, b.n_r());
  const int lb = window_left(cb, b.n_c());
  double dot = 0;
  double na = 0;
  double nb = 0;
  for (int i = 0; i < a.n_r(); ++i) {
    for (int j = 0; j < a.n_c(); ++j) {
      const Eigen::Index sa = a.slot(ta + i, la + j);
      const Eigen::Index sb = b.slot(tb + i, lb + j);
      dot += a.codes().row(sa).dot(b.codes().row(sb));
      na += a.sq_norm(sa);
      nb += b.sq_norm(sb);
    }
  }
  if (na <= 0 || nb <= 0) return 2.0;
  return std::max(0.0, 2.0 - 2.0 * dot / std::sqrt(na * nb));
}

Models Models::from_loaded(LoadedModels loaded) {
  Models m;
  m.embedder = make_embedder(loaded.embedder);
  const int d_pat = loaded.coarse->config().d_cell - m.embedder->dim() - FeatureLayout::kTypes - FeatureLayout::kStyle;
  if (d_pat < 1) throw std::invalid_argument("model d_cell is too small for embedder " + loaded.embedder);
  m.d_pat = d_pat;
  m.coarse = std::shared_ptr<const CoarseModel>(std::move(loaded.coarse));
  m.fine = std::make_shared<FineModelEncoder>(std::shared_ptr<const FineModel>(std::move(loaded.fine)));
  return m;
}

IndexedCorpus empty_index(const Models& models) {
  IndexedCorpus idx;
  idx.coarse = CoarseIndex(models.coarse->config().d_coarse);
  idx.fine = FineIndex(models.fine->output_dim());
  return idx;
}

void index_workbook(IndexedCorpus& index, const Workbook& wb, const Models& models) {
  const ModelConfig& cfg = models.coarse->config();
  for (const auto& sheet : wb.sheets) {
    SheetFeatures f = models.features(sheet);
    index.coarse.add({wb.id, sheet.name()}, models.coarse->embed(f.window(1, 1, cfg.n_r, cfg.n_c)));
    SheetCodes codes(f, *models.fine);
    for (const auto& [addr, cell] : sheet.cells()) {
      if (!cell.formula) continue;
      try {
        parse_formula(*cell.formula);
      } catch (const ParseError&) {
        ++index.skipped_formulas;
        continue;
      }
      index.fine.add({{wb.id, sheet.name()}, addr, *cell.formula}, codes.region_vector(addr, true));
    }
  }
  index.workbooks.insert_or_assign(wb.id, std::make_shared<const Workbook>(wb));
}

IndexedCorpus index_corpus(std::span<const Workbook> corpus, const Models& models) {
  IndexedCorpus idx = empty_index(models);
  for (const auto& wb : corpus) index_workbook(idx, wb, models);
  return idx;
}

void save_index(const IndexedCorpus& index, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "workbooks");
  index.coarse.vectors().save(dir / "coarse.idx");
  index.fine.vectors().save(dir / "fine.idx");
  std::size_t n = 0;
  for (const auto& [id, wb] : index.workbooks) {
    char name[32];
    std::snprintf(name, sizeof name, "%06zu.json", n++);
    save_workbook_file(*wb, dir / "workbooks" / name);
  }
  nlohmann::ordered_json m;
  m["version"] = 1;
  m["sheets"] = index.sheet_count();
  m["formulas"] = index.formula_count();
  m["skipped_formulas"] = index.skipped_formulas;
  std::ofstream out(dir / "manifest.json");
  out << m.dump(2) << "\n";
}

IndexedCorpus load_index(const std::filesystem::path& dir) {
  IndexedCorpus idx;
  idx.coarse = CoarseIndex(VectorIndex::load(dir / "coarse.idx"));
  idx.fine = FineIndex(VectorIndex::load(dir / "fine.idx"));
  for (auto& wb : load_corpus(dir / "workbooks")) {
    std::string id = wb.id;
    idx.workbooks.emplace(std::move(id), std::make_shared<const Workbook>(std::move(wb)));
  }
  std::ifstream in(dir / "manifest.json");
  if (in) {
    auto m = nlohmann::json::parse(in, nullptr, false);
    if (m.is_object()) idx.skipped_formulas = m.value("skipped_formulas", std::size_t{0});
  }
  return idx;
}

std::optional<Resolution> adapt_parameter(const SheetCodes& target, CellAddress c_t, const SheetCodes& reference,
                                          CellAddress c_fref, CellAddress c_r, const RecommenderConfig& cfg) {
  const CellAddress expected{c_r.row - c_fref.row + c_t.row, c_r.col - c_fref.col + c_t.col};
  auto consider = [&](Candidate& best, CellAddress c) {
    Candidate cand{region_distance(target, c, reference, c_r),
                   std::abs(c.row - expected.row) + std::abs(c.col - expected.col), c};
    if (cand.better_than(best)) best = cand;
  };
  Candidate best;
  bool fallback = false;
  if (target.in_bounds(expected)) {
    const int r0 = std::max(1, expected.row - cfg.d);
    const int r1 = std::min(target.n_rows(), expected.row + cfg.d);
    const int c0 = std::max(1, expected.col - cfg.d);
    const int c1 = std::min(target.n_cols(), expected.col + cfg.d);
    for (int r = r0; r <= r1; ++r) {
      for (int c = c0; c <= c1; ++c) consider(best, {r, c});
    }
  }
  if (!(best.distance <= cfg.theta) && cfg.fallback_scan &&
      static_cast<long>(target.n_rows()) * target.n_cols() <= cfg.max_scan_cells) {
    fallback = true;
    for (int r = 1; r <= target.n_rows(); ++r) {
      for (int c = 1; c <= target.n_cols(); ++c) consider(best, {r, c});
    }
  }
  if (!(best.distance <= cfg.theta)) return std::nullopt;
  return Resolution{best.cell, best.distance, fallback};
}

std::optional<Resolution> adapt_parameter(const Sheet& target, CellAddress c_t, const Sheet& reference,
                                          CellAddress c_fref, CellAddress c_r, const Models& models,
                                          const RecommenderConfig& cfg) {
  SheetCodes t(models.features(target, c_t), *models.fine);
  SheetCodes r(models.features(reference), *models.fine);
  return adapt_parameter(t, c_t, r, c_fref, c_r, cfg);
}

std::vector<Prediction> predict(const Sheet& target, CellAddress c_t, std::string_view target_workbook_id,
                                const IndexedCorpus& index, const Models& models, const RecommenderConfig& cfg) {
  cfg.validate();
  if (!target.in_bounds(c_t)) throw std::out_of_range("target cell " + to_a1(c_t) + " outside sheet");
  std::vector<Prediction> out;
  if (index.coarse.size() == 0 || index.fine.size() == 0) return out;
  const ModelConfig& mc = models.coarse->config();

  // S1: similar sheets.
  Eigen::VectorXd qc = models.coarse->embed(models.features(target).window(1, 1, mc.n_r, mc.n_c));
  int extra = 0;
  if (cfg.exclude_target_workbook) {
    if (auto it = index.workbooks.find(target_workbook_id); it != index.workbooks.end()) {
      extra = static_cast<int>(it->second->sheets.size());
    }
  }
  std::vector<std::pair<SheetKey, double>> candidates;
  for (const auto& h : index.coarse.vectors().topk(as_span(qc), cfg.K + extra)) {
    SheetKey key = parse_coarse_key(h.key);
    if (cfg.exclude_target_workbook && key.workbook_id == target_workbook_id) continue;
    if (cfg.theta_sheet && h.distance > *cfg.theta_sheet) continue;
    if (static_cast<int>(candidates.size()) == cfg.K) break;
    candidates.emplace_back(std::move(key), h.distance);
  }
  if (candidates.empty()) return out;

  // S2: reference formulas among the candidate sheets.
  SheetCodes target_codes(models.features(target, c_t), *models.fine);
  Eigen::VectorXd qf = target_codes.region_vector(c_t, true);
  std::vector<std::size_t> ids;
  for (const auto& [key, dist] : candidates) {
    auto e = index.fine.sheet_entries(key);
    ids.insert(ids.end(), e.begin(), e.end());
  }
  auto refs = index.fine.vectors().topk_among(ids, as_span(qf), cfg.top_n, cfg.theta);

  // S3: adapt parameters.
  std::map<SheetKey, std::unique_ptr<SheetCodes>> ref_codes;
  std::set<std::string> seen;
  for (const auto& hit : refs) {
    const FineEntry& entry = index.fine.entry(hit.id);
    auto wb = index.workbooks.find(entry.sheet.workbook_id);
    if (wb == index.workbooks.end()) continue;
    const Sheet* ref_sheet = wb->second->find_sheet(entry.sheet.sheet);
    if (!ref_sheet) continue;
    auto& codes = ref_codes[entry.sheet];
    if (!codes) codes = std::make_unique<SheetCodes>(models.features(*ref_sheet), *models.fine);

    ExtractedTemplate ex = extract_template(parse_formula(entry.formula));
    Prediction p;
    p.tmpl = ex.tmpl;
    p.score = hit.distance;
    p.provenance.workbook_id = entry.sheet.workbook_id;
    p.provenance.sheet = entry.sheet.sheet;
    p.provenance.cell = entry.cell;
    p.provenance.reference_formula = entry.formula;
    p.provenance.region_distance = hit.distance;
    for (const auto& [key, dist] : candidates) {
      if (key == entry.sheet) p.provenance.sheet_distance = dist;
    }
    bool resolved = true;
    for (std::size_t i = 0; i < ex.params.size(); ++i) {
      const CellAddress c_r = ex.params[i];
      if (ex.tmpl.holes[i].ref.sheet) {
        p.params.push_back(c_r);
        p.provenance.parameters.push_back({c_r, c_r, 0.0, false, true});
        continue;
      }
      auto res = adapt_parameter(target_codes, c_t, *codes, entry.cell, c_r, cfg);
      if (!res) {
        resolved = false;
        break;
      }
      p.params.push_back(res->cell);
      p.provenance.parameters.push_back({c_r, res->cell, res->distance, res->fallback, false});
    }
    if (!resolved) continue;
    // Keep ranges well-formed after translation.
    for (std::size_t i = 0; i < ex.tmpl.holes.size(); ++i) {
      const HoleInfo& h = ex.tmpl.holes[i];
      if (!h.range_start || h.range_partner == 0) continue;
      CellAddress& s = p.params[i];
      CellAddress& e = p.params[static_cast<std::size_t>(h.range_partner - 1)];
      CellAddress lo{std::min(s.row, e.row), std::min(s.col, e.col)};
      CellAddress hi{std::max(s.row, e.row), std::max(s.col, e.col)};
      s = lo;
      e = hi;
    }
    p.formula = instantiate(p.tmpl, p.params);
    if (!seen.insert(p.formula).second) continue;
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace formula_scout
