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

#include "formula_scout/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <memory>
#include <numeric>
#include <random>
#include <set>
#include <stdexcept>
#include <unordered_map>

namespace formula_scout {
namespace {

std::string aug_tag(const std::optional<SheetAugmentation>& a) {
  if (!a) return "";
  std::string s = "r";
  for (int r : a->removed_rows) s += std::to_string(r) + ",";
  s += "c";
  for (int c : a->removed_cols) s += std::to_string(c) + ",";
  return s;
}

class TensorBank {
 public:
  TensorBank(const CorpusView& corpus, const TextEmbedder& embedder, const ModelConfig& cfg, int d_pat,
             std::vector<WindowTensor>& out)
      : corpus_(corpus), embedder_(embedder), cfg_(cfg), d_pat_(d_pat), out_(out) {}

  std::size_t sheet(const SheetKey& key, const std::optional<SheetAugmentation>& aug) {
    std::string id = key.workbook_id + '\x1f' + key.sheet + '\x1f' + aug_tag(aug);
    auto it = ids_.find(id);
    if (it != ids_.end()) return it->second;
    const Sheet& s = corpus_.sheet(key);
    WindowTensor t;
    if (aug && !aug->empty()) {
      Sheet mod = apply_sheet_augmentation(s, *aug);
      t = SheetFeatures(mod, embedder_, d_pat_).window(1, 1, cfg_.n_r, cfg_.n_c);
    } else {
      t = features(key).window(1, 1, cfg_.n_r, cfg_.n_c);
    }
    return store(std::move(id), std::move(t));
  }

  std::size_t region(const RegionKey& key, const std::optional<RegionAugmentation>& aug) {
    std::string id = key.workbook_id + '\x1f' + key.sheet + '\x1f' + to_a1(key.cell) + '\x1f' +
                     (aug ? std::to_string(aug->rows) + "x" + std::to_string(aug->cols) : "");
    auto it = ids_.find(id);
    if (it != ids_.end()) return it->second;
    const SheetFeatures& f = features({key.workbook_id, key.sheet});
    WindowTensor t = masked_region_tensor(f, key.cell, cfg_.n_r, cfg_.n_c);
    if (aug) apply_region_augmentation(t, *aug, f.empty());
    return store(std::move(id), std::move(t));
  }

 private:
  const SheetFeatures& features(const SheetKey& key) {
    auto it = features_.find(key);
    if (it == features_.end()) {
      it = features_.emplace(key, std::make_unique<SheetFeatures>(corpus_.sheet(key), embedder_, d_pat_)).first;
    }
    return *it->second;
  }

  std::size_t store(std::string id, WindowTensor t) {
    if (t.depth != cfg_.d_cell) {
      throw std::invalid_argument("cell feature dimension " + std::to_string(t.depth) +
                                  " does not match model d_cell " + std::to_string(cfg_.d_cell));
    }
    out_.push_back(std::move(t));
    ids_.emplace(std::move(id), out_.size() - 1);
    return out_.size() - 1;
  }

  const CorpusView& corpus_;
  const TextEmbedder& embedder_;
  const ModelConfig& cfg_;
  int d_pat_;
  std::vector<WindowTensor>& out_;
  std::unordered_map<std::string, std::size_t> ids_;
  std::map<SheetKey, std::unique_ptr<SheetFeatures>> features_;
};

struct BranchStep {
  double pool_loss = 0;
  double batch_loss = 0;
  int selected = 0;
  int semihard = 0;
};

// Forward traces for every tensor referenced by `cands`, keyed by tensor index.
std::unordered_map<std::size_t, std::unique_ptr<ForwardTrace>> forward_all(const EmbeddingModel& model,
                                                                          const TripletSet& set,
                                                                          std::span<const TripletIndex> cands) {
  std::unordered_map<std::size_t, std::unique_ptr<ForwardTrace>> traces;
  for (const auto& t : cands) {
    for (std::size_t i : {t.anchor, t.positive, t.negative}) {
      if (!traces.count(i)) traces.emplace(i, model.forward(set.tensors[i]));
    }
  }
  return traces;
}

BranchStep branch_step(EmbeddingModel& model, const TripletSet& set, std::span<const TripletIndex> cands,
                       const ModelConfig& cfg) {
  BranchStep out;
  auto traces = forward_all(model, set, cands);
  std::vector<double> losses(cands.size());
  for (std::size_t i = 0; i < cands.size(); ++i) {
    losses[i] = triplet_loss(traces.at(cands[i].anchor)->output, traces.at(cands[i].positive)->output,
                             traces.at(cands[i].negative)->output, cfg.margin);
    out.pool_loss += losses[i];
  }
  out.pool_loss /= static_cast<double>(std::max<std::size_t>(cands.size(), 1));
  MiningResult mined = select_semihard(losses, cfg.margin, cfg.batch_size);
  out.selected = static_cast<int>(mined.selected.size());
  out.semihard = mined.semihard;
  if (mined.selected.empty()) return out;

  Parameters grad = model.parameters().zeros_like();
  for (std::size_t s : mined.selected) {
    const auto& t = cands[s];
    const ForwardTrace& ta = *traces.at(t.anchor);
    const ForwardTrace& tp = *traces.at(t.positive);
    const ForwardTrace& tn = *traces.at(t.negative);
    TripletGradient g = triplet_loss_gradient(ta.output, tp.output, tn.output, cfg.margin);
    out.batch_loss += g.loss;
    model.backward(ta, g.d_anchor, grad);
    model.backward(tp, g.d_positive, grad);
    model.backward(tn, g.d_negative, grad);
  }
  const double inv = 1.0 / static_cast<double>(mined.selected.size());
  out.batch_loss *= inv;
  model.parameters().axpy(-cfg.learning_rate * inv, grad);
  return out;
}

double eval_loss(const EmbeddingModel& model, const WindowTensor& a, const WindowTensor& p, const WindowTensor& n,
                 double margin, std::uint64_t& signature) {
  auto ta = model.forward(a);
  auto tp = model.forward(p);
  auto tn = model.forward(n);
  double l = triplet_loss(ta->output, tp->output, tn->output, margin);
  signature = ((ta->signature * 31 + tp->signature) * 31 + tn->signature) * 2 + (l > 0 ? 1 : 0);
  return l;
}

}  // namespace

WindowTensor masked_region_tensor(const SheetFeatures& features, CellAddress anchor, int n_r, int n_c) {
  ViewWindow w{nullptr, anchor, n_r, n_c, WindowMode::region_centered};
  WindowTensor t = features.window(w.top(), w.left(), n_r, n_c);
  auto e = features.empty();
  std::copy(e.begin(), e.end(), t.cell((n_r + 1) / 2 - 1, (n_c + 1) / 2 - 1).begin());
  return t;
}

TrainingSet build_training_set(const CorpusView& corpus, std::span<const SheetPair> sheet_pairs,
                               std::span<const RegionPair> region_pairs, const TextEmbedder& embedder,
                               const ModelConfig& config, const TrainingSetOptions& options) {
  config.validate();
  TrainingSet out;
  std::mt19937_64 rng(options.seed);

  // Coarse branch.
  {
    TensorBank bank(corpus, embedder, config, options.d_pat, out.coarse.tensors);
    std::map<std::string, std::set<std::string>> names;
    for (const auto& wb : corpus.all()) {
      auto n = wb.sheet_names();
      names[wb.id] = {n.begin(), n.end()};
    }
    // Candidate negatives: sheets that appear in negative pairs.
    std::vector<SheetKey> pool;
    {
      std::set<SheetKey> seen;
      for (const auto& p : sheet_pairs) {
        if (p.label != PairLabel::negative) continue;
        for (const auto& k : {p.a, p.b}) {
          if (seen.insert(k).second) pool.push_back(k);
        }
      }
    }
    auto disjoint = [&](const std::string& x, const std::string& y) {
      const auto& a = names[x];
      const auto& b = names[y];
      return std::none_of(a.begin(), a.end(), [&](const std::string& n) { return b.count(n) > 0; });
    };
    for (const auto& p : sheet_pairs) {
      if (p.label != PairLabel::positive) continue;
      std::vector<const SheetKey*> eligible;
      for (const auto& k : pool) {
        if (k.workbook_id != p.a.workbook_id && disjoint(p.a.workbook_id, k.workbook_id)) eligible.push_back(&k);
      }
      if (eligible.empty()) continue;
      std::size_t a = bank.sheet(p.a, std::nullopt);
      std::size_t b = bank.sheet(p.b, p.augmentation);
      std::uniform_int_distribution<std::size_t> pick(0, eligible.size() - 1);
      for (int i = 0; i < options.coarse_negatives; ++i) {
        std::size_t n = bank.sheet(*eligible[pick(rng)], std::nullopt);
        out.coarse.triplets.push_back({a, b, n});
      }
    }
  }

  // Fine branch: pair each positive with the negative sharing its anchor and
  // second sheet.
  {
    TensorBank bank(corpus, embedder, config, options.d_pat, out.fine.tensors);
    std::map<std::tuple<RegionKey, std::string, std::string>, std::vector<const RegionPair*>> negatives;
    for (const auto& p : region_pairs) {
      if (p.label == PairLabel::negative) negatives[{p.a, p.b.workbook_id, p.b.sheet}].push_back(&p);
    }
    for (const auto& p : region_pairs) {
      if (p.label != PairLabel::positive) continue;
      auto it = negatives.find({p.a, p.b.workbook_id, p.b.sheet});
      if (it == negatives.end()) continue;
      std::size_t a = bank.region(p.a, std::nullopt);
      std::size_t b = bank.region(p.b, p.augmentation);
      for (const RegionPair* n : it->second) out.fine.triplets.push_back({a, b, bank.region(n->b, std::nullopt)});
    }
  }

  if (out.coarse.triplets.empty()) throw std::invalid_argument("no sheet triplets: need positive and negative pairs");
  if (out.fine.triplets.empty()) throw std::invalid_argument("no region triplets: need positive and negative pairs");
  return out;
}

MiningResult select_semihard(std::span<const double> losses, double margin, int batch_size) {
  MiningResult r;
  r.losses.assign(losses.begin(), losses.end());
  std::vector<std::size_t> hard;
  for (std::size_t i = 0; i < losses.size(); ++i) {
    if (losses[i] > 0 && losses[i] < margin) {
      ++r.semihard;
      if (static_cast<int>(r.selected.size()) < batch_size) r.selected.push_back(i);
    } else if (losses[i] >= margin) {
      hard.push_back(i);
    }
  }
  if (static_cast<int>(r.selected.size()) < batch_size) {
    std::stable_sort(hard.begin(), hard.end(), [&](std::size_t x, std::size_t y) { return losses[x] < losses[y]; });
    for (std::size_t i : hard) {
      if (static_cast<int>(r.selected.size()) >= batch_size) break;
      r.selected.push_back(i);
    }
  }
  return r;
}

MiningResult mine_semihard(const EmbeddingModel& model, const TripletSet& set, std::span<const TripletIndex> candidates,
                           double margin, int batch_size) {
  auto traces = forward_all(model, set, candidates);
  std::vector<double> losses;
  losses.reserve(candidates.size());
  for (const auto& t : candidates) {
    losses.push_back(triplet_loss(traces.at(t.anchor)->output, traces.at(t.positive)->output,
                                  traces.at(t.negative)->output, margin));
  }
  return select_semihard(losses, margin, batch_size);
}

double sgd_step(EmbeddingModel& model, const TripletSet& set, std::span<const TripletIndex> batch, double margin,
                double learning_rate) {
  ModelConfig cfg = model.config();
  cfg.margin = margin;
  cfg.learning_rate = learning_rate;
  cfg.batch_size = static_cast<int>(batch.size());
  return branch_step(model, set, batch, cfg).batch_loss;
}

namespace {

// Best-so-far parameters of one branch under validation loss.
struct Checkpoint {
  const TripletSet* val = nullptr;
  double best = std::numeric_limits<double>::infinity();
  int episodes = 0;
  int stale = 0;  // checkpoints since the last new best
  Parameters params;

  double offer(const EmbeddingModel& m, int ep, double margin) {
    if (!val) return std::numeric_limits<double>::quiet_NaN();
    const double loss = mean_triplet_loss(m, *val, margin);
    if (loss < best) {
      best = loss;
      episodes = ep;
      params = m.parameters();
      stale = 0;
    } else {
      ++stale;
    }
    return loss;
  }
};

}  // namespace

double mean_triplet_loss(const EmbeddingModel& model, const TripletSet& set, double margin) {
  if (set.triplets.empty()) return 0;
  std::unordered_map<std::size_t, Eigen::VectorXd> emb;
  auto get = [&](std::size_t i) -> const Eigen::VectorXd& {
    auto it = emb.find(i);
    if (it == emb.end()) it = emb.emplace(i, model.embed(set.tensors[i])).first;
    return it->second;
  };
  double sum = 0;
  for (const auto& t : set.triplets) {
    const double dp = (get(t.anchor) - get(t.positive)).squaredNorm();
    const double dn = (get(t.anchor) - get(t.negative)).squaredNorm();
    sum += std::max(0.0, dp - dn + margin);
  }
  return sum / static_cast<double>(set.triplets.size());
}

TrainedModels train(const TrainingSet& data, const ModelConfig& config,
                    const std::function<void(const EpisodeStats&)>& progress, const TrainingSet* validation) {
  config.validate();
  if (data.coarse.triplets.empty() || data.fine.triplets.empty()) {
    throw std::invalid_argument("training needs triplets for both branches");
  }
  TrainedModels out;
  out.coarse = std::make_unique<CoarseModel>(config, config.seed);
  out.fine = std::make_unique<FineModel>(config, config.seed + 1);
  std::mt19937_64 rng(config.seed + 2);
  std::vector<TripletIndex> pool(static_cast<std::size_t>(config.mining_pool));
  auto sample = [&](const TripletSet& set) {
    std::uniform_int_distribution<std::size_t> pick(0, set.triplets.size() - 1);
    for (auto& t : pool) t = set.triplets[pick(rng)];
  };
  const bool checking = validation && config.validate_every > 0;
  Checkpoint ck_c, ck_f;
  if (checking && !validation->coarse.triplets.empty()) ck_c.val = &validation->coarse;
  if (checking && !validation->fine.triplets.empty()) ck_f.val = &validation->fine;
  ck_c.offer(*out.coarse, 0, config.margin);
  ck_f.offer(*out.fine, 0, config.margin);
  for (int ep = 0; ep < config.episodes; ++ep) {
    EpisodeStats st;
    st.episode = ep;
    sample(data.coarse);
    BranchStep c = branch_step(*out.coarse, data.coarse, pool, config);
    sample(data.fine);
    BranchStep f = branch_step(*out.fine, data.fine, pool, config);
    st.coarse_pool_loss = c.pool_loss;
    st.coarse_batch_loss = c.batch_loss;
    st.coarse_selected = c.selected;
    st.coarse_semihard = c.semihard;
    st.fine_pool_loss = f.pool_loss;
    st.fine_batch_loss = f.batch_loss;
    st.fine_selected = f.selected;
    st.fine_semihard = f.semihard;
    const int done = ep + 1;
    if (checking && (done % config.validate_every == 0 || done == config.episodes)) {
      st.coarse_val_loss = ck_c.offer(*out.coarse, done, config.margin);
      st.fine_val_loss = ck_f.offer(*out.fine, done, config.margin);
    }
    out.log.episodes.push_back(st);
    if (progress) progress(st);
    const auto exhausted = [&](const Checkpoint& c) { return !c.val || c.stale >= config.patience; };
    if (checking && config.patience > 0 && exhausted(ck_c) && exhausted(ck_f)) break;
  }
  const int ran = static_cast<int>(out.log.episodes.size());
  out.log.coarse_kept_episodes = ran;
  out.log.fine_kept_episodes = ran;
  if (ck_c.val) {
    out.coarse->parameters() = ck_c.params;
    out.log.coarse_kept_episodes = ck_c.episodes;
  }
  if (ck_f.val) {
    out.fine->parameters() = ck_f.params;
    out.log.fine_kept_episodes = ck_f.episodes;
  }
  if (!out.coarse->parameters().all_finite() || !out.fine->parameters().all_finite()) {
    throw std::runtime_error("training diverged: non-finite parameters");
  }
  return out;
}

void TrainingLog::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "episode,coarse_pool_loss,coarse_batch_loss,coarse_selected,coarse_semihard,"
         "fine_pool_loss,fine_batch_loss,fine_selected,fine_semihard,coarse_val_loss,fine_val_loss\n";
  out.precision(10);
  for (const auto& e : episodes) {
    out << e.episode << ',' << e.coarse_pool_loss << ',' << e.coarse_batch_loss << ',' << e.coarse_selected << ','
        << e.coarse_semihard << ',' << e.fine_pool_loss << ',' << e.fine_batch_loss << ',' << e.fine_selected << ','
        << e.fine_semihard << ',';
    if (!std::isnan(e.coarse_val_loss)) out << e.coarse_val_loss;
    out << ',';
    if (!std::isnan(e.fine_val_loss)) out << e.fine_val_loss;
    out << '\n';
  }
}

Separation measure_separation(const EmbeddingModel& model, const TripletSet& set) {
  Separation s;
  std::unordered_map<std::size_t, Eigen::VectorXd> emb;
  auto get = [&](std::size_t i) -> const Eigen::VectorXd& {
    auto it = emb.find(i);
    if (it == emb.end()) it = emb.emplace(i, model.embed(set.tensors[i])).first;
    return it->second;
  };
  std::size_t ordered = 0;
  struct Sums {
    double dp = 0, dn = 0;
  };
  std::map<std::size_t, Sums> per_anchor;
  for (const auto& t : set.triplets) {
    double dp = (get(t.anchor) - get(t.positive)).squaredNorm();
    double dn = (get(t.anchor) - get(t.negative)).squaredNorm();
    s.mean_positive += dp;
    s.mean_negative += dn;
    if (dp < dn) ++ordered;
    auto& a = per_anchor[t.anchor];
    a.dp += dp;
    a.dn += dn;
  }
  // Each anchor contributes equally many positives and negatives, so
  // comparing sums compares means.
  std::size_t anchors_ordered = 0;
  for (const auto& [_, a] : per_anchor) anchors_ordered += a.dp < a.dn;
  s.anchors = per_anchor.size();
  if (s.anchors > 0) s.anchor_ordered_fraction = static_cast<double>(anchors_ordered) / static_cast<double>(s.anchors);
  s.triplets = set.triplets.size();
  if (s.triplets > 0) {
    const double n = static_cast<double>(s.triplets);
    s.mean_positive /= n;
    s.mean_negative /= n;
    s.ordered_fraction = static_cast<double>(ordered) / n;
  }
  return s;
}

GradientCheckResult gradient_check(EmbeddingModel& model, const WindowTensor& a, const WindowTensor& p,
                                   const WindowTensor& n, double margin, int samples_per_layer, std::uint64_t seed,
                                   double h) {
  GradientCheckResult r;
  auto ta = model.forward(a);
  auto tp = model.forward(p);
  auto tn = model.forward(n);
  TripletGradient g = triplet_loss_gradient(ta->output, tp->output, tn->output, margin);
  r.loss = g.loss;
  Parameters grad = model.parameters().zeros_like();
  model.backward(*ta, g.d_anchor, grad);
  model.backward(*tp, g.d_positive, grad);
  model.backward(*tn, g.d_negative, grad);
  std::uint64_t base_sig = 0;
  eval_loss(model, a, p, n, margin, base_sig);

  std::mt19937_64 rng(seed);
  Parameters& params = model.parameters();
  std::size_t offset = 0;
  for (const auto& layer : params.layers) {
    const std::size_t size = static_cast<std::size_t>(layer.weight.size() + layer.bias.size());
    std::uniform_int_distribution<std::size_t> pick(0, size - 1);
    for (int s = 0; s < samples_per_layer; ++s) {
      const std::size_t i = offset + pick(rng);
      const double saved = params.flat(i);
      std::uint64_t sig_plus = 0;
      std::uint64_t sig_minus = 0;
      params.flat(i) = saved + h;
      const double lp = eval_loss(model, a, p, n, margin, sig_plus);
      params.flat(i) = saved - h;
      const double lm = eval_loss(model, a, p, n, margin, sig_minus);
      params.flat(i) = saved;
      if (sig_plus != base_sig || sig_minus != base_sig) {
        ++r.skipped_kinks;
        continue;
      }
      const double numeric = (lp - lm) / (2 * h);
      const double analytic = grad.flat(i);
      const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-7});
      r.max_relative_error = std::max(r.max_relative_error, std::abs(analytic - numeric) / denom);
      ++r.checked;
    }
    offset += size;
  }
  return r;
}

}  // namespace formula_scout
