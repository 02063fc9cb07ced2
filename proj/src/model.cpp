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

#include "formula_scout/model.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include "formula_scout/error.hpp"
#include "formula_scout/hash.hpp"
#include "json.hpp"

namespace formula_scout {
namespace {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

DenseLayer make_layer(std::string name, int out, int in, int fan_in, int fan_out, std::mt19937_64& rng) {
  DenseLayer l;
  l.name = std::move(name);
  l.weight.resize(out, in);
  l.bias = Eigen::VectorXd::Zero(out);
  double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> u(-a, a);
  // Column-major fill order is part of the determinism contract.
  for (Eigen::Index j = 0; j < l.weight.cols(); ++j) {
    for (Eigen::Index i = 0; i < l.weight.rows(); ++i) l.weight(i, j) = u(rng);
  }
  return l;
}

void add_reduction_layers(Parameters& p, const ModelConfig& c, std::mt19937_64& rng) {
  p.layers.push_back(make_layer("reduce1", c.d_hidden, c.d_cell, c.d_cell, c.d_hidden, rng));
  p.layers.push_back(make_layer("reduce2", c.d_reduce, c.d_hidden, c.d_hidden, c.d_reduce, rng));
}

std::uint64_t mix_signature(std::uint64_t h, const RowMatrix& z) {
  // Fold the sign pattern of a pre-activation into the signature.
  std::uint64_t word = 0;
  int bits = 0;
  const double* d = z.data();
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    word = (word << 1) | (d[i] > 0 ? 1u : 0u);
    if (++bits == 64) {
      h = (h ^ word) * 1099511628211ull;
      word = 0;
      bits = 0;
    }
  }
  return (h ^ word ^ static_cast<std::uint64_t>(bits)) * 1099511628211ull;
}

std::uint64_t mix_signature(std::uint64_t h, const std::vector<int>& idx) {
  for (int v : idx) h = (h ^ static_cast<std::uint64_t>(v)) * 1099511628211ull;
  return h;
}

struct ReductionTrace {
  RowMatrix z1, h1, z2, h2;
};

void reduction_forward(const Parameters& p, Eigen::Map<const RowMatrix> x, ReductionTrace& tr) {
  const DenseLayer& l1 = p.layers[0];
  const DenseLayer& l2 = p.layers[1];
  tr.z1.noalias() = x * l1.weight.transpose();
  tr.z1.rowwise() += l1.bias.transpose();
  tr.h1 = tr.z1.cwiseMax(0.0);
  tr.z2.noalias() = tr.h1 * l2.weight.transpose();
  tr.z2.rowwise() += l2.bias.transpose();
  tr.h2 = tr.z2.cwiseMax(0.0);
}

void reduction_backward(const Parameters& p, Eigen::Map<const RowMatrix> x, const ReductionTrace& tr,
                        const RowMatrix& g_h2, Parameters& grad) {
  RowMatrix g_z2 = g_h2.cwiseProduct((tr.z2.array() > 0).cast<double>().matrix());
  grad.layers[1].weight.noalias() += g_z2.transpose() * tr.h1;
  grad.layers[1].bias += g_z2.colwise().sum().transpose();
  RowMatrix g_h1 = g_z2 * p.layers[1].weight;
  RowMatrix g_z1 = g_h1.cwiseProduct((tr.z1.array() > 0).cast<double>().matrix());
  grad.layers[0].weight.noalias() += g_z1.transpose() * x;
  grad.layers[0].bias += g_z1.colwise().sum().transpose();
}

Eigen::Map<const RowMatrix> cells_of(const WindowTensor& t) {
  return {t.data.data(), static_cast<Eigen::Index>(t.rows) * t.cols, t.depth};
}

// Below this norm the direction is undefined; the output falls back to the
// uniform unit vector and no gradient flows.
constexpr double kMinNorm = 1e-12;

Eigen::VectorXd unit_or_uniform(const Eigen::VectorXd& v, double norm) {
  if (norm > kMinNorm) return v / norm;
  return Eigen::VectorXd::Constant(v.size(), 1.0 / std::sqrt(static_cast<double>(v.size())));
}

Eigen::VectorXd normalize_backward(const Eigen::VectorXd& phi, double norm, const Eigen::VectorXd& g_phi) {
  return (g_phi - phi * phi.dot(g_phi)) / norm;
}

// --- convolution helpers -------------------------------------------------

struct ConvTrace {
  int h = 0, w = 0;  // input spatial size
  RowMatrix patches;  // (h*w) x (k*k*cin)
  RowMatrix z;        // (h*w) x cout
  RowMatrix a;        // relu(z)
  int ph = 0, pw = 0;
  RowMatrix pooled;   // (ph*pw) x cout
  std::vector<int> argmax;  // (ph*pw*cout), row index into a
};

void im2col(const RowMatrix& in, int h, int w, int k, RowMatrix& patches) {
  const int cin = static_cast<int>(in.cols());
  const int pad = k / 2;
  patches.setZero(static_cast<Eigen::Index>(h) * w, static_cast<Eigen::Index>(k) * k * cin);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const Eigen::Index row = static_cast<Eigen::Index>(y) * w + x;
      for (int dy = 0; dy < k; ++dy) {
        const int sy = y + dy - pad;
        if (sy < 0 || sy >= h) continue;
        for (int dx = 0; dx < k; ++dx) {
          const int sx = x + dx - pad;
          if (sx < 0 || sx >= w) continue;
          patches.block(row, static_cast<Eigen::Index>(dy * k + dx) * cin, 1, cin) =
              in.row(static_cast<Eigen::Index>(sy) * w + sx);
        }
      }
    }
  }
}

void col2im(const RowMatrix& g_patches, int h, int w, int k, int cin, RowMatrix& g_in) {
  const int pad = k / 2;
  g_in.setZero(static_cast<Eigen::Index>(h) * w, cin);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const Eigen::Index row = static_cast<Eigen::Index>(y) * w + x;
      for (int dy = 0; dy < k; ++dy) {
        const int sy = y + dy - pad;
        if (sy < 0 || sy >= h) continue;
        for (int dx = 0; dx < k; ++dx) {
          const int sx = x + dx - pad;
          if (sx < 0 || sx >= w) continue;
          g_in.row(static_cast<Eigen::Index>(sy) * w + sx) +=
              g_patches.block(row, static_cast<Eigen::Index>(dy * k + dx) * cin, 1, cin);
        }
      }
    }
  }
}

void conv_forward(const DenseLayer& layer, const RowMatrix& in, int h, int w, int k, ConvTrace& tr) {
  tr.h = h;
  tr.w = w;
  im2col(in, h, w, k, tr.patches);
  tr.z.noalias() = tr.patches * layer.weight.transpose();
  tr.z.rowwise() += layer.bias.transpose();
  tr.a = tr.z.cwiseMax(0.0);
  // 2x2 max pooling, ceil mode.
  tr.ph = (h + 1) / 2;
  tr.pw = (w + 1) / 2;
  const Eigen::Index cout = tr.a.cols();
  tr.pooled.resize(static_cast<Eigen::Index>(tr.ph) * tr.pw, cout);
  tr.argmax.assign(static_cast<std::size_t>(tr.ph) * tr.pw * cout, 0);
  for (int py = 0; py < tr.ph; ++py) {
    for (int px = 0; px < tr.pw; ++px) {
      const Eigen::Index prow = static_cast<Eigen::Index>(py) * tr.pw + px;
      for (Eigen::Index c = 0; c < cout; ++c) {
        int best = -1;
        double best_v = 0;
        for (int dy = 0; dy < 2; ++dy) {
          const int y = 2 * py + dy;
          if (y >= h) continue;
          for (int dx = 0; dx < 2; ++dx) {
            const int x = 2 * px + dx;
            if (x >= w) continue;
            const int r = y * w + x;
            const double v = tr.a(r, c);
            if (best < 0 || v > best_v) {
              best = r;
              best_v = v;
            }
          }
        }
        tr.pooled(prow, c) = best_v;
        tr.argmax[static_cast<std::size_t>(prow * cout + c)] = best;
      }
    }
  }
}

// Returns the gradient with respect to the conv input.
RowMatrix conv_backward(const DenseLayer& layer, const ConvTrace& tr, const RowMatrix& g_pooled, int k,
                        DenseLayer& grad) {
  const Eigen::Index cout = tr.a.cols();
  RowMatrix g_a = RowMatrix::Zero(tr.a.rows(), cout);
  for (Eigen::Index prow = 0; prow < g_pooled.rows(); ++prow) {
    for (Eigen::Index c = 0; c < cout; ++c) {
      g_a(tr.argmax[static_cast<std::size_t>(prow * cout + c)], c) += g_pooled(prow, c);
    }
  }
  RowMatrix g_z = g_a.cwiseProduct((tr.z.array() > 0).cast<double>().matrix());
  grad.weight.noalias() += g_z.transpose() * tr.patches;
  grad.bias += g_z.colwise().sum().transpose();
  RowMatrix g_patches = g_z * layer.weight;
  RowMatrix g_in;
  col2im(g_patches, tr.h, tr.w, k, static_cast<int>(layer.weight.cols() / (k * k)), g_in);
  return g_in;
}

struct CoarseTrace final : ForwardTrace {
  ReductionTrace reduce;
  std::vector<ConvTrace> convs;
  Eigen::VectorXd flat;
  const WindowTensor* input = nullptr;
  WindowTensor input_copy;
};

struct FineTrace final : ForwardTrace {
  ReductionTrace reduce;
  RowMatrix codes;  // cells x d_fine_per_cell
  WindowTensor input_copy;
};

}  // namespace

// --- config --------------------------------------------------------------

void ModelConfig::validate() const {
  auto positive = [](int v, const char* name) {
    if (v < 1) throw std::invalid_argument(std::string(name) + " must be >= 1");
  };
  positive(n_r, "n_r");
  positive(n_c, "n_c");
  positive(d_cell, "d_cell");
  positive(d_hidden, "d_hidden");
  positive(d_reduce, "d_reduce");
  positive(d_coarse, "d_coarse");
  positive(d_fine_per_cell, "d_fine_per_cell");
  positive(batch_size, "batch_size");
  positive(mining_pool, "mining_pool");
  if (conv_channels.empty()) throw std::invalid_argument("conv_channels must not be empty");
  for (int c : conv_channels) positive(c, "conv channel");
  if (conv_kernel < 1 || conv_kernel % 2 == 0) throw std::invalid_argument("conv_kernel must be odd");
  if (!(margin > 0)) throw std::invalid_argument("margin must be > 0");
  if (!(learning_rate > 0)) throw std::invalid_argument("learning_rate must be > 0");
  if (episodes < 0) throw std::invalid_argument("episodes must be >= 0");
  if (validate_every < 0) throw std::invalid_argument("validate_every must be >= 0");
  if (patience < 0) throw std::invalid_argument("patience must be >= 0");
}

ModelConfig ModelConfig::paper_scale() { return ModelConfig{}; }

ModelConfig ModelConfig::desk_scale() {
  ModelConfig c;
  c.n_r = 20;
  c.n_c = 6;
  c.d_reduce = 16;
  c.d_coarse = 64;
  c.d_fine_per_cell = 8;
  return c;
}

std::string config_to_json(const ModelConfig& c) {
  ordered_json j;
  j["n_r"] = c.n_r;
  j["n_c"] = c.n_c;
  j["d_cell"] = c.d_cell;
  j["d_hidden"] = c.d_hidden;
  j["d_reduce"] = c.d_reduce;
  j["conv_channels"] = c.conv_channels;
  j["conv_kernel"] = c.conv_kernel;
  j["d_coarse"] = c.d_coarse;
  j["d_fine_per_cell"] = c.d_fine_per_cell;
  j["margin"] = c.margin;
  j["learning_rate"] = c.learning_rate;
  j["batch_size"] = c.batch_size;
  j["mining_pool"] = c.mining_pool;
  j["episodes"] = c.episodes;
  j["validate_every"] = c.validate_every;
  j["patience"] = c.patience;
  j["seed"] = c.seed;
  return j.dump(2);
}

ModelConfig config_from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw SchemaError("", std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw SchemaError("", "expected object");
  ModelConfig c;
  const std::string preset = j.value("preset", "");
  if (preset == "desk") {
    c = ModelConfig::desk_scale();
  } else if (preset == "paper") {
    c = ModelConfig::paper_scale();
  } else if (!preset.empty()) {
    throw SchemaError("/preset", "unknown preset " + preset);
  }
  auto read = [&](const char* key, auto& field) {
    if (auto it = j.find(key); it != j.end()) {
      try {
        it->get_to(field);
      } catch (const json::exception& e) {
        throw SchemaError(std::string("/") + key, e.what());
      }
    }
  };
  read("n_r", c.n_r);
  read("n_c", c.n_c);
  read("d_cell", c.d_cell);
  read("d_hidden", c.d_hidden);
  read("d_reduce", c.d_reduce);
  read("conv_channels", c.conv_channels);
  read("conv_kernel", c.conv_kernel);
  read("d_coarse", c.d_coarse);
  read("d_fine_per_cell", c.d_fine_per_cell);
  read("margin", c.margin);
  read("learning_rate", c.learning_rate);
  read("batch_size", c.batch_size);
  read("mining_pool", c.mining_pool);
  read("episodes", c.episodes);
  read("validate_every", c.validate_every);
  read("patience", c.patience);
  read("seed", c.seed);
  return c;
}

// --- parameters ------------------------------------------------------------

std::size_t Parameters::count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
  return n;
}

double& Parameters::flat(std::size_t i) {
  for (auto& l : layers) {
    auto w = static_cast<std::size_t>(l.weight.size());
    if (i < w) return l.weight.data()[i];
    i -= w;
    auto b = static_cast<std::size_t>(l.bias.size());
    if (i < b) return l.bias.data()[i];
    i -= b;
  }
  throw std::out_of_range("parameter index out of range");
}

double Parameters::flat(std::size_t i) const { return const_cast<Parameters*>(this)->flat(i); }

Parameters Parameters::zeros_like() const {
  Parameters z;
  z.layers.reserve(layers.size());
  for (const auto& l : layers) {
    z.layers.push_back({l.name, Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols()),
                        Eigen::VectorXd::Zero(l.bias.size())});
  }
  return z;
}

void Parameters::set_zero() {
  for (auto& l : layers) {
    l.weight.setZero();
    l.bias.setZero();
  }
}

void Parameters::axpy(double alpha, const Parameters& other) {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    layers[i].weight += alpha * other.layers[i].weight;
    layers[i].bias += alpha * other.layers[i].bias;
  }
}

bool Parameters::all_finite() const {
  for (const auto& l : layers) {
    if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
  }
  return true;
}

const DenseLayer& Parameters::layer(std::string_view name) const {
  for (const auto& l : layers) {
    if (l.name == name) return l;
  }
  throw std::out_of_range("no layer named " + std::string(name));
}

bool operator==(const Parameters& a, const Parameters& b) {
  if (a.layers.size() != b.layers.size()) return false;
  for (std::size_t i = 0; i < a.layers.size(); ++i) {
    const auto& x = a.layers[i];
    const auto& y = b.layers[i];
    if (x.name != y.name || x.weight.rows() != y.weight.rows() || x.weight.cols() != y.weight.cols() ||
        x.bias.size() != y.bias.size()) {
      return false;
    }
    if (!(x.weight.array() == y.weight.array()).all() || !(x.bias.array() == y.bias.array()).all()) return false;
  }
  return true;
}

// --- models ----------------------------------------------------------------

void EmbeddingModel::check_shape(const WindowTensor& t) const {
  if (t.rows != config_.n_r || t.cols != config_.n_c || t.depth != config_.d_cell ||
      t.data.size() != static_cast<std::size_t>(t.rows) * t.cols * t.depth) {
    throw std::invalid_argument("window tensor shape " + std::to_string(t.rows) + "x" + std::to_string(t.cols) +
                                "x" + std::to_string(t.depth) + " does not match model input " +
                                std::to_string(config_.n_r) + "x" + std::to_string(config_.n_c) + "x" +
                                std::to_string(config_.d_cell));
  }
}

CoarseModel::CoarseModel(const ModelConfig& config, std::uint64_t seed) : EmbeddingModel(config) {
  config_.validate();
  std::mt19937_64 rng(seed);
  add_reduction_layers(params_, config_, rng);
  const int k = config_.conv_kernel;
  int cin = config_.d_reduce;
  int h = config_.n_r;
  int w = config_.n_c;
  for (std::size_t i = 0; i < config_.conv_channels.size(); ++i) {
    const int cout = config_.conv_channels[i];
    params_.layers.push_back(
        make_layer("conv" + std::to_string(i + 1), cout, k * k * cin, k * k * cin, k * k * cout, rng));
    cin = cout;
    h = (h + 1) / 2;
    w = (w + 1) / 2;
  }
  const int flat = h * w * cin;
  params_.layers.push_back(make_layer("fc", config_.d_coarse, flat, flat, config_.d_coarse, rng));
}

std::unique_ptr<ForwardTrace> CoarseModel::forward(const WindowTensor& t) const {
  check_shape(t);
  auto tr = std::make_unique<CoarseTrace>();
  tr->input_copy = t;
  auto x = cells_of(tr->input_copy);
  reduction_forward(params_, x, tr->reduce);
  std::uint64_t sig = 14695981039346656037ull;
  sig = mix_signature(sig, tr->reduce.z1);
  sig = mix_signature(sig, tr->reduce.z2);
  const int k = config_.conv_kernel;
  const RowMatrix* in = &tr->reduce.h2;
  int h = config_.n_r;
  int w = config_.n_c;
  tr->convs.resize(config_.conv_channels.size());
  for (std::size_t i = 0; i < tr->convs.size(); ++i) {
    conv_forward(params_.layers[2 + i], *in, h, w, k, tr->convs[i]);
    sig = mix_signature(sig, tr->convs[i].z);
    sig = mix_signature(sig, tr->convs[i].argmax);
    h = tr->convs[i].ph;
    w = tr->convs[i].pw;
    in = &tr->convs[i].pooled;
  }
  const RowMatrix& last = *in;
  tr->flat = Eigen::Map<const Eigen::VectorXd>(last.data(), last.size());
  const DenseLayer& fc = params_.layers.back();
  Eigen::VectorXd u = fc.weight * tr->flat + fc.bias;
  tr->pre_norm = u.norm();
  tr->output = unit_or_uniform(u, tr->pre_norm);
  tr->signature = sig;
  return tr;
}

void CoarseModel::backward(const ForwardTrace& base, const Eigen::VectorXd& grad_output, Parameters& grad) const {
  const auto& tr = static_cast<const CoarseTrace&>(base);
  if (tr.pre_norm <= kMinNorm) return;
  Eigen::VectorXd g_u = normalize_backward(tr.output, tr.pre_norm, grad_output);
  const DenseLayer& fc = params_.layers.back();
  DenseLayer& g_fc = grad.layers.back();
  g_fc.weight.noalias() += g_u * tr.flat.transpose();
  g_fc.bias += g_u;
  Eigen::VectorXd g_flat = fc.weight.transpose() * g_u;
  const ConvTrace& last = tr.convs.back();
  RowMatrix g = Eigen::Map<const RowMatrix>(g_flat.data(), last.pooled.rows(), last.pooled.cols());
  const int k = config_.conv_kernel;
  for (std::size_t i = tr.convs.size(); i-- > 0;) {
    g = conv_backward(params_.layers[2 + i], tr.convs[i], g, k, grad.layers[2 + i]);
  }
  reduction_backward(params_, cells_of(tr.input_copy), tr.reduce, g, grad);
}

FineModel::FineModel(const ModelConfig& config, std::uint64_t seed) : EmbeddingModel(config) {
  config_.validate();
  std::mt19937_64 rng(seed);
  add_reduction_layers(params_, config_, rng);
  params_.layers.push_back(make_layer("cell_proj", config_.d_fine_per_cell, config_.d_reduce, config_.d_reduce,
                                      config_.d_fine_per_cell, rng));
}

RowMatrix FineModel::cell_codes(const RowMatrix& cells) const {
  ReductionTrace tr;
  reduction_forward(params_, Eigen::Map<const RowMatrix>(cells.data(), cells.rows(), cells.cols()), tr);
  const DenseLayer& proj = params_.layers[2];
  RowMatrix codes = tr.h2 * proj.weight.transpose();
  codes.rowwise() += proj.bias.transpose();
  return codes;
}

Eigen::VectorXd FineModel::cell_code(std::span<const double> features) const {
  RowMatrix one = Eigen::Map<const RowMatrix>(features.data(), 1, static_cast<Eigen::Index>(features.size()));
  return cell_codes(one).row(0).transpose();
}

std::unique_ptr<ForwardTrace> FineModel::forward(const WindowTensor& t) const {
  check_shape(t);
  auto tr = std::make_unique<FineTrace>();
  tr->input_copy = t;
  auto x = cells_of(tr->input_copy);
  reduction_forward(params_, x, tr->reduce);
  const DenseLayer& proj = params_.layers[2];
  tr->codes.noalias() = tr->reduce.h2 * proj.weight.transpose();
  tr->codes.rowwise() += proj.bias.transpose();
  Eigen::Map<const Eigen::VectorXd> v(tr->codes.data(), tr->codes.size());
  tr->pre_norm = v.norm();
  tr->output = unit_or_uniform(v, tr->pre_norm);
  std::uint64_t sig = 14695981039346656037ull;
  sig = mix_signature(sig, tr->reduce.z1);
  sig = mix_signature(sig, tr->reduce.z2);
  tr->signature = sig;
  return tr;
}

void FineModel::backward(const ForwardTrace& base, const Eigen::VectorXd& grad_output, Parameters& grad) const {
  const auto& tr = static_cast<const FineTrace&>(base);
  if (tr.pre_norm <= kMinNorm) return;
  Eigen::VectorXd g_v = normalize_backward(tr.output, tr.pre_norm, grad_output);
  Eigen::Map<const RowMatrix> g_codes(g_v.data(), tr.codes.rows(), tr.codes.cols());
  const DenseLayer& proj = params_.layers[2];
  grad.layers[2].weight.noalias() += g_codes.transpose() * tr.reduce.h2;
  grad.layers[2].bias += g_codes.colwise().sum().transpose();
  RowMatrix g_h2 = g_codes * proj.weight;
  reduction_backward(params_, cells_of(tr.input_copy), tr.reduce, g_h2, grad);
}

// --- loss ----------------------------------------------------------------

double triplet_loss(std::span<const double> a, std::span<const double> p, std::span<const double> n, double m) {
  if (a.size() != p.size() || a.size() != n.size()) {
    throw std::invalid_argument("triplet embeddings differ in dimension");
  }
  double dp = 0;
  double dn = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dp += (a[i] - p[i]) * (a[i] - p[i]);
    dn += (a[i] - n[i]) * (a[i] - n[i]);
  }
  return std::max(dp - dn + m, 0.0);
}

double triplet_loss(const Eigen::VectorXd& a, const Eigen::VectorXd& p, const Eigen::VectorXd& n, double m) {
  return triplet_loss(std::span<const double>(a.data(), static_cast<std::size_t>(a.size())),
                      std::span<const double>(p.data(), static_cast<std::size_t>(p.size())),
                      std::span<const double>(n.data(), static_cast<std::size_t>(n.size())), m);
}

TripletGradient triplet_loss_gradient(const Eigen::VectorXd& a, const Eigen::VectorXd& p, const Eigen::VectorXd& n,
                                      double m) {
  TripletGradient g;
  g.loss = triplet_loss(a, p, n, m);
  if (g.loss > 0) {
    g.d_anchor = 2.0 * (n - p);
    g.d_positive = -2.0 * (a - p);
    g.d_negative = 2.0 * (a - n);
  } else {
    g.d_anchor = Eigen::VectorXd::Zero(a.size());
    g.d_positive = Eigen::VectorXd::Zero(a.size());
    g.d_negative = Eigen::VectorXd::Zero(a.size());
  }
  return g;
}

// --- persistence -----------------------------------------------------------

namespace {

constexpr const char* kModelFormat = "formula-scout-model";
constexpr int kModelVersion = 1;

template <typename Model>
std::unique_ptr<Model> read_model(const std::filesystem::path& path, std::string& embedder, ModelConfig& config) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw SchemaError(path.string(), std::string("invalid JSON: ") + e.what());
  }
  if (j.value("format", "") != kModelFormat) throw SchemaError(path.string() + "/format", "not a model file");
  if (j.value("version", 0) != kModelVersion) throw SchemaError(path.string() + "/version", "unsupported version");
  config = config_from_json(j.at("config").dump());
  embedder = j.value("embedder", "");
  auto model = std::make_unique<Model>(config, 0);
  if (j.value("branch", "") != model->kind()) throw SchemaError(path.string() + "/branch", "unexpected branch");
  const json& layers = j.at("layers");
  auto& params = model->parameters();
  if (layers.size() != params.layers.size()) throw SchemaError(path.string() + "/layers", "layer count mismatch");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    auto& l = params.layers[i];
    const json& lj = layers[i];
    std::string lpath = path.string() + "/layers/" + std::to_string(i);
    if (lj.value("name", "") != l.name || lj.value("rows", -1) != l.weight.rows() ||
        lj.value("cols", -1) != l.weight.cols()) {
      throw SchemaError(lpath, "layer shape does not match config");
    }
    auto w = lj.at("weight").get<std::vector<double>>();
    auto b = lj.at("bias").get<std::vector<double>>();
    if (w.size() != static_cast<std::size_t>(l.weight.size()) || b.size() != static_cast<std::size_t>(l.bias.size())) {
      throw SchemaError(lpath, "parameter array size mismatch");
    }
    // Row-major on disk.
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) {
        l.weight(r, c) = w[static_cast<std::size_t>(r * l.weight.cols() + c)];
      }
    }
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) l.bias(r) = b[static_cast<std::size_t>(r)];
  }
  return model;
}

}  // namespace

void save_model(const EmbeddingModel& model, const std::string& embedder, const std::filesystem::path& path) {
  ordered_json j;
  j["format"] = kModelFormat;
  j["version"] = kModelVersion;
  j["branch"] = std::string(model.kind());
  j["config"] = ordered_json::parse(config_to_json(model.config()));
  j["embedder"] = embedder;
  ordered_json layers = ordered_json::array();
  for (const auto& l : model.parameters().layers) {
    ordered_json lj;
    lj["name"] = l.name;
    lj["rows"] = l.weight.rows();
    lj["cols"] = l.weight.cols();
    std::vector<double> w(static_cast<std::size_t>(l.weight.size()));
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) {
        w[static_cast<std::size_t>(r * l.weight.cols() + c)] = l.weight(r, c);
      }
    }
    lj["weight"] = std::move(w);
    lj["bias"] = std::vector<double>(l.bias.data(), l.bias.data() + l.bias.size());
    layers.push_back(std::move(lj));
  }
  j["layers"] = std::move(layers);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump() << "\n";
}

void save_models(const CoarseModel& coarse, const FineModel& fine, const std::string& embedder,
                 const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  save_model(coarse, embedder, dir / "coarse.json");
  save_model(fine, embedder, dir / "fine.json");
}

LoadedModels load_models(const std::filesystem::path& dir, const ModelConfig* expected) {
  LoadedModels out;
  ModelConfig cc;
  ModelConfig fc;
  std::string ce;
  std::string fe;
  out.coarse = read_model<CoarseModel>(dir / "coarse.json", ce, cc);
  out.fine = read_model<FineModel>(dir / "fine.json", fe, fc);
  if (!(cc == fc)) throw SchemaError(dir.string(), "coarse and fine models were trained under different configs");
  if (ce != fe) throw SchemaError(dir.string(), "coarse and fine models use different embedders");
  if (expected && !(*expected == cc)) {
    throw SchemaError(dir.string(), "model was trained under a different config");
  }
  out.embedder = ce;
  return out;
}

}  // namespace formula_scout
