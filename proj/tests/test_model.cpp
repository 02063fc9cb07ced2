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

#include <Eigen/QR>
#include <filesystem>
#include <random>

#include "formula_scout/error.hpp"
#include "formula_scout/model.hpp"
#include "formula_scout/training.hpp"

using namespace formula_scout;

namespace {

WindowTensor random_tensor(const ModelConfig& c, std::mt19937_64& rng) {
  WindowTensor t{c.n_r, c.n_c, c.d_cell, {}};
  std::uniform_real_distribution<double> u(-1, 1);
  t.data.resize(static_cast<std::size_t>(c.n_r * c.n_c * c.d_cell));
  for (double& x : t.data) x = u(rng);
  return t;
}

Eigen::VectorXd unit(std::mt19937_64& rng, int d) {
  std::normal_distribution<double> g;
  Eigen::VectorXd v(d);
  for (int i = 0; i < d; ++i) v[i] = g(rng);
  return v.normalized();
}

ModelConfig tiny() {
  ModelConfig c;
  c.n_r = 6;
  c.n_c = 4;
  c.d_cell = 10;
  c.d_hidden = 8;
  c.d_reduce = 4;
  c.conv_channels = {4, 6};
  c.d_coarse = 12;
  c.d_fine_per_cell = 3;
  return c;
}

}  // namespace

TEST(TripletLoss, DefinitionExamples) {
  const Eigen::Vector2d a(1, 0), p(0.6, 0.8), n(0, 1);
  EXPECT_NEAR(triplet_loss(a, p, n, 0.2), 0.0, 1e-9);
  EXPECT_NEAR(triplet_loss(a, a, a, 0.2), 0.2, 1e-9);
  // anchor == positive, negative at squared distance 0.8 >= m
  EXPECT_NEAR(triplet_loss(a, a, p, 0.2), 0.0, 1e-9);
  // hinge active: 2 - 0.8 + 0.2
  EXPECT_NEAR(triplet_loss(a, n, p, 0.2), 1.4, 1e-9);
  EXPECT_THROW(triplet_loss(a, Eigen::Vector3d(1, 0, 0), n, 0.2), std::invalid_argument);
}

TEST(TripletLoss, NonNegativeAndRotationInvariant) {
  std::mt19937_64 rng(42);
  for (int i = 0; i < 10000; ++i) {
    const int d = 2 + static_cast<int>(rng() % 7);
    const auto a = unit(rng, d), p = unit(rng, d), n = unit(rng, d);
    Eigen::MatrixXd m(d, d);
    std::normal_distribution<double> g;
    for (int r = 0; r < d; ++r) {
      for (int c = 0; c < d; ++c) m(r, c) = g(rng);
    }
    const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(m).householderQ();
    const double l = triplet_loss(a, p, n, 0.2);
    ASSERT_GE(l, 0.0);
    ASSERT_NEAR(triplet_loss(Eigen::VectorXd(q * a), Eigen::VectorXd(q * p), Eigen::VectorXd(q * n), 0.2), l, 1e-9);
  }
}

TEST(TripletLoss, GradientMatchesClosedForm) {
  const Eigen::Vector2d a(1, 0), p(0, 1), n(0.6, 0.8);
  const auto g = triplet_loss_gradient(a, p, n, 0.2);
  EXPECT_NEAR(g.loss, 1.4, 1e-12);
  EXPECT_TRUE(g.d_anchor.isApprox(Eigen::Vector2d(1.2, -0.4)));
  EXPECT_TRUE(g.d_positive.isApprox(Eigen::Vector2d(-2, 2)));
  EXPECT_TRUE(g.d_negative.isApprox(Eigen::Vector2d(0.8, -1.6)));
  const auto z = triplet_loss_gradient(a, n, p, 0.0 - 5);
  EXPECT_EQ(z.d_anchor.norm(), 0.0);
}

TEST(Model, ConfigValidation) {
  EXPECT_NO_THROW(ModelConfig::desk_scale().validate());
  EXPECT_NO_THROW(ModelConfig::paper_scale().validate());
  EXPECT_EQ(ModelConfig::paper_scale().d_fine(), 16000);
  EXPECT_EQ(ModelConfig::paper_scale().d_coarse, 896);
  ModelConfig c = tiny();
  c.margin = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = tiny();
  c.d_reduce = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  EXPECT_EQ(config_from_json(config_to_json(ModelConfig::desk_scale())), ModelConfig::desk_scale());
}

TEST(Model, OutputsAreUnitNormAndDeterministic) {
  const ModelConfig c = ModelConfig::desk_scale();
  CoarseModel coarse(c, 1);
  FineModel fine(c, 2);
  EXPECT_EQ(coarse.output_dim(), 64);
  EXPECT_EQ(fine.output_dim(), 8 * 20 * 6);
  std::mt19937_64 rng(3);
  for (int i = 0; i < 50; ++i) {
    const auto t = random_tensor(c, rng);
    const auto vc = coarse.embed(t);
    const auto vf = fine.embed(t);
    EXPECT_NEAR(vc.norm(), 1.0, 1e-6);
    EXPECT_NEAR(vf.norm(), 1.0, 1e-6);
    EXPECT_EQ(vc, coarse.embed(t));
  }
  WindowTensor zero{c.n_r, c.n_c, c.d_cell, std::vector<double>(static_cast<std::size_t>(c.n_r * c.n_c * c.d_cell))};
  EXPECT_NEAR(coarse.embed(zero).norm(), 1.0, 1e-6);
  EXPECT_NEAR(fine.embed(zero).norm(), 1.0, 1e-6);
}

TEST(Model, ShapeMismatchThrows) {
  const ModelConfig c = ModelConfig::desk_scale();
  CoarseModel coarse(c, 1);
  FineModel fine(c, 1);
  WindowTensor bad{c.n_r + 1, c.n_c, c.d_cell,
                   std::vector<double>(static_cast<std::size_t>((c.n_r + 1) * c.n_c * c.d_cell))};
  EXPECT_THROW(coarse.embed(bad), std::invalid_argument);
  EXPECT_THROW(fine.embed(bad), std::invalid_argument);
}

TEST(Model, SeededInitializationIsReproducible) {
  const ModelConfig c = tiny();
  EXPECT_EQ(CoarseModel(c, 5).parameters(), CoarseModel(c, 5).parameters());
  EXPECT_FALSE(CoarseModel(c, 5).parameters() == CoarseModel(c, 6).parameters());
  const auto& l = CoarseModel(c, 5).parameters().layer("reduce1");
  const double a = std::sqrt(6.0 / (c.d_cell + c.d_hidden));
  EXPECT_LE(l.weight.cwiseAbs().maxCoeff(), a);
  EXPECT_TRUE(CoarseModel(c, 5).parameters().all_finite());
}

TEST(Model, FineBranchIsPerCell) {
  const ModelConfig c = tiny();
  FineModel fine(c, 9);
  std::mt19937_64 rng(4);
  const auto t = random_tensor(c, rng);
  const auto tr = fine.forward(t);
  const Eigen::VectorXd pre = tr->output * tr->pre_norm;
  const int k = c.d_fine_per_cell;
  for (int r = 0; r < c.n_r; ++r) {
    for (int col = 0; col < c.n_c; ++col) {
      const Eigen::VectorXd code = fine.cell_code(t.cell(r, col));
      const int slot = (r * c.n_c + col) * k;
      EXPECT_TRUE(pre.segment(slot, k).isApprox(code, 1e-12)) << r << "," << col;
    }
  }
  WindowTensor z = t;
  for (double& x : z.cell(2, 1)) x = 0;
  const auto tz = fine.forward(z);
  const Eigen::VectorXd pz = tz->output * tz->pre_norm;
  for (int i = 0; i < pre.size(); ++i) {
    const bool inside = i / k == 2 * c.n_c + 1;
    if (!inside) {
      EXPECT_NEAR(pz[i], pre[i], 1e-12) << i;
    }
  }
  EXPECT_FALSE(pz.segment((2 * c.n_c + 1) * k, k).isApprox(pre.segment((2 * c.n_c + 1) * k, k)));
}

TEST(Model, ShiftedRegionIsFartherThanIdentical) {
  const ModelConfig c = tiny();
  FineModel fine(c, 9);
  std::mt19937_64 rng(4);
  const auto t = random_tensor(c, rng);
  WindowTensor s = t;
  for (int r = 0; r + 1 < c.n_r; ++r) {
    for (int col = 0; col < c.n_c; ++col) {
      std::copy(t.cell(r + 1, col).begin(), t.cell(r + 1, col).end(), s.cell(r, col).begin());
    }
  }
  EXPECT_EQ((fine.embed(t) - fine.embed(t)).norm(), 0.0);
  EXPECT_GT((fine.embed(t) - fine.embed(s)).norm(), 0.0);
}

TEST(Model, GradientCheckBothBranches) {
  for (const ModelConfig& c : {tiny(), ModelConfig::desk_scale()}) {
    CoarseModel coarse(c, 11);
    FineModel fine(c, 12);
    for (EmbeddingModel* m : {static_cast<EmbeddingModel*>(&coarse), static_cast<EmbeddingModel*>(&fine)}) {
      std::mt19937_64 rng(21);
      GradientCheckResult r;
      // Draw until the hinge is active away from the kink.
      for (int attempt = 0; attempt < 50; ++attempt) {
        const auto a = random_tensor(c, rng);
        const auto p = random_tensor(c, rng);
        const auto n = random_tensor(c, rng);
        const double l = triplet_loss(m->embed(a), m->embed(p), m->embed(n), 1.0);
        if (l < 1e-3) continue;
        r = gradient_check(*m, a, p, n, 1.0, 12, 5);
        break;
      }
      EXPECT_GT(r.loss, 0.0) << m->kind();
      EXPECT_GT(r.checked, 30) << m->kind();
      EXPECT_LT(r.max_relative_error, 1e-4) << m->kind();
    }
  }
}

TEST(Model, GradientCheckInactiveHingeIsZero) {
  const ModelConfig c = tiny();
  CoarseModel coarse(c, 1);
  std::mt19937_64 rng(2);
  const auto a = random_tensor(c, rng);
  const auto n = random_tensor(c, rng);
  // With P == A the loss is max(m - |a-n|^2, 0); a tiny margin keeps it at 0.
  const auto r = gradient_check(coarse, a, a, n, 1e-12, 5, 1);
  if (triplet_loss(coarse.embed(a), coarse.embed(a), coarse.embed(n), 1e-12) == 0.0) {
    EXPECT_EQ(r.loss, 0.0);
    EXPECT_EQ(r.max_relative_error, 0.0);
  }
}

TEST(Model, SaveLoadRoundTrip) {
  const ModelConfig c = tiny();
  CoarseModel coarse(c, 3);
  FineModel fine(c, 4);
  const auto dir = std::filesystem::temp_directory_path() / "fs_model_test";
  std::filesystem::remove_all(dir);
  save_models(coarse, fine, "trigram:50:0", dir);
  const auto loaded = load_models(dir, &c);
  EXPECT_EQ(loaded.coarse->parameters(), coarse.parameters());
  EXPECT_EQ(loaded.fine->parameters(), fine.parameters());
  EXPECT_EQ(loaded.embedder, "trigram:50:0");
  ModelConfig other = c;
  other.d_coarse = 13;
  EXPECT_THROW(load_models(dir, &other), SchemaError);
  std::filesystem::remove_all(dir);
}
