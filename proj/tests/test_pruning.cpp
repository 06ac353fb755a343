// Copyright 2026 The mrcl Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <set>
#include <sstream>

#include "csv_reader.hpp"
#include "mrcl/csv.hpp"
#include "mrcl/pruning.hpp"

namespace mrcl {
namespace {

// Gaussian log-density at zero, computed directly.
double log_density_at_zero(double mu, double sigma) {
  return -0.5 * std::log(2.0 * std::numbers::pi) - std::log(sigma) - mu * mu / (2.0 * sigma * sigma);
}

TEST(ScoreKLToDelta, Examples) {
  EXPECT_EQ(score_kl_to_delta(0.0, 1.0), 0.0);
  EXPECT_EQ(score_kl_to_delta(2.0, 1.0), 2.0);
  EXPECT_NEAR(score_kl_to_delta(1.0, 0.5), 1.306853, 1e-6);
  EXPECT_THROW(score_kl_to_delta(0.0, 0.0), std::domain_error);
  EXPECT_THROW(score_kl_to_delta(0.0, -1.0), std::domain_error);
}

TEST(ScoreKLToDelta, ArgminMatchesDensityArgmax) {
  SplitMixRng rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    std::size_t best_score = 0;
    std::size_t best_density = 0;
    double min_score = INFINITY;
    double max_density = -INFINITY;
    for (std::size_t i = 0; i < 50; ++i) {
      const double mu = rng.normal();
      const double sigma = std::exp(rng.uniform(-4.0, 1.0));
      const double s = score_kl_to_delta(mu, sigma);
      const double d = log_density_at_zero(mu, sigma);
      if (s < min_score) min_score = s, best_score = i;
      if (d > max_density) max_density = d, best_density = i;
    }
    EXPECT_EQ(best_score, best_density);
  }
}

TEST(Prune, Examples) {
  const std::vector<double> w{3.0, -0.1, 2.0};
  const PruneStrategy abs{PruneKind::kAbsoluteValue, 0};
  EXPECT_EQ(prune(w, nullptr, abs, 1.0 / 3.0), (std::vector<double>{3.0, 0.0, 2.0}));
  EXPECT_EQ(prune(w, nullptr, abs, 0.0), w);
  EXPECT_EQ(prune(w, nullptr, abs, 1.0), (std::vector<double>{0.0, 0.0, 0.0}));
  const PruneStrategy rnd{PruneKind::kRandomUniform, 9};
  EXPECT_EQ(prune(w, nullptr, rnd, 0.0), w);
  EXPECT_EQ(prune(w, nullptr, rnd, 1.0), (std::vector<double>{0.0, 0.0, 0.0}));
}

TEST(Prune, KLOrderFollowsScore) {
  const std::vector<double> w{0.5, 0.5, 0.5};
  // Scores: log 1 + 0 = 0, log 0.1 + 50 = 47.7, log 2 + 1/8 = 0.818.
  const DiagonalGaussian q{{0.0, 1.0, 1.0}, {0.0, std::log(0.1), std::log(2.0)}};
  const PruneStrategy kl{PruneKind::kKLDivergence, 0};
  EXPECT_EQ(prune_order(w, &q, kl), (std::vector<std::size_t>{0, 2, 1}));
  EXPECT_EQ(prune(w, &q, kl, 2.0 / 3.0), (std::vector<double>{0.0, 0.5, 0.0}));
}

TEST(Prune, Errors) {
  const std::vector<double> w{1.0, 2.0};
  EXPECT_THROW(prune(w, nullptr, {PruneKind::kKLDivergence, 0}, 0.5), std::invalid_argument);
  const DiagonalGaussian q{{0.0}, {0.0}};
  EXPECT_THROW(prune(w, &q, {PruneKind::kKLDivergence, 0}, 0.5), std::invalid_argument);
  EXPECT_THROW(prune(w, nullptr, {}, -0.1), std::invalid_argument);
  EXPECT_THROW(prune(w, nullptr, {}, 1.1), std::invalid_argument);
  EXPECT_THROW(prune(w, nullptr, {}, NAN), std::invalid_argument);
}

TEST(Prune, CountIsFloor) {
  EXPECT_EQ(prune_count(0.5, 7), 3u);
  EXPECT_EQ(prune_count(0.3, 10), 3u);
  EXPECT_EQ(prune_count(0.05 * 7, 20), 7u);
  EXPECT_EQ(prune_count(1.0, 7), 7u);
}

TEST(Prune, PropertiesOnRandomSamples) {
  SplitMixRng rng(3);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 1 + rng.below(60);
    std::vector<double> w(n);
    DiagonalGaussian q{std::vector<double>(n), std::vector<double>(n)};
    for (std::size_t i = 0; i < n; ++i) {
      w[i] = rng.normal();
      q.means[i] = rng.normal();
      q.log_stds[i] = rng.uniform(-3.0, 0.0);
    }
    for (PruneKind kind : {PruneKind::kRandomUniform, PruneKind::kAbsoluteValue, PruneKind::kKLDivergence}) {
      const PruneStrategy s{kind, static_cast<std::uint64_t>(trial)};
      std::set<std::size_t> previous;
      for (double f : default_fractions()) {
        const auto out = prune(w, &q, s, f);
        std::set<std::size_t> zeroed;
        for (std::size_t i = 0; i < n; ++i) {
          if (out[i] != w[i]) {
            EXPECT_EQ(out[i], 0.0);
            zeroed.insert(i);
          }
        }
        EXPECT_EQ(zeroed.size(), prune_count(f, n));
        EXPECT_TRUE(std::includes(zeroed.begin(), zeroed.end(), previous.begin(), previous.end()));
        previous = zeroed;
      }
    }
    // AbsoluteValue ignores the posterior.
    const DiagonalGaussian other{std::vector<double>(n, 5.0), std::vector<double>(n, -1.0)};
    EXPECT_EQ(prune_order(w, &q, {PruneKind::kAbsoluteValue, 0}),
              prune_order(w, &other, {PruneKind::kAbsoluteValue, 0}));
  }
}

TEST(Prune, TiesBrokenByIndex) {
  const std::vector<double> w{1.0, -1.0, 1.0, 0.5};
  EXPECT_EQ(prune_order(w, nullptr, {PruneKind::kAbsoluteValue, 0}),
            (std::vector<std::size_t>{3, 0, 1, 2}));
}

struct SweepFixture {
  SplitDataset data = gen_synthetic(200, 4, 8, 1);
  ModelSpec spec = ModelSpec::mlp({8, 4});
  std::vector<double> w;
  DiagonalGaussian q;

  SweepFixture() {
    // Weight (c, c) = 2 classifies the blobs; biases are zero.
    w.assign(spec.param_count(), 0.0);
    SplitMixRng rng(8);
    for (std::size_t c = 0; c < 4; ++c) w[c * 8 + c] = 2.0;
    for (std::size_t i = 0; i < 32; ++i) {
      if (w[i] == 0.0) w[i] = 0.01 * rng.normal();
    }
    q.means = w;
    q.log_stds.assign(w.size(), -3.0);
  }
};

TEST(PruneSweep, BoundaryFractions) {
  SweepFixture f;
  const std::vector<PruneStrategy> strategies{
      {PruneKind::kRandomUniform, 4}, {PruneKind::kAbsoluteValue, 0}, {PruneKind::kKLDivergence, 0}};
  const auto curves = prune_sweep(f.w, &f.q, strategies, default_fractions(), f.spec, f.data.test);
  ASSERT_EQ(curves.size(), 3u);
  const double full = evaluate(f.spec, f.w, f.data.test).accuracy;
  EXPECT_GE(full, 0.95);
  std::vector<double> zero(f.w.size(), 0.0);
  const double empty = evaluate(f.spec, zero, f.data.test).accuracy;
  EXPECT_NEAR(empty, 0.25, 1e-12);  // argmax tie goes to class 0
  for (const auto& c : curves) {
    ASSERT_EQ(c.points.size(), 21u);
    EXPECT_EQ(c.points.front().accuracy, full);
    EXPECT_EQ(c.points.back().accuracy, empty);
  }
  // The four diagonal weights are the largest, so magnitude pruning keeps
  // the classifier intact until they go.
  EXPECT_GE(curves[1].points[17].accuracy, full - 0.05);
}

TEST(PruneSweep, BiasesAreNeverPruned) {
  SweepFixture f;
  for (std::size_t i = 32; i < 36; ++i) f.w[i] = 1.0 + static_cast<double>(i);
  // With fraction 1 every weight is zero and the largest bias wins everywhere.
  const auto curves = prune_sweep(f.w, nullptr, {{PruneKind::kAbsoluteValue, 0}}, {1.0}, f.spec, f.data.test);
  EXPECT_NEAR(curves[0].points[0].accuracy, 0.25, 1e-12);
  EXPECT_THROW(prune_sweep(f.w, nullptr, {{}}, {0.5, 0.1}, f.spec, f.data.test), std::invalid_argument);
}

TEST(SweepCsv, StrictSchema) {
  SweepFixture f;
  const auto curves = prune_sweep(f.w, &f.q, {{PruneKind::kRandomUniform, 4}, {PruneKind::kKLDivergence, 0}},
                                  default_fractions(), f.spec, f.data.test);
  std::ostringstream out;
  write_sweep_csv(out, curves, {{"seed", "4"}});
  const auto t = testing::parse_csv_strict(out.str());
  EXPECT_EQ(t.header, (std::vector<std::string>{"strategy", "fraction", "accuracy", "seed"}));
  EXPECT_EQ(t.rows.size(), 42u);
  EXPECT_EQ(t.rows[0][0], "random_uniform");
  EXPECT_EQ(t.rows[0][3], "4");
  EXPECT_EQ(t.rows[21][0], "kl_divergence");
  EXPECT_EQ(t.rows[20][1], "1");
  EXPECT_EQ(std::stod(t.rows[5][1]), 0.25);
}

TEST(PruneKindNames, ParseAndPrint) {
  for (PruneKind k : {PruneKind::kRandomUniform, PruneKind::kAbsoluteValue, PruneKind::kKLDivergence}) {
    EXPECT_EQ(parse_prune_kind(to_string(k)), k);
  }
  EXPECT_EQ(parse_prune_kind("kl"), PruneKind::kKLDivergence);
  EXPECT_THROW(parse_prune_kind("largest"), std::invalid_argument);
}

}  // namespace
}  // namespace mrcl
