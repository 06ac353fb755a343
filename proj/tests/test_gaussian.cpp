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
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "mrcl/gaussian.hpp"
#include "oracles.hpp"

namespace mrcl {
namespace {

using testing::quad_kl;
using testing::ref_log_std_ratio;

const Gaussian1D kStd{0.0, 0.0};

TEST(GaussKL, IdenticalIsZero) { EXPECT_EQ(gauss_kl(kStd, kStd), 0.0); }

TEST(GaussKL, MeanShiftOnly) { EXPECT_DOUBLE_EQ(gauss_kl({1.0, 0.0}, kStd), 0.5); }

TEST(GaussKL, NarrowerVarianceMatchesQuadrature) {
  const Gaussian1D q = Gaussian1D::from_variance(0.0, 0.25);
  const double ref = static_cast<double>(quad_kl(0.0L, 0.5L, 0.0L, 1.0L));
  EXPECT_NEAR(ref, 0.318147, 1e-6);
  EXPECT_NEAR(gauss_kl(q, kStd), ref, 1e-9);
}

TEST(GaussKL, RandomPairsMatchQuadratureAndAreNonNegative) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> mean(-1.0, 1.0), log_std(-1.0, 0.5);
  for (int i = 0; i < 50; ++i) {
    const Gaussian1D q{mean(rng), log_std(rng)};
    const Gaussian1D p{mean(rng), log_std(rng)};
    const double kl = gauss_kl(q, p);
    EXPECT_GE(kl, 0.0);
    EXPECT_NEAR(kl, static_cast<double>(quad_kl(q.mean, q.stddev(), p.mean, p.stddev(), -20.0L, 20.0L)),
                1e-7);
    EXPECT_GT(gauss_kl(q, p), 0.0);
    EXPECT_EQ(gauss_kl(q, q), 0.0);
  }
}

TEST(BlockKL, Additive) {
  const DiagonalGaussian q{{1.0, 0.0}, {0.0, 0.5 * std::log(0.25)}};
  const DiagonalGaussian p{{0.0, 0.0}, {0.0, 0.0}};
  EXPECT_NEAR(block_kl(q, p), 0.818147, 1e-6);
  EXPECT_EQ(block_kl(p, p), 0.0);
}

TEST(BlockKL, DimensionMismatchThrows) {
  EXPECT_THROW(block_kl(DiagonalGaussian{{0.0}, {0.0}}, DiagonalGaussian{{0.0, 0.0}, {0.0, 0.0}}),
               std::invalid_argument);
}

TEST(Quotas, Examples) {
  const auto two = quotas_from_logits(std::vector<double>{0.0, 0.0});
  EXPECT_DOUBLE_EQ(two[0], 0.5);
  EXPECT_DOUBLE_EQ(two[1], 0.5);
  for (double c : {-700.0, 0.0, 3.5, 900.0}) {
    for (double v : quotas_from_logits(std::vector<double>(4, c))) EXPECT_DOUBLE_EQ(v, 0.25);
  }
  const auto uneven = quotas_from_logits(std::vector<double>{std::log(3.0), 0.0});
  EXPECT_NEAR(uneven[0], 0.75, 1e-15);
  EXPECT_NEAR(uneven[1], 0.25, 1e-15);
  EXPECT_THROW(quotas_from_logits(std::vector<double>{}), std::invalid_argument);
}

TEST(Quotas, SimplexAndShiftInvariance) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0.0, 3.0);
  for (int t = 0; t < 100; ++t) {
    std::vector<double> g(1 + t % 40);
    for (double& v : g) v = n(rng);
    const auto q = quotas_from_logits(g);
    EXPECT_NEAR(std::accumulate(q.begin(), q.end(), 0.0), 1.0, 1e-12);
    for (double v : q) EXPECT_GT(v, 0.0);
    std::vector<double> shifted(g);
    for (double& v : shifted) v += 17.25;
    const auto qs = quotas_from_logits(shifted);
    for (std::size_t i = 0; i < q.size(); ++i) EXPECT_NEAR(q[i], qs[i], 1e-14);
  }
}

TEST(MeanFromTau, Examples) {
  EXPECT_EQ(mean_from_tau(0.0, 3.0, {1.5, -2.0}), 1.5);
  EXPECT_NEAR(mean_from_tau(0.549306, 0.5, kStd), 0.5, 1e-6);
  // tanh(50) rounds to exactly 1 in double; the mean can only reach the
  // boundary, never exceed it.
  EXPECT_LE(mean_from_tau(50.0, 0.5, kStd), 1.0);
  EXPECT_LT(mean_from_tau(15.0, 0.5, kStd), 1.0);
}

TEST(TauFromMean, Examples) {
  EXPECT_EQ(tau_from_mean(0.7, 0.3, {0.7, 0.1}), 0.0);
  EXPECT_NEAR(tau_from_mean(0.5, 0.5, kStd), 0.549306, 1e-6);
  const double clamped = tau_from_mean(10.0, 0.5, kStd);
  EXPECT_NEAR(clamped, std::atanh(1.0 - 1e-6), 1e-12);
  EXPECT_NEAR(clamped, 7.254, 1e-3);
  EXPECT_NEAR(mean_from_tau(clamped, 0.5, kStd), 1.0 - 1e-6, 1e-12);
  EXPECT_NEAR(tau_from_mean(-10.0, 0.5, kStd), -clamped, 1e-12);
}

TEST(TauFromMean, RoundTrip) {
  const Gaussian1D p{0.3, -1.2};
  for (double tau = -5.0; tau <= 5.0; tau += 0.125) {
    EXPECT_NEAR(tau_from_mean(mean_from_tau(tau, 0.8, p), 0.8, p), tau, 1e-9) << tau;
  }
}

TEST(VarFromMeanKL, CentredHalfNat) {
  const double ref = std::exp(2.0 * static_cast<double>(ref_log_std_ratio(0.0L, 0.5L)));
  EXPECT_NEAR(ref, 0.1586, 1e-4);
  const double var = var_from_mean_kl(0.0, 0.5, kStd);
  EXPECT_NEAR(var, ref, 1e-12);
  EXPECT_NEAR(gauss_kl(Gaussian1D::from_variance(0.0, var), kStd), 0.5, 1e-6);
}

TEST(VarFromMeanKL, LargeBudgetIsTinyButPositive) {
  const double log_std = log_std_from_mean_kl(0.0, 20.0, kStd);
  const double ref = static_cast<double>(ref_log_std_ratio(0.0L, 20.0L));
  EXPECT_NEAR(log_std, ref, 1e-9);
  EXPECT_NEAR(2.0 * log_std, -41.0, 1e-6);  // sigma^2 ~ e^-41
  EXPECT_GT(var_from_mean_kl(0.0, 20.0, kStd), 0.0);
  EXPECT_NEAR(gauss_kl({0.0, log_std}, kStd), 20.0, 1e-9);
}

TEST(VarFromMeanKL, TinyBudgetApproachesCoding) {
  const Gaussian1D p{0.0, 0.4};
  const double var = var_from_mean_kl(0.0, 1e-9, p);
  EXPECT_NEAR(var, p.variance(), 1e-3 * p.variance());
  EXPECT_LE(var, p.variance());
}

TEST(VarFromMeanKL, MatchesOracleAcrossOffsets) {
  const Gaussian1D p{0.2, -1.5};
  for (double kappa : {0.01, 0.3, 0.693, 2.0, 9.0}) {
    for (double frac : {0.0, 0.3, 0.7, 0.95, -0.5}) {
      const double mu = p.mean + frac * p.stddev() * std::sqrt(2.0 * kappa);
      const double z = (mu - p.mean) / p.stddev();
      const double log_std = log_std_from_mean_kl(mu, kappa, p);
      EXPECT_NEAR(log_std - p.log_std, static_cast<double>(ref_log_std_ratio(z, kappa)), 1e-9);
      EXPECT_LT(log_std, p.log_std + 1e-15);
      EXPECT_NEAR(gauss_kl({mu, log_std}, p), kappa, 1e-9 * std::max(1.0, kappa));
    }
  }
}

TEST(VarFromMeanKL, ConstraintViolationThrows) {
  EXPECT_THROW(var_from_mean_kl(1.5, 0.5, kStd), ConstraintError);
  EXPECT_THROW(var_from_mean_kl(0.0, 0.0, kStd), ConstraintError);
  EXPECT_THROW(var_from_mean_kl(0.0, -1.0, kStd), ConstraintError);
}

TEST(MeanKLToMeanVar, SingleWeight) {
  const auto mv = meankl_to_meanvar({{0.0}, {0.0}, 0.5}, DiagonalGaussian{{0.0}, {0.0}});
  ASSERT_EQ(mv.means.size(), 1u);
  EXPECT_EQ(mv.means[0], 0.0);
  EXPECT_NEAR(mv.variances()[0], 0.1586, 1e-4);
}

TEST(MeanKLToMeanVar, SymmetricPairAndShiftInvariance) {
  const DiagonalGaussian p{{0.0, 0.0}, {0.0, 0.0}};
  const auto mv = meankl_to_meanvar({{0.0, 0.0}, {0.0, 0.0}, 1.0}, p);
  EXPECT_EQ(mv.means[0], mv.means[1]);
  EXPECT_EQ(mv.log_stds[0], mv.log_stds[1]);
  EXPECT_EQ(mv.log_stds[0], meankl_to_meanvar({{0.0}, {0.0}, 0.5}, DiagonalGaussian{{0.0}, {0.0}}).log_stds[0]);

  const DiagonalGaussian p3{{0.1, -0.2, 0.0}, {-1.0, -2.0, 0.5}};
  const auto a = meankl_to_meanvar({{0.3, -1.0, 2.0}, {0.5, -0.25, 1.0}, 4.0}, p3);
  const auto b = meankl_to_meanvar({{0.3, -1.0, 2.0}, {5.5, 4.75, 6.0}, 4.0}, p3);
  for (int i = 0; i < 3; ++i) {
    EXPECT_NEAR(a.means[i], b.means[i], 1e-14);
    EXPECT_NEAR(a.log_stds[i], b.log_stds[i], 1e-12);
  }
}

TEST(MeanKLToMeanVar, TwentyBitBlockMeetsBudget) {
  const double kappa = bits_to_nats(20);
  EXPECT_NEAR(kappa, 13.8629, 1e-4);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 1.5);
  std::vector<double> tau(20), g(20);
  for (double& v : tau) v = n(rng);
  for (double& v : g) v = n(rng);
  const DiagonalGaussian p{std::vector<double>(20, 0.0), std::vector<double>(20, -2.0)};
  for (LambertMode mode : {LambertMode::kPade, LambertMode::kRefined}) {
    const auto mv = meankl_to_meanvar({tau, g, kappa}, p, mode);
    EXPECT_NEAR(block_kl({mv.means, mv.log_stds}, p), kappa, 1e-3);
  }
}

TEST(MeanKLToMeanVar, PadeErrorPerWeightIsBounded) {
  // Without refinement each weight's KL is off by at most about half the
  // Pade error at the origin.
  const Gaussian1D p{0.0, -1.0};
  double worst = 0.0;
  for (double kappa = 0.01; kappa < 30.0; kappa *= 1.3) {
    for (double frac : {0.0, 0.5, 0.9, 0.999}) {
      const double mu = frac * p.stddev() * std::sqrt(2.0 * kappa);
      const double kl = gauss_kl({mu, log_std_from_mean_kl(mu, kappa, p, LambertMode::kPade)}, p);
      worst = std::max(worst, std::abs(kl - kappa));
    }
  }
  EXPECT_LE(worst, 1.5e-4);
}

TEST(MeanKLToMeanVar, ErrorNamesOffendingWeight) {
  // A quota that underflows to zero leaves weight 1 without budget.
  const DiagonalGaussian p{{0.0, 0.0}, {0.0, 0.0}};
  try {
    meankl_to_meanvar({{0.0, 0.0}, {0.0, -800.0}, 1.0}, p);
    FAIL() << "expected ConstraintError";
  } catch (const ConstraintError& e) {
    EXPECT_EQ(e.index(), 1u);
    EXPECT_NE(std::string(e.what()).find("weight 1"), std::string::npos);
  }
  EXPECT_THROW(meankl_to_meanvar({{0.0, 0.0}, {0.0, 0.0}, 0.0}, p), std::invalid_argument);
  EXPECT_THROW(meankl_to_meanvar({{0.0}, {0.0, 1.0}, 1.0}, p), std::invalid_argument);
}

TEST(MeanKLToMeanVar, SigmaBelowRho) {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> n(0.0, 2.0);
  const DiagonalGaussian p{std::vector<double>(10, 0.4), std::vector<double>(10, -0.7)};
  for (int t = 0; t < 200; ++t) {
    std::vector<double> tau(10), g(10);
    for (double& v : tau) v = n(rng);
    for (double& v : g) v = n(rng);
    const auto mv = meankl_to_meanvar({tau, g, 7.0}, p);
    for (int i = 0; i < 10; ++i) {
      EXPECT_LE(mv.log_stds[i], p.log_stds[i]);
      EXPECT_LE(std::abs(mv.means[i] - p.means[i]),
                std::exp(p.log_stds[i]) * std::sqrt(2.0 * 7.0));
    }
  }
}

TEST(Units, BitsNatsRoundTrip) {
  EXPECT_DOUBLE_EQ(bits_to_nats(1.0), std::log(2.0));
  EXPECT_DOUBLE_EQ(nats_to_bits(bits_to_nats(20.0)), 20.0);
}

}  // namespace
}  // namespace mrcl
