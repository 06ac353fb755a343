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

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mrcl/errors.hpp"
#include "mrcl/lambert_w.hpp"

// Gaussian KL divergence and the two variational parameterisations.
// All information quantities are in nats.

namespace mrcl {

inline constexpr double kNatsPerBit = std::numbers::ln2;

inline double bits_to_nats(double bits) { return bits * kNatsPerBit; }
inline double nats_to_bits(double nats) { return nats / kNatsPerBit; }

struct Gaussian1D {
  double mean = 0.0;
  double log_std = 0.0;

  static Gaussian1D from_variance(double mean, double variance) {
    return {mean, 0.5 * std::log(variance)};
  }

  double stddev() const { return std::exp(log_std); }
  double variance() const { return std::exp(2.0 * log_std); }

  double log_density(double w) const {
    const double z = (w - mean) / stddev();
    return -log_std - 0.5 * z * z - 0.5 * std::log(2.0 * std::numbers::pi);
  }
};

struct DiagonalGaussian {
  std::vector<double> means;
  std::vector<double> log_stds;

  DiagonalGaussian() = default;
  DiagonalGaussian(std::vector<double> m, std::vector<double> s)
      : means(std::move(m)), log_stds(std::move(s)) {
    if (means.size() != log_stds.size()) {
      throw std::invalid_argument("DiagonalGaussian: means and log_stds differ in length");
    }
  }

  std::size_t size() const { return means.size(); }
  Gaussian1D operator[](std::size_t i) const { return {means[i], log_stds[i]}; }

  DiagonalGaussian slice(std::size_t start, std::size_t length) const {
    const auto first = static_cast<std::ptrdiff_t>(start);
    const auto last = static_cast<std::ptrdiff_t>(start + length);
    return {{means.begin() + first, means.begin() + last},
            {log_stds.begin() + first, log_stds.begin() + last}};
  }
};

struct MeanKLBlockParams {
  std::vector<double> taus;
  std::vector<double> quota_logits;
  double kappa_block = 0.0;  // nats
};

struct MeanVarBlockParams {
  std::vector<double> means;
  std::vector<double> log_stds;

  std::vector<double> variances() const {
    std::vector<double> out(log_stds.size());
    std::transform(log_stds.begin(), log_stds.end(), out.begin(),
                   [](double s) { return std::exp(2.0 * s); });
    return out;
  }
};

/// KL(q || p) for univariate Gaussians. Written as
/// 0.5 (expm1(2d) - 2d) + 0.5 z^2 with d = log(sigma / rho), z = (mu - nu) / rho,
/// which stays non-negative under rounding.
inline double gauss_kl(const Gaussian1D& q, const Gaussian1D& p) {
  const double d = q.log_std - p.log_std;
  const double z = (q.mean - p.mean) / p.stddev();
  return 0.5 * (std::expm1(2.0 * d) - 2.0 * d) + 0.5 * z * z;
}

inline double block_kl(const DiagonalGaussian& q, const DiagonalGaussian& p) {
  if (q.size() != p.size()) {
    throw std::invalid_argument("block_kl: dimension mismatch (" + std::to_string(q.size()) +
                                " vs " + std::to_string(p.size()) + ")");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) total += gauss_kl(q[i], p[i]);
  return total;
}

/// Max-shifted softmax.
inline std::vector<double> quotas_from_logits(std::span<const double> logits) {
  if (logits.empty()) throw std::invalid_argument("quotas_from_logits: empty logit vector");
  const double peak = *std::max_element(logits.begin(), logits.end());
  std::vector<double> out(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - peak);
    total += out[i];
  }
  for (double& v : out) v /= total;
  return out;
}

/// mu = nu + rho sqrt(2 kappa_w) tanh(tau). Always strictly inside the
/// feasible interval |mu - nu| < rho sqrt(2 kappa_w).
inline double mean_from_tau(double tau, double kappa_w, const Gaussian1D& p) {
  return p.mean + p.stddev() * std::sqrt(2.0 * kappa_w) * std::tanh(tau);
}

inline constexpr double kTauClamp = 1e-6;

/// Inverse of mean_from_tau. Means outside the feasible interval are
/// projected to 1 - kTauClamp of its radius first.
inline double tau_from_mean(double mu, double kappa_w, const Gaussian1D& p) {
  const double ratio = (mu - p.mean) / (p.stddev() * std::sqrt(2.0 * kappa_w));
  return std::atanh(std::clamp(ratio, -1.0 + kTauClamp, 1.0 - kTauClamp));
}

/// Log standard deviation of the Gaussian with mean `mu` at KL `kappa_w` from p.
///
/// With a = z^2 - 2 kappa - 1 the variance is -rho^2 W(-e^a). Since
/// W(x) = x e^{-W(x)}, this equals rho^2 exp(a - W(-e^a)), so
/// log sigma = log rho + (a - W) / 2. The log form keeps full relative
/// precision when W is tiny (large kappa) where -rho^2 W would not.
inline double log_std_from_mean_kl(double mu, double kappa_w, const Gaussian1D& p,
                                   LambertMode mode = LambertMode::kRefined) {
  if (!(kappa_w > 0.0)) {
    throw ConstraintError("mean-KL: information budget must be positive, got " +
                          std::to_string(kappa_w));
  }
  const double z = (mu - p.mean) / p.stddev();
  double a = z * z - 2.0 * kappa_w - 1.0;
  // a == -1 is the saturated limit (tanh(tau) rounds to +-1): sigma = rho.
  if (!(a <= -1.0 + kBranchTolerance)) {
    throw ConstraintError("mean-KL: |mu - nu| = " + std::to_string(std::abs(mu - p.mean)) +
                          " is not below rho sqrt(2 kappa) = " +
                          std::to_string(p.stddev() * std::sqrt(2.0 * kappa_w)));
  }
  a = std::min(a, -1.0);
  const double w = lambert_w(-std::exp(a), mode);
  return p.log_std + 0.5 * (a - w);
}

inline double var_from_mean_kl(double mu, double kappa_w, const Gaussian1D& p,
                               LambertMode mode = LambertMode::kRefined) {
  return std::exp(2.0 * log_std_from_mean_kl(mu, kappa_w, p, mode));
}

/// Converts one Mean-KL block into mean / log-std form.
inline MeanVarBlockParams meankl_to_meanvar(const MeanKLBlockParams& params,
                                            const DiagonalGaussian& coding,
                                            LambertMode mode = LambertMode::kRefined) {
  const std::size_t n = params.taus.size();
  if (params.quota_logits.size() != n || coding.size() != n) {
    throw std::invalid_argument("meankl_to_meanvar: dimension mismatch");
  }
  if (!(params.kappa_block > 0.0)) {
    throw std::invalid_argument("meankl_to_meanvar: kappa_block must be positive");
  }
  const auto quotas = quotas_from_logits(params.quota_logits);
  MeanVarBlockParams out{std::vector<double>(n), std::vector<double>(n)};
  for (std::size_t i = 0; i < n; ++i) {
    const double kappa_w = quotas[i] * params.kappa_block;
    out.means[i] = mean_from_tau(params.taus[i], kappa_w, coding[i]);
    try {
      out.log_stds[i] = log_std_from_mean_kl(out.means[i], kappa_w, coding[i], mode);
    } catch (const ConstraintError& e) {
      throw ConstraintError("weight " + std::to_string(i) + ": " + e.what(), i);
    }
  }
  return out;
}

}  // namespace mrcl
