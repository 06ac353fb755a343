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
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mrcl/dataset.hpp"
#include "mrcl/gaussian.hpp"
#include "mrcl/mlp.hpp"
#include "mrcl/pipeline.hpp"
#include "mrcl/random.hpp"

// Zero-pruning of a compressed weight sample and accuracy-vs-fraction sweeps.

namespace mrcl {

enum class PruneKind { kRandomUniform, kAbsoluteValue, kKLDivergence };

inline std::string to_string(PruneKind k) {
  switch (k) {
    case PruneKind::kRandomUniform:
      return "random_uniform";
    case PruneKind::kAbsoluteValue:
      return "absolute_value";
    case PruneKind::kKLDivergence:
      return "kl_divergence";
  }
  return "unknown";
}

inline PruneKind parse_prune_kind(const std::string& s) {
  if (s == "random_uniform" || s == "random") return PruneKind::kRandomUniform;
  if (s == "absolute_value" || s == "magnitude") return PruneKind::kAbsoluteValue;
  if (s == "kl_divergence" || s == "kl") return PruneKind::kKLDivergence;
  throw std::invalid_argument("unknown pruning strategy '" + s + "'");
}

struct PruneStrategy {
  PruneKind kind = PruneKind::kAbsoluteValue;
  std::uint64_t seed = 0;  // RandomUniform only
};

/// log sigma + mu^2 / (2 sigma^2): KL(delta_0 || N(mu, sigma^2)) up to a
/// constant. Lower scores are pruned first.
inline double score_kl_to_delta(double mu, double sigma) {
  if (!(sigma > 0.0)) throw std::domain_error("score_kl_to_delta: sigma must be positive");
  return std::log(sigma) + mu * mu / (2.0 * sigma * sigma);
}

/// Order in which coordinates are zeroed. Ties are broken by index, so the
/// pruned sets for increasing fractions are nested.
inline std::vector<std::size_t> prune_order(std::span<const double> sample,
                                            const DiagonalGaussian* posterior,
                                            const PruneStrategy& strategy) {
  const std::size_t n = sample.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  switch (strategy.kind) {
    case PruneKind::kRandomUniform: {
      SplitMixRng rng(hash_combine(strategy.seed, 0x9A0E));
      rng.shuffle(order);
      break;
    }
    case PruneKind::kAbsoluteValue:
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return std::abs(sample[a]) < std::abs(sample[b]);
      });
      break;
    case PruneKind::kKLDivergence: {
      if (!posterior) throw std::invalid_argument("prune: KL-divergence pruning needs a posterior");
      if (posterior->size() != n) throw std::invalid_argument("prune: posterior dimension mismatch");
      std::vector<double> score(n);
      for (std::size_t i = 0; i < n; ++i) {
        score[i] = score_kl_to_delta(posterior->means[i], std::exp(posterior->log_stds[i]));
      }
      std::stable_sort(order.begin(), order.end(),
                       [&](std::size_t a, std::size_t b) { return score[a] < score[b]; });
      break;
    }
  }
  return order;
}

/// floor(fraction * n), guarded against representation error in fraction.
inline std::size_t prune_count(double fraction, std::size_t n) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) {
    throw std::invalid_argument("prune: fraction " + std::to_string(fraction) + " outside [0, 1]");
  }
  return std::min(n, static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n) + 1e-9)));
}

/// Copy of `sample` with floor(fraction * n) coordinates set to zero.
inline std::vector<double> prune(std::span<const double> sample, const DiagonalGaussian* posterior,
                                 const PruneStrategy& strategy, double fraction) {
  const std::size_t count = prune_count(fraction, sample.size());
  const auto order = prune_order(sample, posterior, strategy);
  std::vector<double> out(sample.begin(), sample.end());
  for (std::size_t i = 0; i < count; ++i) out[order[i]] = 0.0;
  return out;
}

struct PrunePoint {
  double fraction = 0.0;
  double accuracy = 0.0;
};

struct PruneCurve {
  PruneStrategy strategy;
  std::vector<PrunePoint> points;
};

/// 0.00, 0.05, ..., 1.00.
inline std::vector<double> default_fractions() {
  std::vector<double> f;
  for (int i = 0; i <= 20; ++i) f.push_back(i / 20.0);
  return f;
}

/// Prunes only weight-matrix entries of `sample` (biases are kept) and
/// evaluates the network at every fraction.
inline std::vector<PruneCurve> prune_sweep(std::span<const double> sample,
                                           const DiagonalGaussian* posterior,
                                           const std::vector<PruneStrategy>& strategies,
                                           const std::vector<double>& fractions,
                                           const ModelSpec& spec, const Dataset& data) {
  if (sample.size() != spec.param_count()) throw std::invalid_argument("prune_sweep: sample size mismatch");
  if (!std::is_sorted(fractions.begin(), fractions.end())) {
    throw std::invalid_argument("prune_sweep: fractions must be sorted");
  }
  const auto mask = spec.weight_mask();
  std::vector<std::size_t> prunable;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i]) prunable.push_back(i);
  }
  std::vector<double> sub(prunable.size());
  DiagonalGaussian sub_post;
  for (std::size_t j = 0; j < prunable.size(); ++j) {
    sub[j] = sample[prunable[j]];
    if (posterior) {
      sub_post.means.push_back(posterior->means.at(prunable[j]));
      sub_post.log_stds.push_back(posterior->log_stds.at(prunable[j]));
    }
  }

  std::vector<PruneCurve> curves;
  for (const PruneStrategy& s : strategies) {
    const auto order = prune_order(sub, posterior ? &sub_post : nullptr, s);
    PruneCurve curve{s, {}};
    std::vector<double> w(sample.begin(), sample.end());
    std::size_t done = 0;
    for (double f : fractions) {
      const std::size_t count = prune_count(f, sub.size());
      for (; done < count; ++done) w[prunable[order[done]]] = 0.0;
      curve.points.push_back({f, evaluate(spec, w, data).accuracy});
    }
    curves.push_back(std::move(curve));
  }
  return curves;
}

}  // namespace mrcl
