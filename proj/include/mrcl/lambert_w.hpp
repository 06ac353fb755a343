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

#include <cmath>
#include <numbers>
#include <optional>
#include <string>

#include "mrcl/errors.hpp"

// Principal branch of the Lambert W function restricted to [-1/e, 0], which
// is the only interval the Mean-KL variance map ever evaluates.

namespace mrcl {

inline constexpr double kInvE = 0.36787944117144233;  // exp(-1)
inline constexpr double kBranchTolerance = 1e-12;

enum class LambertMode {
  kPade,     // raw [3/2] Pade approximant
  kRefined,  // Pade followed by one Halley step
};

namespace detail {

inline double check_w_domain(double x) {
  if (!(x <= 0.0) || x < -kInvE - kBranchTolerance) {
    throw DomainError("lambert_w: argument " + std::to_string(x) + " outside [-1/e, 0]");
  }
  return x < -kInvE ? -kInvE : x;
}

// One Halley update for f(w) = w e^w - x. Returns nullopt on a non-finite step.
inline std::optional<double> halley_step(double x, double w) {
  const double ew = std::exp(w);
  const double f = w * ew - x;
  if (f == 0.0) return w;
  const double wp1 = w + 1.0;
  // Root is a double root at the branch point; the step is undefined there.
  if (std::abs(wp1) <= kBranchTolerance) return w;
  const double denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1);
  const double next = w - f / denom;
  if (!std::isfinite(next)) return std::nullopt;
  return next;
}

}  // namespace detail

/// [3/2] Pade approximant in t = sqrt(2 e x + 2). Exact at the branch point,
/// about 2.7e-4 too large at x = 0.
inline double lambert_w_pade(double x) {
  x = detail::check_w_domain(x);
  const double t = std::sqrt(std::max(0.0, 2.0 * std::numbers::e * x + 2.0));
  const double num = ((13.0 / 720.0 * t + 257.0 / 720.0) * t + 1.0 / 6.0) * t - 1.0;
  const double den = (103.0 / 720.0 * t + 5.0 / 6.0) * t + 1.0;
  return num / den;
}

/// Applies `iterations` Halley updates starting from `w0`.
/// Throws NumericError if an intermediate value is not finite.
inline double lambert_w_refine(double x, double w0, int iterations) {
  x = detail::check_w_domain(x);
  double w = w0;
  for (int i = 0; i < iterations; ++i) {
    const auto next = detail::halley_step(x, w);
    if (!next) throw NumericError("lambert_w_refine: Halley iteration diverged");
    if (*next == w) break;
    w = *next;
  }
  return w;
}

/// Bisection on w e^w = x over [-1, 0], run until the bracket cannot shrink.
/// Slow; intended as an independent reference.
inline double lambert_w_oracle(double x) {
  x = detail::check_w_domain(x);
  double lo = -1.0;
  double hi = 0.0;
  for (int i = 0; i < 2000; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    if (mid * std::exp(mid) < x) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

/// Production evaluation. kRefined falls back to the Pade value if the Halley
/// step misbehaves.
inline double lambert_w(double x, LambertMode mode = LambertMode::kRefined) {
  const double w0 = lambert_w_pade(x);
  if (mode == LambertMode::kPade) return w0;
  const auto w1 = detail::halley_step(detail::check_w_domain(x), w0);
  return w1 ? *w1 : w0;
}

/// dW/dx = W / (x (1 + W)), with the x -> 0 limit of 1.
inline double lambert_w_derivative(double x, double w) {
  if (x == 0.0) return 1.0;
  return w / (x * (1.0 + w));
}

inline std::string to_string(LambertMode mode) {
  return mode == LambertMode::kPade ? "pade" : "refined";
}

}  // namespace mrcl
