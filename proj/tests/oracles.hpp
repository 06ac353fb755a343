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

// Reference computations used only by tests. They deliberately avoid the
// library's own formulas: plain bisection and quadrature, in long double.

#include <cmath>
#include <cstddef>
#include <functional>

namespace mrcl::testing {

/// Root of w e^w = x on [-1, 0] by long double bisection.
inline long double ref_lambert_w(long double x) {
  long double lo = -1.0L;
  long double hi = 0.0L;
  for (int i = 0; i < 200; ++i) {
    const long double mid = 0.5L * (lo + hi);
    if (mid * std::exp(mid) < x) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5L * (lo + hi);
}

/// log(sigma / rho) for the Gaussian with standardized mean offset z whose KL
/// from N(0, 1) equals kappa: solves s - ln s = 2 kappa + 1 - z^2 for
/// s = sigma^2 / rho^2 in (0, 1], by bisection on u = ln s.
inline long double ref_log_std_ratio(long double z, long double kappa) {
  const long double c = 2.0L * kappa + 1.0L - z * z;
  // e^u - u is decreasing on u < 0, equals 1 at u = 0 and exceeds c at u = -c.
  long double lo = -c;
  long double hi = 0.0L;
  for (int i = 0; i < 300; ++i) {
    const long double mid = 0.5L * (lo + hi);
    if (std::exp(mid) - mid > c) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.25L * (lo + hi);  // half of u
}

/// Composite Simpson rule on [a, b] with n (even) panels.
inline long double simpson(const std::function<long double(long double)>& f, long double a,
                           long double b, std::size_t n) {
  const long double h = (b - a) / static_cast<long double>(n);
  long double acc = f(a) + f(b);
  for (std::size_t i = 1; i < n; ++i) {
    acc += f(a + h * static_cast<long double>(i)) * (i % 2 ? 4.0L : 2.0L);
  }
  return acc * h / 3.0L;
}

inline long double normal_pdf(long double x, long double mean, long double sd) {
  const long double z = (x - mean) / sd;
  return std::exp(-0.5L * z * z) / (sd * std::sqrt(2.0L * 3.14159265358979323846L));
}

/// KL(N(mq, sq^2) || N(mp, sp^2)) by quadrature over [lo, hi].
inline long double quad_kl(long double mq, long double sq, long double mp, long double sp,
                           long double lo = -8.0L, long double hi = 8.0L) {
  return simpson(
      [&](long double x) {
        const long double q = normal_pdf(x, mq, sq);
        if (q == 0.0L) return 0.0L;
        return q * (std::log(q) - std::log(normal_pdf(x, mp, sp)));
      },
      lo, hi, 20000);
}

/// Kolmogorov distribution tail P(K > t), for the KS test.
inline double kolmogorov_tail(double t) {
  if (t <= 0.0) return 1.0;
  double acc = 0.0;
  for (int k = 1; k < 200; ++k) {
    const double term = std::exp(-2.0 * k * k * t * t);
    acc += (k % 2 ? 1.0 : -1.0) * term;
    if (term < 1e-18) break;
  }
  return std::min(1.0, 2.0 * acc);
}

inline double normal_cdf(double x, double mean, double sd) {
  return 0.5 * std::erfc(-(x - mean) / (sd * std::sqrt(2.0)));
}

}  // namespace mrcl::testing
