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

// Prints the Pade approximation of the principal Lambert W branch next to the
// Halley-refined value and the bisection reference on a few points of
// [-1/e, 0].

#include <cmath>
#include <cstdio>

#include "mrcl/lambert_w.hpp"

int main() {
  std::printf("%12s %16s %16s %16s %12s\n", "x", "pade", "refined", "reference", "residual");
  for (double x : {-mrcl::kInvE, -0.3, -0.2, -0.1, -0.01, -1e-4, 0.0}) {
    const double pade = mrcl::lambert_w_pade(x);
    const double refined = mrcl::lambert_w(x);
    const double ref = mrcl::lambert_w_oracle(x);
    std::printf("%12.6f %16.10f %16.10f %16.10f %12.3e\n", x, pade, refined, ref,
                std::abs(refined * std::exp(refined) - x));
  }
  return 0;
}
