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
#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mrcl {

// Bias-corrected Adam over named flat parameter vectors. Frozen coordinates
// are skipped entirely: neither the value nor its moment estimates move.
class Adam {
 public:
  struct Options {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
  };

  Adam() = default;
  explicit Adam(Options options) : options_(options) {}

  const Options& options() const { return options_; }

  void step(const std::string& name, std::span<double> params, std::span<const double> grads,
            std::span<const std::uint8_t> frozen = {}) {
    if (grads.size() != params.size() || (!frozen.empty() && frozen.size() != params.size())) {
      throw std::invalid_argument("Adam::step: size mismatch for '" + name + "'");
    }
    State& s = states_[name];
    if (s.m.size() != params.size()) {
      s.m.assign(params.size(), 0.0);
      s.v.assign(params.size(), 0.0);
      s.t = 0;
    }
    ++s.t;
    const double c1 = 1.0 - std::pow(options_.beta1, static_cast<double>(s.t));
    const double c2 = 1.0 - std::pow(options_.beta2, static_cast<double>(s.t));
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (!frozen.empty() && frozen[i]) continue;
      s.m[i] = options_.beta1 * s.m[i] + (1.0 - options_.beta1) * grads[i];
      s.v[i] = options_.beta2 * s.v[i] + (1.0 - options_.beta2) * grads[i] * grads[i];
      const double m_hat = s.m[i] / c1;
      const double v_hat = s.v[i] / c2;
      params[i] -= options_.learning_rate * m_hat / (std::sqrt(v_hat) + options_.epsilon);
    }
  }

  void reset() { states_.clear(); }

 private:
  struct State {
    std::vector<double> m;
    std::vector<double> v;
    std::uint64_t t = 0;
  };

  Options options_;
  std::map<std::string, State> states_;
};

}  // namespace mrcl
