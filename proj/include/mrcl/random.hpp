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
#include <numbers>

// Counter-based randomness. Every value is a pure function of its key so that
// encoder and decoder (or two runs with the same seed) see identical streams
// without sharing generator state.

namespace mrcl {

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += kGolden;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t hash_combine(std::uint64_t seed, std::uint64_t value) noexcept {
  return mix64(seed ^ mix64(value + 0x632BE59BD9B4E019ULL));
}

// 53-bit uniform in (0, 1].
constexpr double uniform_open_closed(std::uint64_t bits) noexcept {
  return static_cast<double>((bits >> 11) + 1) * 0x1.0p-53;
}

// 53-bit uniform in [0, 1).
constexpr double uniform_closed_open(std::uint64_t bits) noexcept {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

// 53-bit uniform in (0, 1), never hitting either endpoint.
constexpr double uniform_open(std::uint64_t bits) noexcept {
  return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

// Box-Muller, cosine branch only.
inline double normal_from_bits(std::uint64_t radius_bits, std::uint64_t angle_bits) noexcept {
  const double u1 = uniform_open_closed(radius_bits);
  const double u2 = uniform_closed_open(angle_bits);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

// Standard normal keyed by a 64-bit counter value.
inline double keyed_normal(std::uint64_t key) noexcept {
  const std::uint64_t base = mix64(key);
  return normal_from_bits(mix64(base ^ 0xA0761D6478BD642FULL), mix64(base ^ 0xE7037ED1A0B428DBULL));
}

// Gumbel(0, 1) keyed by a 64-bit counter value.
inline double keyed_gumbel(std::uint64_t key) noexcept {
  return -std::log(-std::log(uniform_open(mix64(key))));
}

// Sequential generator for shuffles and initialisation. Portable across
// standard libraries, unlike std::*_distribution.
class SplitMixRng {
 public:
  explicit SplitMixRng(std::uint64_t seed) noexcept : state_(seed) {}

  std::uint64_t next_u64() noexcept {
    state_ += kGolden;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  double uniform() noexcept { return uniform_closed_open(next_u64()); }

  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

  double normal() noexcept {
    const std::uint64_t a = next_u64();
    return normal_from_bits(a, next_u64());
  }

  // Uniform integer in [0, n).
  std::size_t below(std::size_t n) noexcept {
    const auto product = static_cast<unsigned __int128>(next_u64()) * n;
    return static_cast<std::size_t>(product >> 64);
  }

  template <typename Container>
  void shuffle(Container& items) noexcept {
    for (std::size_t i = items.size(); i > 1; --i) {
      const std::size_t j = below(i);
      using std::swap;
      swap(items[i - 1], items[j]);
    }
  }

 private:
  std::uint64_t state_;
};

}  // namespace mrcl
