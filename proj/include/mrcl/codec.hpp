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
#include <exception>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "mrcl/errors.hpp"
#include "mrcl/gaussian.hpp"
#include "mrcl/random.hpp"
#include "mrcl/segment.hpp"

// Minimal random coding. The encoder scores K = 2^bits candidates drawn from
// the coding distribution P with shared randomness and transmits the index of
// one candidate, chosen with probability proportional to dQ/dP. The decoder
// regenerates that single candidate from the same key.

namespace mrcl {

inline constexpr unsigned kMaxBudgetBits = 26;

class BlockSpec {
 public:
  BlockSpec() = default;

  /// ceil(total_dims / block_size) contiguous blocks; only the last may be short.
  static BlockSpec partition(std::size_t total_dims, std::size_t block_size) {
    if (total_dims == 0 || block_size == 0) {
      throw std::invalid_argument("partition_blocks: sizes must be positive");
    }
    BlockSpec spec;
    spec.total_dims_ = total_dims;
    spec.block_size_ = block_size;
    for (std::size_t start = 0; start < total_dims; start += block_size) {
      spec.blocks_.push_back({start, std::min(block_size, total_dims - start)});
    }
    return spec;
  }

  std::size_t total_dims() const { return total_dims_; }
  std::size_t block_size() const { return block_size_; }
  std::size_t count() const { return blocks_.size(); }
  const std::vector<Segment>& blocks() const { return blocks_; }
  const Segment& operator[](std::size_t b) const { return blocks_[b]; }

  /// Block index of every dimension.
  std::vector<std::size_t> block_of_dim() const {
    std::vector<std::size_t> out(total_dims_);
    for (std::size_t b = 0; b < blocks_.size(); ++b) {
      std::fill_n(out.begin() + static_cast<std::ptrdiff_t>(blocks_[b].start), blocks_[b].length, b);
    }
    return out;
  }

 private:
  std::size_t total_dims_ = 0;
  std::size_t block_size_ = 0;
  std::vector<Segment> blocks_;
};

inline BlockSpec partition_blocks(std::size_t total_dims, std::size_t block_size) {
  return BlockSpec::partition(total_dims, block_size);
}

struct StreamKey {
  std::uint64_t global_seed = 0;
  std::uint64_t block_id = 0;
};

struct EncodedBlock {
  std::uint64_t index = 0;
  unsigned budget_bits = 0;

  bool operator==(const EncodedBlock&) const = default;
};

namespace detail {

inline std::uint64_t sample_key(const StreamKey& key, std::uint64_t sample_idx) {
  return hash_combine(hash_combine(key.global_seed, key.block_id), sample_idx);
}

// Standard-normal draw for one (seed, block, sample, dim) coordinate.
inline double candidate_normal(std::uint64_t sample_key, std::uint64_t dim_idx) {
  return keyed_normal(hash_combine(sample_key, dim_idx));
}

}  // namespace detail

/// The `sample_idx`-th candidate of the block stream: nu + rho * n per dim.
inline std::vector<double> candidate_sample(const StreamKey& key, std::uint64_t sample_idx,
                                            const DiagonalGaussian& coding) {
  const std::uint64_t sk = detail::sample_key(key, sample_idx);
  std::vector<double> out(coding.size());
  for (std::size_t d = 0; d < coding.size(); ++d) {
    out[d] = coding.means[d] + std::exp(coding.log_stds[d]) * detail::candidate_normal(sk, d);
  }
  return out;
}

struct EncodeOptions {
  unsigned threads = 1;
  std::uint64_t chunk_size = 1u << 14;
};

namespace detail {

struct ScoredIndex {
  double score = -std::numeric_limits<double>::infinity();
  std::uint64_t index = std::numeric_limits<std::uint64_t>::max();

  // Higher score wins; equal scores go to the lower index.
  bool beats(const ScoredIndex& other) const {
    return score > other.score || (score == other.score && index < other.index);
  }
};

struct BlockScorer {
  const DiagonalGaussian& q;
  const DiagonalGaussian& p;
  StreamKey key;
  std::uint64_t selection_seed;
  std::vector<double> q_inv_std;
  std::vector<double> p_std;
  double log_norm = 0.0;  // sum over dims of log(rho) - log(sigma)

  BlockScorer(const DiagonalGaussian& q_, const DiagonalGaussian& p_, StreamKey key_,
              std::uint64_t selection_seed_)
      : q(q_), p(p_), key(key_), selection_seed(selection_seed_), q_inv_std(q_.size()), p_std(p_.size()) {
    for (std::size_t d = 0; d < q.size(); ++d) {
      q_inv_std[d] = std::exp(-q.log_stds[d]);
      p_std[d] = std::exp(p.log_stds[d]);
      log_norm += p.log_stds[d] - q.log_stds[d];
    }
  }

  // log dQ/dP at candidate k.
  double log_ratio(std::uint64_t k) const {
    const std::uint64_t sk = sample_key(key, k);
    double acc = log_norm;
    for (std::size_t d = 0; d < q.size(); ++d) {
      const double n = candidate_normal(sk, d);
      const double w = p.means[d] + p_std[d] * n;
      const double zq = (w - q.means[d]) * q_inv_std[d];
      acc += 0.5 * (n * n - zq * zq);
    }
    return acc;
  }

  ScoredIndex best_in(std::uint64_t begin, std::uint64_t end) const {
    ScoredIndex best;
    for (std::uint64_t k = begin; k < end; ++k) {
      const double lr = log_ratio(k);
      if (!std::isfinite(lr)) {
        throw NumericError("encode_block: non-finite log importance weight at candidate " +
                           std::to_string(k));
      }
      const ScoredIndex cand{lr + keyed_gumbel(hash_combine(selection_seed, k)), k};
      if (cand.beats(best)) best = cand;
    }
    return best;
  }
};

}  // namespace detail

/// Draws k* from the importance distribution over K = 2^budget_bits
/// candidates with the Gumbel-max trick. The Gumbel perturbation of candidate
/// k depends only on (selection_seed, k), so any chunking of the index range
/// selects the same k*.
inline EncodedBlock encode_block(const DiagonalGaussian& q, const DiagonalGaussian& p,
                                 unsigned budget_bits, const StreamKey& key,
                                 std::uint64_t selection_seed, EncodeOptions options = {}) {
  if (budget_bits < 1 || budget_bits > kMaxBudgetBits) {
    throw std::invalid_argument("encode_block: budget of " + std::to_string(budget_bits) +
                                " bits outside [1, " + std::to_string(kMaxBudgetBits) + "]");
  }
  if (q.size() != p.size() || q.size() == 0) {
    throw std::invalid_argument("encode_block: q and p must have the same nonzero dimension");
  }
  const std::uint64_t k_total = std::uint64_t{1} << budget_bits;
  const detail::BlockScorer scorer(q, p, key, selection_seed);
  const std::uint64_t chunk = std::max<std::uint64_t>(1, options.chunk_size);
  const std::uint64_t n_chunks = (k_total + chunk - 1) / chunk;

  std::vector<detail::ScoredIndex> partial(n_chunks);
  const unsigned threads =
      static_cast<unsigned>(std::min<std::uint64_t>(std::max(1u, options.threads), n_chunks));
  if (threads == 1) {
    for (std::uint64_t c = 0; c < n_chunks; ++c) {
      partial[c] = scorer.best_in(c * chunk, std::min(k_total, (c + 1) * chunk));
    }
  } else {
    std::vector<std::exception_ptr> errors(threads);
    {
      std::vector<std::jthread> pool;
      for (unsigned t = 0; t < threads; ++t) {
        pool.emplace_back([&, t] {
          try {
            for (std::uint64_t c = t; c < n_chunks; c += threads) {
              partial[c] = scorer.best_in(c * chunk, std::min(k_total, (c + 1) * chunk));
            }
          } catch (...) {
            errors[t] = std::current_exception();
          }
        });
      }
    }
    for (const auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }
  detail::ScoredIndex best;
  for (const auto& s : partial) {
    if (s.beats(best)) best = s;
  }
  return {best.index, budget_bits};
}

inline std::vector<double> decode_block(const DiagonalGaussian& p, const EncodedBlock& enc,
                                        const StreamKey& key) {
  if (enc.budget_bits > 63 || enc.index >= (std::uint64_t{1} << enc.budget_bits)) {
    throw std::out_of_range("decode_block: index " + std::to_string(enc.index) +
                            " does not fit in " + std::to_string(enc.budget_bits) + " bits");
  }
  return candidate_sample(key, enc.index, p);
}

/// Concatenates each index as a big-endian budget_bits-wide field, MSB first,
/// zero-padding the final byte.
inline std::vector<std::uint8_t> pack_indices(std::span<const EncodedBlock> blocks) {
  std::size_t total_bits = 0;
  for (const auto& b : blocks) {
    if (b.budget_bits < 1 || b.budget_bits > 64) {
      throw std::invalid_argument("pack_indices: field width must be in [1, 64]");
    }
    if (b.budget_bits < 64 && b.index >> b.budget_bits) {
      throw std::out_of_range("pack_indices: index " + std::to_string(b.index) +
                              " exceeds its " + std::to_string(b.budget_bits) + "-bit field");
    }
    total_bits += b.budget_bits;
  }
  std::vector<std::uint8_t> out((total_bits + 7) / 8, 0);
  std::size_t pos = 0;
  for (const auto& b : blocks) {
    for (unsigned i = b.budget_bits; i-- > 0; ++pos) {
      if ((b.index >> i) & 1u) out[pos / 8] |= static_cast<std::uint8_t>(0x80u >> (pos % 8));
    }
  }
  return out;
}

inline std::vector<EncodedBlock> unpack_indices(std::span<const std::uint8_t> bytes,
                                                std::span<const unsigned> budgets) {
  std::size_t total_bits = 0;
  for (unsigned b : budgets) {
    if (b < 1 || b > 64) throw std::invalid_argument("unpack_indices: field width must be in [1, 64]");
    total_bits += b;
  }
  if (bytes.size() != (total_bits + 7) / 8) {
    throw FormatError("unpack_indices: expected " + std::to_string((total_bits + 7) / 8) +
                      " bytes for " + std::to_string(total_bits) + " bits, got " +
                      std::to_string(bytes.size()));
  }
  std::vector<EncodedBlock> out;
  out.reserve(budgets.size());
  std::size_t pos = 0;
  for (unsigned b : budgets) {
    std::uint64_t v = 0;
    for (unsigned i = 0; i < b; ++i, ++pos) {
      v = (v << 1) | ((bytes[pos / 8] >> (7 - pos % 8)) & 1u);
    }
    out.push_back({v, b});
  }
  return out;
}

}  // namespace mrcl
