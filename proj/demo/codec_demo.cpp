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

// Encodes one 4-dimensional Gaussian block with minimal random coding, packs
// the index and decodes it again from the shared seed.

#include <cmath>
#include <cstdio>
#include <vector>

#include "mrcl/codec.hpp"

int main() {
  const mrcl::DiagonalGaussian p{{0.0, 0.0, 0.0, 0.0}, {0.0, 0.0, 0.0, 0.0}};
  const mrcl::DiagonalGaussian q{{0.8, -0.4, 0.1, 1.2}, {-1.0, -0.7, -0.3, -1.2}};
  const double kl = mrcl::block_kl(q, p);
  const unsigned bits = 12;
  const mrcl::StreamKey key{2026, 0};
  const auto enc = mrcl::encode_block(q, p, bits, key, 99);
  const std::vector<mrcl::EncodedBlock> blocks{enc};
  const auto packed = mrcl::pack_indices(blocks);
  const std::vector<unsigned> widths{bits};
  const auto unpacked = mrcl::unpack_indices(packed, widths);
  const auto w = mrcl::decode_block(p, unpacked[0], key);

  std::printf("KL(q||p) = %.3f nats = %.3f bits, budget %u bits\n", kl, mrcl::nats_to_bits(kl), bits);
  std::printf("index %llu packed into %zu bytes\n", static_cast<unsigned long long>(enc.index), packed.size());
  std::printf("%6s %10s %10s %10s\n", "dim", "q mean", "q std", "decoded");
  for (std::size_t d = 0; d < w.size(); ++d) {
    std::printf("%6zu %10.4f %10.4f %10.4f\n", d, q.means[d], std::exp(q.log_stds[d]), w[d]);
  }
  return 0;
}
