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
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "mrcl/autodiff.hpp"
#include "mrcl/errors.hpp"
#include "mrcl/random.hpp"

// Datasets: IDX ingestion (MNIST layout), mean-pool downsampling and a
// synthetic Gaussian-blob generator for fast tests.

namespace mrcl {

enum class Split { kTrain, kTest };

struct Dataset {
  ad::Tensor inputs;                // n x d, features in [0, 1]
  std::vector<std::size_t> labels;  // n
  std::size_t num_classes = 0;
  Split split = Split::kTrain;

  std::size_t size() const { return labels.size(); }
  std::size_t dim() const { return inputs.rank() == 2 ? inputs.dim(1) : 0; }

  void validate() const {
    if (inputs.rank() != 2 || inputs.dim(0) != labels.size()) {
      throw FormatError("Dataset: " + std::to_string(labels.size()) + " labels for inputs of shape " +
                        ad::shape_string(inputs.shape()));
    }
    for (std::size_t y : labels) {
      if (y >= num_classes) {
        throw FormatError("Dataset: label " + std::to_string(y) + " >= num_classes " +
                          std::to_string(num_classes));
      }
    }
  }
};

struct SplitDataset {
  Dataset train;
  Dataset test;
};

inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

namespace detail {

inline std::uint32_t read_be32(const std::vector<std::uint8_t>& bytes, std::size_t at) {
  return (std::uint32_t{bytes[at]} << 24) | (std::uint32_t{bytes[at + 1]} << 16) |
         (std::uint32_t{bytes[at + 2]} << 8) | std::uint32_t{bytes[at + 3]};
}

inline void write_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int shift = 24; shift >= 0; shift -= 8) out.push_back(static_cast<std::uint8_t>(v >> shift));
}

inline std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + path + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace detail

/// Parses an unsigned-byte IDX buffer. Image files (magic 0x803) are scaled
/// by 1/255; label files (0x801) keep raw values.
inline ad::Tensor parse_idx(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 4) throw FormatError("IDX: truncated header");
  const std::uint32_t magic = detail::read_be32(bytes, 0);
  std::size_t rank = 0;
  if (magic == kIdxImagesMagic) {
    rank = 3;
  } else if (magic == kIdxLabelsMagic) {
    rank = 1;
  } else {
    throw FormatError("IDX: unsupported magic number " + std::to_string(magic));
  }
  if (bytes.size() < 4 + 4 * rank) throw FormatError("IDX: truncated dimension header");
  ad::Shape shape(rank);
  for (std::size_t i = 0; i < rank; ++i) shape[i] = detail::read_be32(bytes, 4 + 4 * i);
  const std::size_t offset = 4 + 4 * rank;
  const std::size_t n = ad::numel(shape);
  if (bytes.size() - offset != n) {
    throw FormatError("IDX: header declares " + std::to_string(n) + " bytes of payload, found " +
                      std::to_string(bytes.size() - offset));
  }
  const double scale = magic == kIdxImagesMagic ? 1.0 / 255.0 : 1.0;
  std::vector<double> values(n);
  for (std::size_t i = 0; i < n; ++i) values[i] = bytes[offset + i] * scale;
  return ad::Tensor(std::move(shape), std::move(values));
}

inline ad::Tensor read_idx(const std::string& path) {
  try {
    return parse_idx(detail::read_file_bytes(path));
  } catch (const FormatError& e) {
    throw FormatError(path + ": " + e.what());
  }
}

/// Serialises raw u8 values. Used for fixtures and for exporting datasets.
inline std::vector<std::uint8_t> encode_idx(std::uint32_t magic, const std::vector<std::uint32_t>& dims,
                                            const std::vector<std::uint8_t>& payload) {
  std::vector<std::uint8_t> out;
  detail::write_be32(out, magic);
  for (std::uint32_t d : dims) detail::write_be32(out, d);
  out.insert(out.end(), payload.begin(), payload.end());
  return out;
}

inline void write_idx(const std::string& path, std::uint32_t magic,
                      const std::vector<std::uint32_t>& dims,
                      const std::vector<std::uint8_t>& payload) {
  const auto bytes = encode_idx(magic, dims, payload);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write '" + path + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

/// Non-overlapping mean pooling of an (n, rows, cols) image tensor.
inline ad::Tensor downsample(const ad::Tensor& images, std::size_t factor) {
  if (images.rank() != 3) throw std::invalid_argument("downsample: expected (n, rows, cols)");
  if (factor == 0) throw std::invalid_argument("downsample: factor must be positive");
  const std::size_t n = images.dim(0);
  const std::size_t rows = images.dim(1);
  const std::size_t cols = images.dim(2);
  if (rows % factor != 0 || cols % factor != 0) {
    throw std::invalid_argument("downsample: " + std::to_string(rows) + "x" + std::to_string(cols) +
                                " not divisible by " + std::to_string(factor));
  }
  const std::size_t r2 = rows / factor;
  const std::size_t c2 = cols / factor;
  ad::Tensor out({n, r2, c2});
  const double inv = 1.0 / static_cast<double>(factor * factor);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t r = 0; r < r2; ++r) {
      for (std::size_t c = 0; c < c2; ++c) {
        double acc = 0.0;
        for (std::size_t dr = 0; dr < factor; ++dr) {
          for (std::size_t dc = 0; dc < factor; ++dc) {
            acc += images[(i * rows + r * factor + dr) * cols + c * factor + dc];
          }
        }
        out[(i * r2 + r) * c2 + c] = acc * inv;
      }
    }
  }
  return out;
}

/// Builds a dataset from an image tensor and a label tensor, optionally
/// downsampling and keeping only the first `limit` examples (0 = all).
inline Dataset make_image_dataset(const ad::Tensor& images, const ad::Tensor& labels,
                                  std::size_t factor, std::size_t limit, Split split,
                                  std::size_t num_classes = 10) {
  if (images.rank() != 3 || labels.rank() != 1 || images.dim(0) != labels.dim(0)) {
    throw FormatError("image/label count mismatch: " + ad::shape_string(images.shape()) + " vs " +
                      ad::shape_string(labels.shape()));
  }
  const ad::Tensor pooled = factor == 1 ? images : downsample(images, factor);
  const std::size_t n = limit == 0 ? pooled.dim(0) : std::min(limit, pooled.dim(0));
  const std::size_t d = pooled.dim(1) * pooled.dim(2);
  Dataset ds;
  ds.inputs = ad::Tensor({n, d}, std::vector<double>(pooled.data().begin(),
                                                     pooled.data().begin() + static_cast<std::ptrdiff_t>(n * d)));
  ds.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) ds.labels[i] = static_cast<std::size_t>(labels[i]);
  ds.num_classes = num_classes;
  ds.split = split;
  ds.validate();
  return ds;
}

/// Isotropic Gaussian blobs, one per class, centred at 0.5 + 0.4 e_c and
/// clipped to [0, 1]. Points are assigned to classes round-robin and each
/// class is split 80/20 into train/test.
inline SplitDataset gen_synthetic(std::size_t num_points, std::size_t num_classes, std::size_t dim,
                                  std::uint64_t seed, double noise_std = 0.1) {
  if (num_points == 0 || num_classes == 0 || dim == 0) {
    throw std::invalid_argument("gen_synthetic: sizes must be positive");
  }
  if (dim < num_classes) {
    throw std::invalid_argument("gen_synthetic: need dim >= num_classes for simplex means");
  }
  SplitMixRng rng(seed);
  std::vector<std::vector<std::size_t>> by_class(num_classes);
  for (std::size_t i = 0; i < num_points; ++i) by_class[i % num_classes].push_back(i);

  std::vector<double> x(num_points * dim);
  for (std::size_t i = 0; i < num_points; ++i) {
    const std::size_t c = i % num_classes;
    for (std::size_t j = 0; j < dim; ++j) {
      const double centre = 0.5 + (j == c ? 0.4 : 0.0);
      x[i * dim + j] = std::clamp(centre + noise_std * rng.normal(), 0.0, 1.0);
    }
  }

  std::vector<std::size_t> train_idx;
  std::vector<std::size_t> test_idx;
  for (const auto& members : by_class) {
    const std::size_t n_test = members.size() / 5;
    for (std::size_t k = 0; k < members.size(); ++k) {
      (k < members.size() - n_test ? train_idx : test_idx).push_back(members[k]);
    }
  }
  auto gather = [&](const std::vector<std::size_t>& idx, Split split) {
    Dataset ds;
    std::vector<double> values;
    values.reserve(idx.size() * dim);
    for (std::size_t i : idx) {
      values.insert(values.end(), x.begin() + static_cast<std::ptrdiff_t>(i * dim),
                    x.begin() + static_cast<std::ptrdiff_t>((i + 1) * dim));
      ds.labels.push_back(i % num_classes);
    }
    ds.inputs = ad::Tensor({idx.size(), dim}, std::move(values));
    ds.num_classes = num_classes;
    ds.split = split;
    return ds;
  };
  return {gather(train_idx, Split::kTrain), gather(test_idx, Split::kTest)};
}

}  // namespace mrcl
