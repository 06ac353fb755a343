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

#include <bit>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "mrcl/codec.hpp"
#include "mrcl/errors.hpp"
#include "mrcl/pipeline.hpp"

// Binary container for a compressed model. All fixed-width fields are
// little-endian:
//
//   "MRCL" | u16 version | u32 layer_count
//   | layer_count x (u32 in, u32 out, u8 kind)
//   | layer_count x (f64 nu, f64 log_rho)
//   | u32 block_size | u32 budget_bits | u64 global_seed | u64 selection_seed
//   | u32 block_count | packed indices (MSB-first, budget_bits each)

namespace mrcl {

inline constexpr char kMagic[4] = {'M', 'R', 'C', 'L'};

namespace detail {

class ByteWriter {
 public:
  template <typename T>
  void put(T v) {
    auto u = static_cast<std::uint64_t>(v);
    for (std::size_t i = 0; i < sizeof(T); ++i) bytes_.push_back(static_cast<std::uint8_t>(u >> (8 * i)));
  }
  void put_f64(double v) { put(std::bit_cast<std::uint64_t>(v)); }
  void put_bytes(const std::vector<std::uint8_t>& b) { bytes_.insert(bytes_.end(), b.begin(), b.end()); }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  template <typename T>
  T get(const char* field) {
    need(sizeof(T), field);
    std::uint64_t u = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) u |= std::uint64_t{bytes_[pos_ + i]} << (8 * i);
    pos_ += sizeof(T);
    return static_cast<T>(u);
  }
  double get_f64(const char* field) { return std::bit_cast<double>(get<std::uint64_t>(field)); }
  std::span<const std::uint8_t> get_bytes(std::size_t n, const char* field) {
    need(n, field);
    auto out = bytes_.subspan(pos_, n);
    pos_ += n;
    return out;
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n, const char* field) const {
    if (bytes_.size() - pos_ < n) {
      throw FormatError(std::string("compressed model truncated while reading ") + field);
    }
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::vector<std::uint8_t> serialize(const CompressedModel& cm) {
  detail::ByteWriter w;
  for (char c : kMagic) w.put(static_cast<std::uint8_t>(c));
  w.put(cm.format_version);
  w.put(static_cast<std::uint32_t>(cm.arch.layers.size()));
  for (const auto& l : cm.arch.layers) {
    w.put(static_cast<std::uint32_t>(l.in_features));
    w.put(static_cast<std::uint32_t>(l.out_features));
    w.put(static_cast<std::uint8_t>(l.kind));
  }
  for (std::size_t l = 0; l < cm.arch.layers.size(); ++l) {
    w.put_f64(cm.coding.nu.at(l));
    w.put_f64(cm.coding.log_rho.at(l));
  }
  w.put(cm.block_size);
  w.put(cm.budget_bits);
  w.put(cm.global_seed);
  w.put(cm.selection_seed);
  w.put(static_cast<std::uint32_t>(cm.indices.size()));
  w.put_bytes(pack_indices(cm.indices));
  return w.take();
}

inline CompressedModel deserialize(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes);
  const auto magic = r.get_bytes(4, "magic");
  if (!std::equal(magic.begin(), magic.end(), std::begin(kMagic),
                  [](std::uint8_t a, char b) { return a == static_cast<std::uint8_t>(b); })) {
    throw FormatError("not a compressed model (bad magic)");
  }
  CompressedModel cm;
  cm.format_version = r.get<std::uint16_t>("version");
  if (cm.format_version != kFormatVersion) {
    throw FormatError("unsupported compressed model version " + std::to_string(cm.format_version));
  }
  const auto layer_count = r.get<std::uint32_t>("layer count");
  if (layer_count == 0 || layer_count > r.remaining() / 9) {
    throw FormatError("implausible layer count " + std::to_string(layer_count));
  }
  for (std::uint32_t i = 0; i < layer_count; ++i) {
    LayerSpec l;
    l.in_features = r.get<std::uint32_t>("layer in_features");
    l.out_features = r.get<std::uint32_t>("layer out_features");
    const auto kind = r.get<std::uint8_t>("layer kind");
    if (kind > 1) throw FormatError("unknown layer kind " + std::to_string(kind));
    l.kind = static_cast<LayerKind>(kind);
    cm.arch.layers.push_back(l);
  }
  try {
    cm.arch.validate();
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("bad architecture: ") + e.what());
  }
  for (std::uint32_t i = 0; i < layer_count; ++i) {
    cm.coding.nu.push_back(r.get_f64("coding nu"));
    cm.coding.log_rho.push_back(r.get_f64("coding log_rho"));
  }
  cm.block_size = r.get<std::uint32_t>("block_size");
  cm.budget_bits = r.get<std::uint32_t>("budget_bits");
  cm.global_seed = r.get<std::uint64_t>("global_seed");
  cm.selection_seed = r.get<std::uint64_t>("selection_seed");
  const auto block_count = r.get<std::uint32_t>("block_count");
  if (cm.block_size == 0 || cm.budget_bits == 0 || cm.budget_bits > 64) {
    throw FormatError("invalid block_size / budget_bits");
  }
  const std::size_t expected_blocks = (cm.arch.param_count() + cm.block_size - 1) / cm.block_size;
  if (block_count != expected_blocks) {
    throw FormatError("block count " + std::to_string(block_count) + " inconsistent with " +
                      std::to_string(expected_blocks) + " blocks implied by the architecture");
  }
  const std::size_t payload = (std::size_t{block_count} * cm.budget_bits + 7) / 8;
  const auto packed = r.get_bytes(payload, "index bitstream");
  if (r.remaining() != 0) {
    throw FormatError(std::to_string(r.remaining()) + " trailing bytes after index bitstream");
  }
  const std::vector<unsigned> budgets(block_count, cm.budget_bits);
  cm.indices = unpack_indices(packed, budgets);
  return cm;
}

/// Writes to a temporary sibling then renames over `path`.
inline void write_bytes_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write '" + tmp.string() + "'");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw FormatError("write failed for '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

inline std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_compressed_model(const std::filesystem::path& path, const CompressedModel& cm) {
  write_bytes_atomic(path, serialize(cm));
}

inline CompressedModel read_compressed_model(const std::filesystem::path& path) {
  try {
    return deserialize(read_bytes(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

inline std::size_t payload_bits(const CompressedModel& cm) {
  return cm.indices.size() * cm.budget_bits;
}

inline std::size_t header_bits(const CompressedModel& cm) {
  return 8 * (serialize(cm).size() - (payload_bits(cm) + 7) / 8);
}

/// (original_param_count * bits_per_param) / (payload bits [+ header bits]).
inline double compression_ratio(std::size_t original_param_count, std::size_t bits_per_param,
                                const CompressedModel& cm, bool include_header = true) {
  if (original_param_count == 0 || bits_per_param == 0) {
    throw std::invalid_argument("compression_ratio: counts must be positive");
  }
  const double denom = static_cast<double>(payload_bits(cm) + (include_header ? header_bits(cm) : 0));
  return static_cast<double>(original_param_count * bits_per_param) / denom;
}

}  // namespace mrcl
