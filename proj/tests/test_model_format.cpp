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

#include <gtest/gtest.h>

#include <filesystem>

#include "mrcl/model_format.hpp"

namespace mrcl {
namespace {

CompressedModel sample_model(std::size_t block_size = 20, unsigned bits = 20) {
  CompressedModel cm;
  cm.arch = ModelSpec::mlp({8, 6, 4});
  cm.coding = {{0.0, 0.0}, {-2.0, -1.5}};
  cm.block_size = static_cast<std::uint32_t>(block_size);
  cm.budget_bits = bits;
  cm.global_seed = 0x0123456789ABCDEFULL;
  cm.selection_seed = 42;
  const std::size_t blocks = (cm.arch.param_count() + block_size - 1) / block_size;
  SplitMixRng rng(5);
  for (std::size_t b = 0; b < blocks; ++b) cm.indices.push_back(EncodedBlock{rng.next_u64() >> (64 - bits), bits});
  return cm;
}

TEST(ModelFormat, RoundTrip) {
  const CompressedModel cm = sample_model();
  const auto bytes = serialize(cm);
  EXPECT_EQ(deserialize(bytes), cm);
  EXPECT_EQ(serialize(deserialize(bytes)), bytes);
}

TEST(ModelFormat, LayoutIsLittleEndian) {
  const CompressedModel cm = sample_model();
  const auto bytes = serialize(cm);
  ASSERT_GE(bytes.size(), 10u);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "MRCL");
  EXPECT_EQ(bytes[4], 1);
  EXPECT_EQ(bytes[5], 0);
  EXPECT_EQ(bytes[6], 2);  // layer count, u32 LE
  // magic 4, version 2, count 4, layers 2*9, coding 2*16, five header ints 4+4+8+8+4.
  const std::size_t header = 4 + 2 + 4 + 18 + 32 + 28;
  EXPECT_EQ(bytes.size(), header + (cm.indices.size() * 20 + 7) / 8);
  EXPECT_EQ(header_bits(cm), header * 8);
  EXPECT_EQ(payload_bits(cm), cm.indices.size() * 20);
}

TEST(ModelFormat, RejectsCorruption) {
  const auto bytes = serialize(sample_model());
  auto bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(deserialize(bad), FormatError);
  bad = bytes;
  bad[4] = 2;
  EXPECT_THROW(deserialize(bad), FormatError);
  for (std::size_t cut : {std::size_t{0}, std::size_t{3}, std::size_t{20}, bytes.size() - 1}) {
    const std::vector<std::uint8_t> truncated(bytes.begin(), bytes.begin() + static_cast<long>(cut));
    EXPECT_THROW(deserialize(truncated), FormatError) << cut;
  }
  bad = bytes;
  bad.push_back(0);
  EXPECT_THROW(deserialize(bad), FormatError);
  bad = bytes;
  bad[6] = 0;  // zero layers
  EXPECT_THROW(deserialize(bad), FormatError);
}

TEST(ModelFormat, FileRoundTrip) {
  const auto dir = std::filesystem::temp_directory_path() / "mrcl_model_format_test";
  std::filesystem::create_directories(dir);
  const auto path = dir / "m.mrcl";
  const CompressedModel cm = sample_model(10, 12);
  write_compressed_model(path, cm);
  EXPECT_FALSE(std::filesystem::exists(path.string() + ".tmp"));
  EXPECT_EQ(read_compressed_model(path), cm);
  EXPECT_THROW(read_compressed_model(dir / "missing.mrcl"), FormatError);
  std::filesystem::remove_all(dir);
}

TEST(CompressionRatio, HandComputedExample) {
  CompressedModel cm;
  cm.budget_bits = 20;
  cm.indices.assign(50, {0, 20});
  EXPECT_EQ(compression_ratio(1000, 32, cm, false), 32.0);
}

TEST(CompressionRatio, DoublingBlockSizeDoublesPayloadRatio) {
  const CompressedModel a = sample_model(4, 20);
  const CompressedModel b = sample_model(8, 20);
  // 82 parameters: 21 blocks of 4 vs 11 blocks of 8.
  EXPECT_EQ(a.indices.size(), 21u);
  EXPECT_EQ(b.indices.size(), 11u);
  EXPECT_DOUBLE_EQ(compression_ratio(82, 32, a, false), 82.0 * 32 / (21 * 20));
  EXPECT_DOUBLE_EQ(compression_ratio(82, 32, b, false), 82.0 * 32 / (11 * 20));
  const CompressedModel even = sample_model(41, 20);
  const CompressedModel half = sample_model(82, 20);
  EXPECT_DOUBLE_EQ(compression_ratio(82, 32, half, false), 2.0 * compression_ratio(82, 32, even, false));
  EXPECT_LT(compression_ratio(82, 32, half), compression_ratio(82, 32, half, false));
  EXPECT_THROW(compression_ratio(0, 32, a), std::invalid_argument);
}

}  // namespace
}  // namespace mrcl
