// Copyright 2026 The zeropp-sim Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// =============================================================================
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "zeropp/half.hpp"
#include "zeropp/wire_format.hpp"

namespace zeropp {
namespace {

TEST(WireFormat, LayoutOfSmallInt8Tensor) {
  const QuantizedTensor q = quantize(FlatTensor{{2.0, -1.0}}, QuantConfig::int8(8));
  const auto bytes = wire::serialize(q);
  ASSERT_EQ(bytes.size(), wire::serialized_size(q));
  ASSERT_EQ(bytes.size(), 13u + 2u + 2u);
  EXPECT_EQ(bytes[0], 2);  // length, little-endian
  for (int i = 1; i < 8; ++i) EXPECT_EQ(bytes[static_cast<std::size_t>(i)], 0);
  EXPECT_EQ(bytes[8], 8);  // bit width
  EXPECT_EQ(bytes[9], 8);  // block size
  const std::uint16_t scale = half::encode(2.0 / 127);
  EXPECT_EQ(bytes[13], scale & 0xFF);
  EXPECT_EQ(bytes[14], scale >> 8);
  EXPECT_EQ(bytes[15], 127);
  EXPECT_EQ(static_cast<std::int8_t>(bytes[16]), -64);  // -63.5 rounds to even
}

TEST(WireFormat, RoundTripKeepsCodesAndHalfScales) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> d;
  FlatTensor t{std::vector<double>(1000)};
  for (double& x : t.values) x = d(rng);
  for (const QuantConfig& c : {QuantConfig::int4(64), QuantConfig::int8(128), QuantConfig::full_tensor(4)}) {
    const QuantizedTensor q = quantize(t, c);
    const QuantizedTensor back = wire::deserialize(wire::serialize(q));
    EXPECT_EQ(back.codes, q.codes);
    EXPECT_EQ(back.original_len, q.original_len);
    ASSERT_EQ(back.scales.size(), q.scales.size());
    for (std::size_t b = 0; b < q.scales.size(); ++b) EXPECT_EQ(back.scales[b], half::round(q.scales[b]));
  }
}

TEST(WireFormat, CorruptionIsDetected) {
  const QuantizedTensor q = quantize(FlatTensor{std::vector<double>(32, 1.0)}, QuantConfig::int8(16));
  auto bytes = wire::serialize(q);
  auto truncated = bytes;
  truncated.pop_back();
  EXPECT_THROW(wire::deserialize(truncated), IntegrityError);
  auto bad_bits = bytes;
  bad_bits[8] = 5;
  EXPECT_THROW(wire::deserialize(bad_bits), IntegrityError);
  auto bad_code = bytes;
  bad_code.back() = 0x80;
  EXPECT_THROW(dequantize(wire::deserialize(bad_code)), IntegrityError);
  EXPECT_THROW(wire::deserialize(std::vector<std::uint8_t>(5)), IntegrityError);
}

TEST(WireFormat, PassthroughHasNoEncoding) {
  const QuantizedTensor q = quantize(FlatTensor{{1.0}}, QuantConfig::passthrough());
  EXPECT_THROW(wire::serialize(q), ConfigError);
}

}  // namespace
}  // namespace zeropp
