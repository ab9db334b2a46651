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
#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "zeropp/quantizer.hpp"

namespace zeropp {
namespace {

FlatTensor random_tensor(std::size_t n, std::uint64_t seed, double sd = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d(0.0, sd);
  FlatTensor t{std::vector<double>(n)};
  for (double& x : t.values) x = d(rng);
  return t;
}

TEST(Quantizer, Int8SmallExample) {
  const FlatTensor t{{1.0, -1.0, 0.5, -0.5}};
  const QuantizedTensor q = quantize(t, QuantConfig::int8(8));
  ASSERT_EQ(q.scales.size(), 1u);
  EXPECT_DOUBLE_EQ(q.scales[0], 1.0 / 127);
  EXPECT_EQ(q.code(0), 127);
  EXPECT_EQ(q.code(1), -127);
  EXPECT_EQ(q.code(2), 64);  // 63.5 rounds to even
  EXPECT_EQ(q.code(3), -64);
  EXPECT_EQ(q.wire_bytes(), 4u + 2u);
}

TEST(Quantizer, AllZeroBlockHasZeroScale) {
  const FlatTensor t{std::vector<double>(16, 0.0)};
  const QuantizedTensor q = quantize(t, QuantConfig::int4(8));
  EXPECT_EQ(q.scales, (std::vector<double>{0.0, 0.0}));
  const FlatTensor back = dequantize(q);
  EXPECT_EQ(back.values, t.values);
}

TEST(Quantizer, Int4PacksLowNibbleFirst) {
  const FlatTensor t{{7.0, -7.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, -3.0}};
  const QuantizedTensor q = quantize(t, QuantConfig::int4(8));
  ASSERT_EQ(q.codes.size(), 5u);
  EXPECT_EQ(q.codes[0], 0x97);  // low 7, high -7 = 0x9
  EXPECT_EQ(q.codes[1], 0x01);
  EXPECT_EQ(q.code(8), -7);     // second block: alone, so full scale
  EXPECT_EQ(q.scales.size(), 2u);
  EXPECT_EQ(q.wire_bytes(), 5u + 4u);
}

TEST(Quantizer, NeverEmitsMostNegativeCode) {
  const FlatTensor t = random_tensor(4096, 3);
  for (const QuantConfig& c : {QuantConfig::int4(64), QuantConfig::int8(64)}) {
    const QuantizedTensor q = quantize(t, c);
    for (std::size_t i = 0; i < t.size(); ++i) {
      EXPECT_GE(q.code(i), -c.qmax());
      EXPECT_LE(q.code(i), c.qmax());
    }
  }
}

TEST(Quantizer, PartialLastBlock) {
  const FlatTensor t = random_tensor(100, 5);
  const QuantizedTensor q = quantize(t, QuantConfig::int8(64));
  EXPECT_EQ(q.scales.size(), 2u);
  EXPECT_EQ(dequantize(q).size(), 100u);
}

TEST(Quantizer, LatticeInputsAreExact) {
  FlatTensor t{std::vector<double>(64)};
  for (std::size_t i = 0; i < t.size(); ++i) t.values[i] = static_cast<int>(i % 15) - 7;
  EXPECT_EQ(dequantize(quantize(t, QuantConfig::int4(16))).values, t.values);
}

TEST(Quantizer, RejectsNonFiniteAndBadConfig) {
  FlatTensor t{{1.0, NAN}};
  EXPECT_THROW(quantize(t, QuantConfig::int8()), ValidationError);
  EXPECT_THROW(quantize(FlatTensor{{1.0}}, QuantConfig{3, 8, QuantMode::blocked}), ConfigError);
  EXPECT_THROW(quantize(FlatTensor{{1.0}}, QuantConfig{8, 12, QuantMode::blocked}), ConfigError);
}

TEST(Quantizer, IntegrityChecks) {
  QuantizedTensor q = quantize(random_tensor(32, 1), QuantConfig::int8(16));
  QuantizedTensor bad = q;
  bad.codes[3] = 0x80;  // -128
  EXPECT_THROW(dequantize(bad), IntegrityError);
  bad = q;
  bad.scales.pop_back();
  EXPECT_THROW(dequantize(bad), IntegrityError);
  bad = q;
  bad.scales[0] = -1.0;
  EXPECT_THROW(dequantize(bad), IntegrityError);
  bad = q;
  bad.codes.push_back(0);
  EXPECT_THROW(dequantize(bad), IntegrityError);
}

TEST(Quantizer, FullTensorUsesOneScale) {
  const FlatTensor t = random_tensor(1000, 2);
  const QuantizedTensor q = quantize(t, QuantConfig::full_tensor(4));
  EXPECT_EQ(q.scales.size(), 1u);
  EXPECT_EQ(q.config.block_size, 1000u);
}

TEST(Quantizer, QuantizeWithRangeSharesScale) {
  const FlatTensor t{{0.5, -0.25}};
  const QuantizedTensor q = quantize_with_range(t, QuantConfig::full_tensor(8), 1.0);
  EXPECT_DOUBLE_EQ(q.scales[0], 1.0 / 127);
  EXPECT_EQ(q.code(0), 64);
  EXPECT_THROW(quantize_with_range(t, QuantConfig::full_tensor(8), 0.4), ValidationError);
  EXPECT_THROW(quantize_with_range(t, QuantConfig::int8(), 1.0), ConfigError);
}

TEST(Quantizer, PassthroughIsIdentity) {
  const FlatTensor t = random_tensor(77, 9);
  const QuantizedTensor q = quantize(t, QuantConfig::passthrough());
  EXPECT_EQ(dequantize(q).values, t.values);
  EXPECT_EQ(q.wire_bytes(), 154u);
}

TEST(Quantizer, CodecPassesAccumulate) {
  const FlatTensor t = random_tensor(64, 4);
  const QuantizedTensor a = quantize(t, QuantConfig::int8(64));
  EXPECT_EQ(a.codec_passes, 1u);
  const QuantizedTensor b = quantize(dequantize(a), QuantConfig::int8(64));
  EXPECT_EQ(b.codec_passes, 2u);
  const std::vector<QuantizedTensor> in{a, b};
  EXPECT_EQ(fused_dequant_reduce_quant(in, QuantConfig::int4(64)).codec_passes, 3u);
}

TEST(Quantizer, ErrorBoundOnRandomData) {
  for (const QuantConfig& c : {QuantConfig::int4(), QuantConfig::int8()}) {
    const FlatTensor t = random_tensor(1 << 16, 11);
    const QuantErrorStats s = quant_error_stats(t, c);
    EXPECT_EQ(s.per_block_bound_violations, 0u);
    EXPECT_GT(s.rmse, 0.0);
  }
}

TEST(Quantizer, BlockedBeatsFullTensorOnOutliers) {
  FlatTensor t = random_tensor(1 << 14, 12, 0.01);
  t.values[100] = 50.0;
  const double blocked = quant_error_stats(t, QuantConfig::int8(64)).rmse;
  const double full = quant_error_stats(t, QuantConfig::full_tensor(8)).rmse;
  EXPECT_LT(blocked, full);
}

// The fused kernel must match dequantize -> sum -> quantize exactly.
TEST(Quantizer, FusedMatchesUnfusedComposition) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng() % 700;
    const int k = 1 + static_cast<int>(rng() % 5);
    const QuantConfig in_cfg = (rng() & 1) ? QuantConfig::int4(8 * (1 + rng() % 16))
                                           : QuantConfig::int8(8 * (1 + rng() % 16));
    const QuantConfig out_cfg = (rng() & 1) ? QuantConfig::int4(8 * (1 + rng() % 16))
                                            : QuantConfig::int8(8 * (1 + rng() % 16));
    std::vector<QuantizedTensor> inputs;
    for (int j = 0; j < k; ++j) inputs.push_back(quantize(random_tensor(n, rng()), in_cfg));
    FlatTensor sum{std::vector<double>(n, 0.0)};
    for (const auto& q : inputs) {
      const FlatTensor d = dequantize(q);
      for (std::size_t i = 0; i < n; ++i) sum.values[i] += d.values[i];
    }
    const QuantizedTensor ref = quantize(sum, out_cfg);
    const QuantizedTensor fused = fused_dequant_reduce_quant(inputs, out_cfg);
    ASSERT_EQ(fused.codes, ref.codes) << "trial " << trial;
    ASSERT_EQ(fused.scales, ref.scales) << "trial " << trial;
  }
}

TEST(Quantizer, FusedRejectsMismatchedInputs) {
  const std::vector<QuantizedTensor> in{quantize(random_tensor(16, 1), QuantConfig::int8(8)),
                                        quantize(random_tensor(24, 2), QuantConfig::int8(8))};
  EXPECT_THROW(fused_dequant_reduce_quant(in, QuantConfig::int8(8)), ValidationError);
  EXPECT_THROW(fused_dequant_reduce_quant({}, QuantConfig::int8(8)), ValidationError);
}

}  // namespace
}  // namespace zeropp
