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
#pragma once

// Blockwise symmetric integer codec.
//
// A tensor is cut into contiguous blocks of `block_size` elements. Each block
// gets its own scale s = max|x| / qmax with qmax = 2^(bits-1) - 1, and every
// element is stored as round(x / s) (ties-to-even) clamped to [-qmax, qmax].
// The most negative two's-complement code is never produced, so a decoder can
// treat it as corruption. INT4 codes are packed two per byte, low nibble
// first; INT8 codes are one signed byte each.
//
// full_tensor mode is the non-blocked baseline: one block spanning the whole
// tensor (length rounded up to a multiple of 8). passthrough is an identity
// "codec" used to test routing without numeric error.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "zeropp/error.hpp"
#include "zeropp/tensor.hpp"

namespace zeropp {

inline constexpr std::size_t kDefaultWeightBlock = 2048;
inline constexpr std::size_t kDefaultGradientBlock = 512;
inline constexpr std::uint64_t kScaleWireBytes = 2;

enum class QuantMode { blocked, full_tensor, passthrough };

inline const char* to_string(QuantMode m) {
  switch (m) {
    case QuantMode::blocked: return "blocked";
    case QuantMode::full_tensor: return "full_tensor";
    case QuantMode::passthrough: return "passthrough";
  }
  return "?";
}

struct QuantConfig {
  int bit_width = 8;
  std::size_t block_size = kDefaultWeightBlock;
  QuantMode mode = QuantMode::blocked;

  static QuantConfig int8(std::size_t block = kDefaultWeightBlock) {
    return {8, block, QuantMode::blocked};
  }
  static QuantConfig int4(std::size_t block = kDefaultGradientBlock) {
    return {4, block, QuantMode::blocked};
  }
  static QuantConfig full_tensor(int bits) { return {bits, 8, QuantMode::full_tensor}; }
  static QuantConfig passthrough() { return {16, 8, QuantMode::passthrough}; }

  bool is_passthrough() const { return mode == QuantMode::passthrough; }
  int qmax() const { return (1 << (bit_width - 1)) - 1; }

  void validate() const {
    if (mode == QuantMode::passthrough) return;
    if (bit_width != 4 && bit_width != 8) {
      throw ConfigError("QuantConfig: bit_width must be 4 or 8, got " +
                        std::to_string(bit_width));
    }
    if (block_size < 8 || block_size % 8 != 0) {
      throw ConfigError("QuantConfig: block_size must be a positive multiple of 8, got " +
                        std::to_string(block_size));
    }
  }

  // Block length actually used for a tensor of `len` elements.
  std::size_t block_for(std::size_t len) const {
    if (mode == QuantMode::full_tensor) return std::max<std::size_t>(8, round_up(len, 8));
    return block_size;
  }

  // Payload shrink factor relative to an fp16 wire.
  double compression_vs_fp16() const { return is_passthrough() ? 1.0 : 16.0 / bit_width; }

  friend bool operator==(const QuantConfig&, const QuantConfig&) = default;
};

struct QuantizedTensor {
  std::vector<std::uint8_t> codes;
  std::vector<double> scales;
  std::vector<double> raw;  // passthrough payload only
  std::size_t original_len = 0;
  QuantConfig config;  // block_size holds the resolved block length
  std::uint32_t codec_passes = 0;

  std::size_t block_count() const { return scales.size(); }

  int code(std::size_t i) const {
    if (config.bit_width == 8) return static_cast<std::int8_t>(codes[i]);
    const int nibble = (codes[i / 2] >> (4 * (i & 1))) & 0xF;
    return nibble >= 8 ? nibble - 16 : nibble;
  }

  double scale_of(std::size_t i) const { return scales[i / config.block_size]; }

  std::uint64_t code_bytes() const {
    if (config.is_passthrough()) return static_cast<std::uint64_t>(original_len) * 2;
    return ceil_div(original_len * static_cast<std::size_t>(config.bit_width), 8);
  }
  std::uint64_t scale_bytes() const { return scales.size() * kScaleWireBytes; }
  std::uint64_t wire_bytes() const { return code_bytes() + scale_bytes(); }
};

namespace detail {

inline void put_code(std::vector<std::uint8_t>& codes, int bits, std::size_t i, int c) {
  if (bits == 8) {
    codes[i] = static_cast<std::uint8_t>(static_cast<std::int8_t>(c));
  } else {
    const auto nibble = static_cast<std::uint8_t>(c & 0xF);
    codes[i / 2] |= static_cast<std::uint8_t>(nibble << (4 * (i & 1)));
  }
}

// Encodes one block of already-materialized values starting at element
// `first`; returns the block scale. Shared by quantize and the fused path so
// both perform the same arithmetic in the same order.
inline double encode_block(std::span<const double> block, std::size_t first,
                           const QuantConfig& cfg, std::vector<std::uint8_t>& codes,
                           double max_abs = -1.0) {
  if (max_abs < 0.0) {
    max_abs = 0.0;
    for (double x : block) max_abs = std::max(max_abs, std::fabs(x));
  }
  if (max_abs == 0.0) return 0.0;
  const int qmax = cfg.qmax();
  const double q = static_cast<double>(qmax);
  for (std::size_t j = 0; j < block.size(); ++j) {
    double c = std::nearbyint(block[j] * q / max_abs);
    c = std::clamp(c, -q, q);
    put_code(codes, cfg.bit_width, first + j, static_cast<int>(c));
  }
  return max_abs / q;
}

inline QuantizedTensor empty_quantized(std::size_t len, const QuantConfig& cfg) {
  QuantizedTensor out;
  out.original_len = len;
  out.config = cfg;
  if (cfg.is_passthrough()) {
    out.raw.assign(len, 0.0);
    return out;
  }
  out.config.block_size = cfg.block_for(len);
  out.codes.assign(ceil_div(len * static_cast<std::size_t>(cfg.bit_width), 8), 0);
  out.scales.assign(ceil_div(len, out.config.block_size), 0.0);
  return out;
}

}  // namespace detail

inline QuantizedTensor quantize(const FlatTensor& t, const QuantConfig& cfg) {
  cfg.validate();
  t.require_finite("quantize");
  QuantizedTensor out = detail::empty_quantized(t.size(), cfg);
  out.codec_passes = t.codec_passes + 1;
  if (cfg.is_passthrough()) {
    out.raw = t.values;
    return out;
  }
  const std::size_t block = out.config.block_size;
  const std::span<const double> all(t.values);
  for (std::size_t b = 0; b < out.scales.size(); ++b) {
    const std::size_t first = b * block;
    const std::size_t n = std::min(block, t.size() - first);
    out.scales[b] = detail::encode_block(all.subspan(first, n), first, cfg, out.codes);
  }
  return out;
}

// Single-scale encoding against a caller-supplied range (>= max|x|). Used by
// the non-blocked baseline when one scale has to cover a tensor that travels
// in several pieces: every piece is encoded with the scale of the whole.
inline QuantizedTensor quantize_with_range(const FlatTensor& t, const QuantConfig& cfg,
                                           double range) {
  cfg.validate();
  t.require_finite("quantize_with_range");
  if (cfg.mode != QuantMode::full_tensor) {
    throw ConfigError("quantize_with_range: only valid for full_tensor mode");
  }
  if (!(range >= 0.0) || !std::isfinite(range)) {
    throw ValidationError("quantize_with_range: range must be finite and non-negative");
  }
  for (double x : t.values) {
    if (std::fabs(x) > range) throw ValidationError("quantize_with_range: value exceeds range");
  }
  QuantizedTensor out = detail::empty_quantized(t.size(), cfg);
  out.codec_passes = t.codec_passes + 1;
  if (!out.scales.empty()) {
    out.scales[0] = detail::encode_block(t.values, 0, cfg, out.codes, range);
  }
  return out;
}

// Checks that a tensor could have come out of quantize().
inline void verify_integrity(const QuantizedTensor& q) {
  const QuantConfig& cfg = q.config;
  if (cfg.is_passthrough()) {
    if (q.raw.size() != q.original_len) throw IntegrityError("passthrough length mismatch");
    return;
  }
  if (cfg.bit_width != 4 && cfg.bit_width != 8) throw IntegrityError("bad bit width");
  if (cfg.block_size == 0 || cfg.block_size % 8 != 0) throw IntegrityError("bad block size");
  if (q.codes.size() != ceil_div(q.original_len * static_cast<std::size_t>(cfg.bit_width), 8)) {
    throw IntegrityError("code buffer length does not match original_len");
  }
  if (q.scales.size() != ceil_div(q.original_len, cfg.block_size)) {
    throw IntegrityError("scale count does not match block layout");
  }
  for (double s : q.scales) {
    if (!std::isfinite(s) || s < 0.0) throw IntegrityError("scale is negative or non-finite");
  }
  const int qmax = cfg.qmax();
  for (std::size_t i = 0; i < q.original_len; ++i) {
    const int c = q.code(i);
    if (c < -qmax || c > qmax) {
      throw IntegrityError("code " + std::to_string(c) + " at index " + std::to_string(i) +
                           " outside symmetric range");
    }
    if (c != 0 && q.scale_of(i) == 0.0) throw IntegrityError("non-zero code in zero-scale block");
  }
}

inline FlatTensor dequantize(const QuantizedTensor& q) {
  verify_integrity(q);
  FlatTensor out;
  out.wire_element_bytes = 2;
  out.codec_passes = q.codec_passes;
  if (q.config.is_passthrough()) {
    out.values = q.raw;
    return out;
  }
  out.values.resize(q.original_len);
  for (std::size_t i = 0; i < q.original_len; ++i) {
    out.values[i] = q.code(i) * q.scale_of(i);
  }
  return out;
}

// Sums the dequantized inputs left to right in full precision and quantizes
// the result, one output block at a time. Produces exactly the bytes of
// quantize(sum(dequantize(inputs)), out_cfg) without materializing the
// intermediate full-length tensors.
inline QuantizedTensor fused_dequant_reduce_quant(std::span<const QuantizedTensor> inputs,
                                                  const QuantConfig& out_cfg) {
  out_cfg.validate();
  if (inputs.empty()) throw ValidationError("fused_dequant_reduce_quant: no inputs");
  const std::size_t len = inputs.front().original_len;
  std::uint32_t passes = 0;
  for (const auto& in : inputs) {
    if (in.original_len != len || !(in.config == inputs.front().config)) {
      throw ValidationError("fused_dequant_reduce_quant: inputs differ in length or config");
    }
    verify_integrity(in);
    passes = std::max(passes, in.codec_passes);
  }

  QuantizedTensor out = detail::empty_quantized(len, out_cfg);
  out.codec_passes = passes + 1;
  const std::size_t block = out_cfg.is_passthrough() ? std::max<std::size_t>(len, 1)
                                                     : out.config.block_size;
  std::vector<double> acc(std::min(block, len));
  for (std::size_t first = 0; first < len; first += block) {
    const std::size_t n = std::min(block, len - first);
    for (std::size_t j = 0; j < n; ++j) {
      const std::size_t i = first + j;
      double sum = 0.0;
      for (const auto& in : inputs) {
        sum += in.config.is_passthrough() ? in.raw[i] : in.code(i) * in.scale_of(i);
      }
      acc[j] = sum;
    }
    if (out_cfg.is_passthrough()) {
      std::copy_n(acc.begin(), n, out.raw.begin() + static_cast<std::ptrdiff_t>(first));
    } else {
      out.scales[first / block] = detail::encode_block(std::span<const double>(acc.data(), n),
                                                       first, out_cfg, out.codes);
    }
  }
  return out;
}

struct QuantErrorStats {
  double rmse = 0.0;
  double max_abs_error = 0.0;
  std::size_t per_block_bound_violations = 0;
};

// Round-trip error of the codec on `t`. An element violates the bound when its
// reconstruction error exceeds half its block scale; the comparison carries a
// few ulps of the block maximum so that ties evaluated in floating point are
// not miscounted.
inline QuantErrorStats quant_error_stats(const FlatTensor& t, const QuantConfig& cfg) {
  const QuantizedTensor q = quantize(t, cfg);
  const FlatTensor back = dequantize(q);
  QuantErrorStats stats;
  if (t.empty()) return stats;
  double sq = 0.0;
  constexpr double kUlps = 4.0 * std::numeric_limits<double>::epsilon();
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double err = std::fabs(back[i] - t[i]);
    sq += err * err;
    stats.max_abs_error = std::max(stats.max_abs_error, err);
    if (!cfg.is_passthrough()) {
      const double scale = q.scale_of(i);
      const double block_max = scale * cfg.qmax();
      if (err > scale / 2.0 + kUlps * block_max) ++stats.per_block_bound_violations;
    }
  }
  stats.rmse = std::sqrt(sq / static_cast<double>(t.size()));
  return stats;
}

}  // namespace zeropp
