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

// Byte layout of a quantized payload (all integers little-endian):
//
//   offset 0   u64  original_len
//   offset 8   u8   bit_width (4 or 8)
//   offset 9   u32  block_size
//   offset 13  u16  scale[0..blocks)   binary16 bit patterns
//   ...        u8   codes              INT4 pairs packed low-nibble-first
//
// Scales are narrowed to half precision here, so a decoded tensor carries the
// half-rounded scales of the in-memory one. full_tensor payloads are written
// as a single block and decode as blocked mode.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "zeropp/error.hpp"
#include "zeropp/half.hpp"
#include "zeropp/quantizer.hpp"

namespace zeropp::wire {

inline constexpr std::size_t kHeaderBytes = 8 + 1 + 4;

inline std::size_t serialized_size(const QuantizedTensor& q) {
  return kHeaderBytes + static_cast<std::size_t>(q.wire_bytes());
}

namespace detail {

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<std::uint8_t>(static_cast<std::uint64_t>(v) >> (8 * i)));
  }
}

template <typename T>
T get_le(std::span<const std::uint8_t> in, std::size_t offset) {
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    v |= static_cast<std::uint64_t>(in[offset + i]) << (8 * i);
  }
  return static_cast<T>(v);
}

}  // namespace detail

inline std::vector<std::uint8_t> serialize(const QuantizedTensor& q) {
  if (q.config.is_passthrough()) {
    throw ConfigError("wire::serialize: passthrough tensors have no wire encoding");
  }
  verify_integrity(q);
  std::vector<std::uint8_t> out;
  out.reserve(serialized_size(q));
  detail::put_le<std::uint64_t>(out, q.original_len);
  detail::put_le<std::uint8_t>(out, static_cast<std::uint8_t>(q.config.bit_width));
  if (q.config.block_size > 0xFFFFFFFFu) throw ConfigError("wire::serialize: block too large");
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(q.config.block_size));
  for (double s : q.scales) detail::put_le<std::uint16_t>(out, half::encode(s));
  out.insert(out.end(), q.codes.begin(), q.codes.end());
  return out;
}

inline QuantizedTensor deserialize(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kHeaderBytes) throw IntegrityError("wire::deserialize: truncated header");
  QuantizedTensor q;
  q.original_len = detail::get_le<std::uint64_t>(bytes, 0);
  q.config.bit_width = detail::get_le<std::uint8_t>(bytes, 8);
  q.config.block_size = detail::get_le<std::uint32_t>(bytes, 9);
  q.config.mode = QuantMode::blocked;
  if (q.config.bit_width != 4 && q.config.bit_width != 8) {
    throw IntegrityError("wire::deserialize: bit width must be 4 or 8");
  }
  if (q.config.block_size < 8 || q.config.block_size % 8 != 0) {
    throw IntegrityError("wire::deserialize: bad block size");
  }
  const std::size_t blocks = ceil_div(q.original_len, q.config.block_size);
  const std::size_t code_len = ceil_div(q.original_len * q.config.bit_width, 8);
  if (bytes.size() != kHeaderBytes + blocks * kScaleWireBytes + code_len) {
    throw IntegrityError("wire::deserialize: payload length does not match header");
  }
  q.scales.resize(blocks);
  for (std::size_t b = 0; b < blocks; ++b) {
    q.scales[b] = half::decode(detail::get_le<std::uint16_t>(bytes, kHeaderBytes + 2 * b));
  }
  const auto codes = bytes.subspan(kHeaderBytes + blocks * kScaleWireBytes);
  q.codes.assign(codes.begin(), codes.end());
  return q;
}

}  // namespace zeropp::wire
