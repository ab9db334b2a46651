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

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "zeropp/error.hpp"

namespace zeropp {

// A flat run of full-precision values. `wire_element_bytes` is what one
// element costs when it is put on a link (2 for a half-precision payload,
// 4 for an fp32 master copy); the values themselves are always doubles.
struct FlatTensor {
  std::vector<double> values;
  std::uint32_t wire_element_bytes = 2;
  // Longest chain of quantize passes any element of this tensor went through.
  std::uint32_t codec_passes = 0;

  FlatTensor() = default;
  explicit FlatTensor(std::vector<double> v, std::uint32_t element_bytes = 2)
      : values(std::move(v)), wire_element_bytes(element_bytes) {}

  std::size_t size() const { return values.size(); }
  bool empty() const { return values.empty(); }
  double operator[](std::size_t i) const { return values[i]; }
  double& operator[](std::size_t i) { return values[i]; }

  std::uint64_t wire_bytes() const {
    return static_cast<std::uint64_t>(values.size()) * wire_element_bytes;
  }

  void require_finite(const char* where) const {
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (!std::isfinite(values[i])) {
        throw ValidationError(std::string(where) + ": non-finite value at index " +
                              std::to_string(i));
      }
    }
  }
};

inline std::size_t ceil_div(std::size_t a, std::size_t b) { return (a + b - 1) / b; }
inline std::size_t round_up(std::size_t a, std::size_t b) { return ceil_div(a, b) * b; }

}  // namespace zeropp
