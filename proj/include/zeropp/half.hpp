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

// IEEE 754 binary16 helpers. Arithmetic stays in double; these only model
// what survives a trip through a half-precision buffer.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>

#include "zeropp/error.hpp"

namespace zeropp::half {

inline constexpr double kMax = 65504.0;

// Nearest binary16 value (ties-to-even), returned as a double. Magnitudes at
// or beyond the overflow threshold become infinity, as a real cast would.
inline double round(double x) {
  if (!std::isfinite(x) || x == 0.0) return x;
  const double a = std::fabs(x);
  if (a >= 65520.0) return std::copysign(std::numeric_limits<double>::infinity(), x);
  int e = 0;
  std::frexp(a, &e);  // a = m * 2^e, m in [0.5, 1)
  // 11 significant bits for normals; fixed 2^-24 quantum for subnormals.
  const int quantum = std::max(e - 11, -24);
  const double q = std::nearbyint(std::ldexp(a, -quantum));
  return std::copysign(std::ldexp(q, quantum), x);
}

inline std::uint16_t encode(double x) {
  if (std::isnan(x)) throw ValidationError("half::encode: NaN");
  const double r = round(x);
  const std::uint16_t sign = std::signbit(r) ? 0x8000u : 0u;
  const double a = std::fabs(r);
  if (std::isinf(a)) return sign | 0x7C00u;
  if (a == 0.0) return sign;
  int e = 0;
  std::frexp(a, &e);
  const int exponent = e - 1;
  if (exponent < -14) {
    return static_cast<std::uint16_t>(sign | static_cast<std::uint16_t>(std::ldexp(a, 24)));
  }
  const auto mantissa = static_cast<std::uint16_t>(std::ldexp(a, 10 - exponent) - 1024.0);
  return static_cast<std::uint16_t>(sign | ((exponent + 15) << 10) | mantissa);
}

inline double decode(std::uint16_t bits) {
  const double sign = (bits & 0x8000u) ? -1.0 : 1.0;
  const int exponent = (bits >> 10) & 0x1F;
  const int mantissa = bits & 0x3FF;
  if (exponent == 0x1F) {
    return mantissa ? std::numeric_limits<double>::quiet_NaN()
                    : sign * std::numeric_limits<double>::infinity();
  }
  if (exponent == 0) return sign * std::ldexp(mantissa, -24);
  return sign * std::ldexp(1024 + mantissa, exponent - 25);
}

}  // namespace zeropp::half
