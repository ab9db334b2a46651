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
#include <span>
#include <vector>

#include "zeropp/error.hpp"

namespace zeropp {

struct AdamHyper {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam state for one rank's primary shard. Master weights and both moments
// are fp32: updates are computed in double and stored rounded to float.
struct AdamShard {
  std::vector<float> master;
  std::vector<float> m;
  std::vector<float> v;
  std::uint64_t steps = 0;

  AdamShard() = default;
  explicit AdamShard(std::span<const double> init)
      : master(init.begin(), init.end()), m(init.size(), 0.0F), v(init.size(), 0.0F) {}

  std::size_t size() const { return master.size(); }

  // Applies one update to the first grad.size() entries; any tail (padding)
  // is left untouched.
  void update(std::span<const double> grad, const AdamHyper& h) {
    if (grad.size() > master.size()) throw ValidationError("AdamShard: gradient longer than shard");
    ++steps;
    const double c1 = 1.0 - std::pow(h.beta1, static_cast<double>(steps));
    const double c2 = 1.0 - std::pow(h.beta2, static_cast<double>(steps));
    for (std::size_t i = 0; i < grad.size(); ++i) {
      const double g = grad[i];
      const double mi = h.beta1 * m[i] + (1.0 - h.beta1) * g;
      const double vi = h.beta2 * v[i] + (1.0 - h.beta2) * g * g;
      m[i] = static_cast<float>(mi);
      v[i] = static_cast<float>(vi);
      const double step = h.lr * (mi / c1) / (std::sqrt(vi / c2) + h.eps);
      master[i] = static_cast<float>(master[i] - step);
    }
  }
};

}  // namespace zeropp
