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

#include <cstddef>
#include <string>
#include <vector>

#include "zeropp/error.hpp"
#include "zeropp/tensor.hpp"
#include "zeropp/topology.hpp"

namespace zeropp {

// Slice permutation applied before the intra-node all-to-all of the 2-hop
// reduce-scatter. Slice ids run over [0, S*T) with T = X*Y; ids of stage s
// occupy [s*T, (s+1)*T). Within a stage, residue r moves to
//   f(r) = (r mod X) * Y + r div X,
// the transpose of the Y x X index grid. The reordered buffer satisfies
// A'[f(p)] = A[p], so A'[j] holds slice inverse[j].
struct ReorderPermutation {
  int gpus_per_node = 1;
  int nodes = 1;
  int stages = 1;
  std::vector<std::size_t> forward;  // slice id -> new position
  std::vector<std::size_t> inverse;  // new position -> slice id

  std::size_t size() const { return forward.size(); }
  // Slice ids listed in new-position order.
  const std::vector<std::size_t>& new_position_order() const { return inverse; }
};

inline ReorderPermutation reorder_mapping(int gpus_per_node, int nodes, int stages) {
  if (gpus_per_node < 1 || nodes < 1 || stages < 1) {
    throw ValidationError("reorder_mapping: X, Y and S must all be >= 1");
  }
  const auto x = static_cast<std::size_t>(gpus_per_node);
  const auto y = static_cast<std::size_t>(nodes);
  const std::size_t t = x * y;
  ReorderPermutation perm{gpus_per_node, nodes, stages, {}, {}};
  perm.forward.resize(t * static_cast<std::size_t>(stages));
  perm.inverse.resize(perm.forward.size());
  for (std::size_t p = 0; p < perm.forward.size(); ++p) {
    const std::size_t base = (p / t) * t;
    const std::size_t r = p % t;
    perm.forward[p] = base + (r % x) * y + r / x;
    perm.inverse[p] = base + (r % y) * x + r / y;
  }
  return perm;
}

// How a padded gradient of `padded_len` elements is cut for an S-stage 2-hop
// reduce-scatter. Rank q owns the contiguous partition
// [q * S * slice_len, (q + 1) * S * slice_len). Stage s carries the s-th
// sub-slice of every partition, so after all stages each rank has received
// exactly its own partition.
struct SliceLayout {
  int gpus_per_node = 1;
  int nodes = 1;
  int stages = 1;
  std::size_t padded_len = 0;
  std::size_t slice_len = 0;

  static SliceLayout make(const ClusterTopology& topo, int stages, std::size_t padded_len) {
    if (stages < 1) throw ValidationError("SliceLayout: stages must be >= 1");
    SliceLayout l{topo.gpus_per_node(), topo.nodes(), stages, padded_len, 0};
    const std::size_t per_rank = l.slices_per_rank();
    if (padded_len == 0 || padded_len % per_rank != 0) {
      throw ValidationError("SliceLayout: length " + std::to_string(padded_len) +
                            " is not a multiple of S*X*Y = " + std::to_string(per_rank));
    }
    l.slice_len = padded_len / per_rank;
    return l;
  }

  std::size_t ranks() const { return static_cast<std::size_t>(gpus_per_node) * nodes; }
  std::size_t slices_per_rank() const { return ranks() * static_cast<std::size_t>(stages); }
  std::size_t partition_len() const { return slice_len * static_cast<std::size_t>(stages); }

  // First element of partition `partition`'s sub-slice for `stage`.
  std::size_t offset(int stage, std::size_t partition) const {
    return (partition * static_cast<std::size_t>(stages) + static_cast<std::size_t>(stage)) *
           slice_len;
  }

  void require_block_aligned(std::size_t block) const {
    if (slice_len % block != 0) {
      throw ValidationError("SliceLayout: slice length " + std::to_string(slice_len) +
                            " is not a multiple of the codec block " + std::to_string(block));
    }
  }
};

}  // namespace zeropp
