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

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <iomanip>
#include <ostream>
#include <string>
#include <vector>

#include "zeropp/error.hpp"
#include "zeropp/tensor.hpp"
#include "zeropp/topology.hpp"

namespace zeropp {

struct IndexRange {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const { return end - begin; }
  bool contains(std::size_t i) const { return i >= begin && i < end; }
  friend bool operator==(const IndexRange&, const IndexRange&) = default;
};

// Two-level ownership of a flat parameter vector of M elements.
//
// Primary: M is cut into P contiguous shards of ceil(M / P); rank r owns shard
// r. Secondary: ranks form P / G groups of G consecutive ranks, and within
// each group member i owns the i-th of G contiguous shards of ceil(M / G).
// Every group therefore holds one full replica. Trailing shards may be short
// (or empty) when M is not a multiple of the shard count.
class PartitionSpec {
 public:
  PartitionSpec(std::size_t params, int world, int secondary_group)
      : params_(params), world_(world), group_(secondary_group) {
    if (world < 1) throw ValidationError("PartitionSpec: world must be >= 1");
    if (secondary_group < 1 || world % secondary_group != 0) {
      throw ValidationError("PartitionSpec: secondary group size " +
                            std::to_string(secondary_group) + " does not divide world size " +
                            std::to_string(world));
    }
  }

  std::size_t params() const { return params_; }
  int world() const { return world_; }
  int secondary_group_size() const { return group_; }
  int secondary_groups() const { return world_ / group_; }  // alpha

  std::size_t primary_shard_len() const { return ceil_div(params_, static_cast<std::size_t>(world_)); }
  std::size_t secondary_shard_len() const { return ceil_div(params_, static_cast<std::size_t>(group_)); }

  IndexRange primary(Rank r) const { return clip(static_cast<std::size_t>(check(r)), primary_shard_len()); }
  IndexRange secondary(Rank r) const {
    return clip(static_cast<std::size_t>(check(r) % group_), secondary_shard_len());
  }
  int group_of(Rank r) const { return check(r) / group_; }

  Rank primary_owner(std::size_t index) const {
    check_index(index);
    return static_cast<Rank>(index / primary_shard_len());
  }
  Rank secondary_owner(std::size_t index, int group) const {
    check_index(index);
    if (group < 0 || group >= secondary_groups()) throw ValidationError("bad secondary group");
    return group * group_ + static_cast<Rank>(index / secondary_shard_len());
  }

 private:
  Rank check(Rank r) const {
    if (r < 0 || r >= world_) throw ValidationError("PartitionSpec: rank out of range");
    return r;
  }
  void check_index(std::size_t i) const {
    if (i >= params_) throw ValidationError("PartitionSpec: parameter index out of range");
  }
  IndexRange clip(std::size_t slot, std::size_t len) const {
    const std::size_t b = std::min(params_, slot * len);
    return {b, std::min(params_, b + len)};
  }

  std::size_t params_;
  int world_;
  int group_;
};

// secondary_group <= 0 selects one group per node.
inline PartitionSpec build_partitions(std::size_t params, const ClusterTopology& topo,
                                      int secondary_group = 0) {
  return PartitionSpec(params, topo.world(),
                       secondary_group > 0 ? secondary_group : topo.gpus_per_node());
}

enum class MemoryMode { dp, zero3, hpz, mics };

inline const char* to_string(MemoryMode m) {
  switch (m) {
    case MemoryMode::dp: return "DP";
    case MemoryMode::zero3: return "ZeRO3";
    case MemoryMode::hpz: return "hpZ";
    case MemoryMode::mics: return "MiCS";
  }
  return "?";
}

// Per-device bytes of model states: 2 bytes fp16 params + 2 bytes fp16 grads
// + K bytes of optimizer state per parameter. alpha is the number of
// secondary groups (world / group size).
struct MemoryModel {
  double params = 0;  // M
  double optimizer_multiplier = 12;  // K
  int world = 1;      // P
  int secondary_groups = 1;  // alpha

  void validate() const {
    if (params < 1 || world < 1) throw ValidationError("MemoryModel: M and P must be >= 1");
    if (optimizer_multiplier < 0) throw ValidationError("MemoryModel: K must be >= 0");
    if (secondary_groups < 1 || world % secondary_groups != 0) {
      throw ValidationError("MemoryModel: secondary group size does not divide P");
    }
  }
};

inline double memory_per_device(MemoryMode mode, const MemoryModel& m) {
  m.validate();
  const double states = (2.0 + 2.0 + m.optimizer_multiplier) * m.params;
  const double p = m.world;
  const double alpha = m.secondary_groups;
  switch (mode) {
    case MemoryMode::dp: return states;
    case MemoryMode::zero3: return states / p;
    // Primary shard of everything plus an fp16 replica split over P / alpha ranks.
    case MemoryMode::hpz: return states / p + 2.0 * m.params * alpha / p;
    // Whole model states replicated once per group.
    case MemoryMode::mics: return states * alpha / p;
  }
  return 0.0;
}

// CSV columns: mode, M, K, P, alpha, bytes, ratio_vs_ZeRO3.
inline void write_memory_csv(std::ostream& os, const MemoryModel& m) {
  os << "mode,M,K,P,alpha,bytes,ratio_vs_ZeRO3\n";
  const double z3 = memory_per_device(MemoryMode::zero3, m);
  for (MemoryMode mode : {MemoryMode::dp, MemoryMode::zero3, MemoryMode::hpz, MemoryMode::mics}) {
    const double b = memory_per_device(mode, m);
    os << to_string(mode) << ',' << std::setprecision(17) << m.params << ','
       << m.optimizer_multiplier << ',' << m.world << ',' << m.secondary_groups << ',' << b << ','
       << b / z3 << '\n';
  }
}

}  // namespace zeropp
