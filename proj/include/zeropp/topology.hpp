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
#include <map>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "zeropp/error.hpp"

namespace zeropp {

using Rank = int;

enum class LinkClass { intra, inter };

inline const char* to_string(LinkClass c) { return c == LinkClass::intra ? "intra" : "inter"; }

// X GPUs per node, Y nodes. Ranks are dense and node-major: rank r lives on
// node r / X at local index r % X.
class ClusterTopology {
 public:
  ClusterTopology(int gpus_per_node, int nodes) : gpus_per_node_(gpus_per_node), nodes_(nodes) {
    if (gpus_per_node < 1 || nodes < 1) {
      throw ConfigError("ClusterTopology: gpus_per_node and nodes must be >= 1");
    }
  }

  int gpus_per_node() const { return gpus_per_node_; }
  int nodes() const { return nodes_; }
  int world() const { return gpus_per_node_ * nodes_; }

  void check_rank(Rank r) const {
    if (r < 0 || r >= world()) {
      throw ValidationError("rank " + std::to_string(r) + " outside [0, " +
                            std::to_string(world()) + ")");
    }
  }
  int node_of(Rank r) const {
    check_rank(r);
    return r / gpus_per_node_;
  }
  int local_of(Rank r) const {
    check_rank(r);
    return r % gpus_per_node_;
  }
  Rank rank_of(int node, int local) const { return node * gpus_per_node_ + local; }

  friend bool operator==(const ClusterTopology&, const ClusterTopology&) = default;

 private:
  int gpus_per_node_;
  int nodes_;
};

inline LinkClass classify_link(Rank src, Rank dst, const ClusterTopology& topo) {
  return topo.node_of(src) == topo.node_of(dst) ? LinkClass::intra : LinkClass::inter;
}

struct LinkCost {
  double alpha = 0.0;  // seconds per message
  double beta = 1.0;   // bytes per second
};

struct LinkParams {
  LinkCost intra{2e-6, 150e9};
  LinkCost inter{10e-6, 12.5e9};

  const LinkCost& of(LinkClass c) const { return c == LinkClass::intra ? intra : inter; }

  void validate() const {
    for (const LinkCost* c : {&intra, &inter}) {
      if (c->alpha < 0.0 || !(c->beta > 0.0)) {
        throw ConfigError("LinkParams: need alpha >= 0 and beta > 0");
      }
    }
  }
};

struct ByteCounts {
  std::uint64_t payload = 0;
  std::uint64_t metadata = 0;  // quantization scales
  std::uint64_t padding = 0;   // alignment filler

  std::uint64_t total() const { return payload + metadata + padding; }
  ByteCounts& operator+=(const ByteCounts& o) {
    payload += o.payload;
    metadata += o.metadata;
    padding += o.padding;
    return *this;
  }
  friend bool operator==(const ByteCounts&, const ByteCounts&) = default;
};

// Byte counters keyed by (collective label, link class), plus per-rank
// send/receive totals per label. Self-transfers are never recorded.
//
// The normalized figure is expressed in fp16-model units: inter-node payload
// leaving one node, divided by 2*M and by the completion factor (n-1)/n of
// the exchange that crosses nodes (n participants). The completion factor
// turns the finite-cluster count into the large-cluster unit in which "M"
// means one full fp16 model, so a baseline ring collective reads exactly 1.
class TrafficLedger {
 public:
  explicit TrafficLedger(ClusterTopology topo) : topo_(topo) {}

  const ClusterTopology& topology() const { return topo_; }

  // Declares how many participants the node-crossing exchange of `label` has.
  void declare(const std::string& label, int exchange_width) {
    if (exchange_width < 1) throw ValidationError("TrafficLedger: exchange width must be >= 1");
    auto [it, inserted] = width_.emplace(label, exchange_width);
    if (!inserted && it->second != exchange_width) {
      throw ValidationError("TrafficLedger: conflicting exchange width for " + label);
    }
    rows_.try_emplace({label, LinkClass::intra});
    rows_.try_emplace({label, LinkClass::inter});
  }

  void record(const std::string& label, Rank src, Rank dst, const ByteCounts& bytes) {
    if (src == dst) return;
    const LinkClass c = classify_link(src, dst, topo_);
    rows_[{label, c}] += bytes;
    auto& per_rank = per_rank_[label];
    if (per_rank.empty()) per_rank.assign(static_cast<std::size_t>(topo_.world()), {});
    per_rank[static_cast<std::size_t>(src)].first += bytes.total();
    per_rank[static_cast<std::size_t>(dst)].second += bytes.total();
  }

  ByteCounts bytes(const std::string& label, LinkClass c) const {
    auto it = rows_.find({label, c});
    return it == rows_.end() ? ByteCounts{} : it->second;
  }

  std::uint64_t sent(const std::string& label, Rank r) const { return rank_total(label, r).first; }
  std::uint64_t received(const std::string& label, Rank r) const {
    return rank_total(label, r).second;
  }

  std::vector<std::string> labels() const {
    std::vector<std::string> out;
    for (const auto& [key, _] : rows_) {
      if (out.empty() || out.back() != key.first) out.push_back(key.first);
    }
    return out;
  }

  int exchange_width(const std::string& label) const {
    auto it = width_.find(label);
    return it == width_.end() ? topo_.world() : it->second;
  }

  // Volume of one collective in fp16-model units (see class comment).
  double normalized_volume(const std::string& label, std::uint64_t model_params) const {
    return normalize(bytes(label, LinkClass::inter).payload, label, model_params);
  }
  double normalized_metadata(const std::string& label, std::uint64_t model_params) const {
    return normalize(bytes(label, LinkClass::inter).metadata, label, model_params);
  }

  void merge(const TrafficLedger& other) {
    if (!(other.topo_ == topo_)) throw ValidationError("TrafficLedger::merge: topology mismatch");
    for (const auto& [label, w] : other.width_) declare(label, w);
    for (const auto& [key, b] : other.rows_) rows_[key] += b;
    for (const auto& [label, v] : other.per_rank_) {
      auto& mine = per_rank_[label];
      if (mine.empty()) mine.assign(v.size(), {});
      for (std::size_t i = 0; i < v.size(); ++i) {
        mine[i].first += v[i].first;
        mine[i].second += v[i].second;
      }
    }
  }

  // CSV columns: collective, link_class, payload_bytes, metadata_bytes,
  // padding_bytes, normalized_volume. Intra rows carry an empty volume.
  void write_csv(std::ostream& os, std::uint64_t model_params) const {
    os << "collective,link_class,payload_bytes,metadata_bytes,padding_bytes,normalized_volume\n";
    for (const auto& [key, b] : rows_) {
      os << key.first << ',' << to_string(key.second) << ',' << b.payload << ',' << b.metadata
         << ',' << b.padding << ',';
      if (key.second == LinkClass::inter) {
        os << std::setprecision(17) << normalized_volume(key.first, model_params);
      }
      os << '\n';
    }
  }

 private:
  double normalize(std::uint64_t inter_bytes, const std::string& label,
                   std::uint64_t model_params) const {
    const int n = exchange_width(label);
    if (inter_bytes == 0 || n < 2) return 0.0;
    // bytes_per_node / (2M) / ((n-1)/n), kept as one exact integer ratio.
    const double num = static_cast<double>(inter_bytes) * n;
    const double den = static_cast<double>(topo_.nodes()) * 2.0 *
                       static_cast<double>(model_params) * (n - 1);
    return num / den;
  }

  std::pair<std::uint64_t, std::uint64_t> rank_total(const std::string& label, Rank r) const {
    topo_.check_rank(r);
    auto it = per_rank_.find(label);
    if (it == per_rank_.end()) return {0, 0};
    return it->second[static_cast<std::size_t>(r)];
  }

  ClusterTopology topo_;
  std::map<std::pair<std::string, LinkClass>, ByteCounts> rows_;
  std::map<std::string, int> width_;
  std::map<std::string, std::vector<std::pair<std::uint64_t, std::uint64_t>>> per_rank_;
};

// Sum of per-collective normalized volumes for everything in the ledger.
inline double normalized_cross_node_volume(const TrafficLedger& ledger,
                                           std::uint64_t model_params) {
  double v = 0.0;
  for (const auto& label : ledger.labels()) v += ledger.normalized_volume(label, model_params);
  return v;
}

// What one lockstep phase put on the wires, per sending rank.
struct PhaseRecord {
  std::string name;
  std::vector<std::uint64_t> intra_bytes, inter_bytes;
  std::vector<std::uint32_t> intra_messages, inter_messages;

  explicit PhaseRecord(std::string n = {}, int world = 0)
      : name(std::move(n)),
        intra_bytes(static_cast<std::size_t>(world)),
        inter_bytes(static_cast<std::size_t>(world)),
        intra_messages(static_cast<std::size_t>(world)),
        inter_messages(static_cast<std::size_t>(world)) {}

  std::uint64_t max_bytes(LinkClass c) const {
    const auto& v = c == LinkClass::intra ? intra_bytes : inter_bytes;
    return v.empty() ? 0 : *std::max_element(v.begin(), v.end());
  }
  std::uint32_t max_messages(LinkClass c) const {
    const auto& v = c == LinkClass::intra ? intra_messages : inter_messages;
    return v.empty() ? 0 : *std::max_element(v.begin(), v.end());
  }
  bool crosses_nodes() const { return max_bytes(LinkClass::inter) > 0 || max_messages(LinkClass::inter) > 0; }
};

struct CollectiveTrace {
  std::string label;
  int stages = 1;  // pipeline stages the collective was run with
  std::vector<PhaseRecord> phases;
};

struct LatencyEstimate {
  std::string label;
  double total = 0.0;
  double intra = 0.0;
  double inter = 0.0;
  double compute = 0.0;
  int stages = 1;
};

// Phase cost totals of a trace, split into node-local phases and phases that
// touch an inter-node link. A phase is costed on its busiest rank, using the
// inter-node link parameters whenever any of its traffic crosses nodes.
struct PhaseTotals {
  double intra_messages = 0, inter_messages = 0;  // summed per-phase maxima
  double intra_bytes = 0, inter_bytes = 0;
};

inline PhaseTotals phase_totals(const CollectiveTrace& trace) {
  PhaseTotals t;
  for (const auto& p : trace.phases) {
    if (p.crosses_nodes()) {
      t.inter_messages += p.max_messages(LinkClass::inter);
      t.inter_bytes += static_cast<double>(p.max_bytes(LinkClass::inter));
    } else {
      t.intra_messages += p.max_messages(LinkClass::intra);
      t.intra_bytes += static_cast<double>(p.max_bytes(LinkClass::intra));
    }
  }
  return t;
}

// Latency of a traced collective when its input is cut into `stages` chunks.
// Message counts scale with the number of chunks, byte totals do not. With
// overlap, intra- and inter-node transfers of consecutive chunks run
// concurrently:
//   T = (T_intra + T_inter) / S + (S - 1) * max(T_intra, T_inter) / S
// Without overlap the two totals simply add. `compute_seconds` (codec work)
// is added on top and never hidden.
inline LatencyEstimate estimate_latency(const CollectiveTrace& trace, const LinkParams& links,
                                        int stages, bool overlap, double compute_seconds = 0.0) {
  if (stages < 1) throw ValidationError("estimate_latency: stages must be >= 1");
  links.validate();
  const PhaseTotals t = phase_totals(trace);
  const double chunk_factor = static_cast<double>(stages) / std::max(trace.stages, 1);
  LatencyEstimate est;
  est.label = trace.label;
  est.stages = stages;
  est.intra = links.intra.alpha * t.intra_messages * chunk_factor + t.intra_bytes / links.intra.beta;
  est.inter = links.inter.alpha * t.inter_messages * chunk_factor + t.inter_bytes / links.inter.beta;
  est.compute = compute_seconds;
  const double s = static_cast<double>(stages);
  if (overlap) {
    est.total = (est.intra + est.inter) / s + (s - 1.0) * std::max(est.intra, est.inter) / s;
  } else {
    est.total = est.intra + est.inter;
  }
  est.total += est.compute;
  return est;
}

}  // namespace zeropp
