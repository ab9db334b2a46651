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

// Collective algorithms over the lockstep simulator.
//
//   all_gather_baseline / all_gather_group   ring all-gather, fp16 wire
//   all_gather_qwz                           ring all-gather of blockwise codes
//   reduce_scatter_ring                      ring reduce-scatter, fp16 wire
//   reduce_scatter_ring_naive_quant          ring with a codec pass on every hop
//   qgz_1hop                                 quantize, one all-to-all, reduce
//   qgz_2hop                                 reorder, intra all-to-all, fused
//                                            reduce, inter all-to-all, reduce
//
// Every routine takes an optional `logical_len`: elements at or beyond it are
// alignment padding and are charged to the ledger's padding column.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "zeropp/error.hpp"
#include "zeropp/quantizer.hpp"
#include "zeropp/simnet.hpp"
#include "zeropp/slice_reorder.hpp"
#include "zeropp/tensor.hpp"
#include "zeropp/topology.hpp"

namespace zeropp {

inline constexpr std::size_t kAllValid = std::numeric_limits<std::size_t>::max();

inline const std::string kFwdAllGather = "fwd_allgather";
inline const std::string kBwdAllGather = "bwd_allgather";
inline const std::string kGradReduceScatter = "grad_reduce_scatter";

struct CollectiveResult {
  PerRank<FlatTensor> outputs;
  CollectiveTrace trace;
};

// Scales recorded by the 2-hop reduce-scatter. pass 1 is the sender-side
// quantization, pass 2 the fused intra-node reduction.
struct ScaleRecord {
  int pass = 0;
  std::size_t global_offset = 0;
  std::size_t len = 0;
  std::size_t block = 0;
  std::vector<double> scales;
};
using ScaleLog = PerRank<std::vector<ScaleRecord>>;

namespace detail {

inline std::size_t padding_elems(std::size_t begin, std::size_t n, std::size_t logical_len) {
  const std::size_t end = begin + n;
  const std::size_t valid_end = std::max(begin, std::min(end, logical_len));
  return end - valid_end;
}

inline ByteCounts flat_bytes(const FlatTensor& t, std::size_t begin, std::size_t logical_len) {
  const std::size_t pad = padding_elems(begin, t.size(), logical_len);
  return {(t.size() - pad) * std::uint64_t{t.wire_element_bytes}, 0,
          pad * std::uint64_t{t.wire_element_bytes}};
}

inline ByteCounts quant_bytes(const QuantizedTensor& q, std::size_t begin,
                              std::size_t logical_len) {
  const std::size_t pad = padding_elems(begin, q.original_len, logical_len);
  const std::uint64_t pad_bytes =
      q.config.is_passthrough() ? pad * 2 : pad * static_cast<std::size_t>(q.config.bit_width) / 8;
  return {q.code_bytes() - pad_bytes, q.scale_bytes(), pad_bytes};
}

inline FlatTensor slice(const FlatTensor& t, std::size_t begin, std::size_t n) {
  FlatTensor out(std::vector<double>(t.values.begin() + static_cast<std::ptrdiff_t>(begin),
                                     t.values.begin() + static_cast<std::ptrdiff_t>(begin + n)),
                 t.wire_element_bytes);
  out.codec_passes = t.codec_passes;
  return out;
}

inline void add_into(FlatTensor& acc, const FlatTensor& x) {
  for (std::size_t i = 0; i < acc.size(); ++i) acc.values[i] += x.values[i];
  acc.codec_passes = std::max(acc.codec_passes, x.codec_passes);
}

inline std::size_t common_length(const PerRank<FlatTensor>& xs, int world, const char* who) {
  if (static_cast<int>(xs.size()) != world) {
    throw ValidationError(std::string(who) + ": expected one tensor per rank");
  }
  for (const auto& x : xs) {
    if (x.size() != xs.front().size()) {
      throw ValidationError(std::string(who) + ": per-rank lengths differ");
    }
  }
  return xs.front().size();
}

// Ring all-gather inside contiguous groups of `group` ranks. chunks[r][i]
// ends up holding the shard of group member i.
template <typename Msg>
struct RingGatherState {
  std::vector<std::optional<Msg>> chunks;
};

template <typename Msg, typename BytesFn>
CollectiveTrace ring_all_gather(Network& net, const std::string& label, PerRank<Msg> shards,
                                int group, BytesFn&& bytes_of,
                                PerRank<RingGatherState<Msg>>& states) {
  const int world = net.world();
  if (group < 1 || world % group != 0) {
    throw ValidationError("all-gather group size must divide the world size");
  }
  states.assign(static_cast<std::size_t>(world), {});
  for (Rank r = 0; r < world; ++r) {
    auto& s = states[static_cast<std::size_t>(r)];
    s.chunks.resize(static_cast<std::size_t>(group));
    s.chunks[static_cast<std::size_t>(r % group)] = std::move(shards[static_cast<std::size_t>(r)]);
  }
  auto member = [group](Rank r, int i) { return (r / group) * group + (i % group + group) % group; };

  RankProgram<RingGatherState<Msg>, Msg> program;
  for (int step = 0; step + 1 < group; ++step) {
    program.phases.push_back({
        "ring_step_" + std::to_string(step),
        [=, &bytes_of](Rank r, RingGatherState<Msg>& s) {
          const int i = r % group;
          const int c = ((i - step) % group + group) % group;
          const Msg& chunk = *s.chunks[static_cast<std::size_t>(c)];
          return std::vector<Envelope<Msg>>{
              {r, member(r, i + 1), c, bytes_of(chunk, static_cast<std::size_t>(c)), chunk}};
        },
        [](Rank, RingGatherState<Msg>& s, std::vector<Envelope<Msg>>& in) {
          for (auto& e : in) s.chunks[static_cast<std::size_t>(e.tag)] = std::move(e.body);
        }});
  }
  return run_collective(net, CollectiveSpec{label, group, 1}, program, states);
}

}  // namespace detail

// Ring all-gather within contiguous groups of `group` ranks; every rank ends
// with the concatenation of its group's shards in rank order.
inline CollectiveResult all_gather_group(Network& net, const PerRank<FlatTensor>& shards,
                                         int group, const std::string& label,
                                         std::size_t logical_len = kAllValid) {
  const std::size_t shard_len = detail::common_length(shards, net.world(), "all_gather");
  for (const auto& s : shards) s.require_finite("all_gather");
  PerRank<detail::RingGatherState<FlatTensor>> states;
  auto bytes_of = [&](const FlatTensor& chunk, std::size_t c) {
    return detail::flat_bytes(chunk, c * shard_len, logical_len);
  };
  CollectiveResult out;
  out.trace = detail::ring_all_gather<FlatTensor>(net, label, shards, group, bytes_of, states);
  out.outputs.resize(states.size());
  for (std::size_t r = 0; r < states.size(); ++r) {
    FlatTensor full;
    full.wire_element_bytes = shards[r].wire_element_bytes;
    full.values.reserve(shard_len * static_cast<std::size_t>(group));
    for (auto& c : states[r].chunks) {
      full.values.insert(full.values.end(), c->values.begin(), c->values.end());
      full.codec_passes = std::max(full.codec_passes, c->codec_passes);
    }
    out.outputs[r] = std::move(full);
  }
  return out;
}

inline CollectiveResult all_gather_baseline(Network& net, const PerRank<FlatTensor>& shards,
                                            const std::string& label = kFwdAllGather,
                                            std::size_t logical_len = kAllValid) {
  return all_gather_group(net, shards, net.world(), label, logical_len);
}

// Each rank quantizes its shard once; codes and scales travel the ring and
// every rank dequantizes all shards, its own included.
inline CollectiveResult all_gather_qwz(Network& net, const PerRank<FlatTensor>& shards,
                                       const QuantConfig& cfg,
                                       const std::string& label = kFwdAllGather,
                                       std::size_t logical_len = kAllValid) {
  cfg.validate();
  const std::size_t shard_len = detail::common_length(shards, net.world(), "all_gather_qwz");
  PerRank<QuantizedTensor> encoded(shards.size());
  net.for_each_rank([&](Rank r) {
    encoded[static_cast<std::size_t>(r)] = quantize(shards[static_cast<std::size_t>(r)], cfg);
  });
  PerRank<detail::RingGatherState<QuantizedTensor>> states;
  auto bytes_of = [&](const QuantizedTensor& chunk, std::size_t c) {
    return detail::quant_bytes(chunk, c * shard_len, logical_len);
  };
  CollectiveResult out;
  out.trace = detail::ring_all_gather<QuantizedTensor>(net, label, std::move(encoded),
                                                       net.world(), bytes_of, states);
  out.outputs.resize(states.size());
  net.for_each_rank([&](Rank r) {
    auto& s = states[static_cast<std::size_t>(r)];
    FlatTensor full;
    full.values.reserve(shard_len * s.chunks.size());
    for (auto& c : s.chunks) {
      const FlatTensor part = dequantize(*c);
      full.values.insert(full.values.end(), part.values.begin(), part.values.end());
      full.codec_passes = std::max(full.codec_passes, part.codec_passes);
    }
    out.outputs[static_cast<std::size_t>(r)] = std::move(full);
  });
  return out;
}

namespace detail {

template <typename Msg>
struct RingReduceState {
  const FlatTensor* input = nullptr;
  Msg outgoing{};
  FlatTensor result;
};

// Ring reduce-scatter skeleton. At step t rank r forwards the running sum of
// chunk (r - t - 1) mod P; the receiver adds its own contribution. After P-1
// steps rank r holds chunk r summed over all ranks, accumulated in ring order
// starting from rank r+1. `encode` turns a running sum into a wire message,
// `decode` turns it back.
template <typename Msg, typename Encode, typename Decode, typename BytesFn>
CollectiveResult ring_reduce_scatter(Network& net, const PerRank<FlatTensor>& inputs,
                                     const std::string& label, Encode&& encode, Decode&& decode,
                                     BytesFn&& bytes_of, const char* who) {
  const int world = net.world();
  const std::size_t n = common_length(inputs, world, who);
  for (const auto& x : inputs) x.require_finite(who);
  if (n % static_cast<std::size_t>(world) != 0) {
    throw ValidationError(std::string(who) + ": length " + std::to_string(n) +
                          " is not divisible by world size " + std::to_string(world));
  }
  const std::size_t chunk = n / static_cast<std::size_t>(world);
  auto chunk_of = [&](Rank r, int c) {
    return slice(inputs[static_cast<std::size_t>(r)], static_cast<std::size_t>(c) * chunk, chunk);
  };
  auto mod = [world](int v) { return (v % world + world) % world; };

  PerRank<RingReduceState<Msg>> states(static_cast<std::size_t>(world));
  for (Rank r = 0; r < world; ++r) states[static_cast<std::size_t>(r)].input = &inputs[static_cast<std::size_t>(r)];
  if (world == 1) states[0].result = inputs[0];

  RankProgram<RingReduceState<Msg>, Msg> program;
  for (int step = 0; step + 1 < world; ++step) {
    const bool last = step + 2 == world;
    program.phases.push_back({
        "ring_step_" + std::to_string(step),
        [&, step](Rank r, RingReduceState<Msg>& s) {
          const int c = mod(r - step - 1);
          if (step == 0) s.outgoing = encode(chunk_of(r, c));
          return std::vector<Envelope<Msg>>{{r, mod(r + 1), c,
                                             bytes_of(s.outgoing, static_cast<std::size_t>(c) * chunk),
                                             std::move(s.outgoing)}};
        },
        [&, last](Rank r, RingReduceState<Msg>& s, std::vector<Envelope<Msg>>& in) {
          const auto& e = in.front();
          FlatTensor partial = decode(e.body);
          add_into(partial, chunk_of(r, e.tag));
          if (last) {
            s.result = std::move(partial);
          } else {
            s.outgoing = encode(partial);
          }
        }});
  }
  CollectiveResult out;
  out.trace = run_collective(net, CollectiveSpec{label, world, 1}, program, states);
  out.outputs.reserve(states.size());
  for (auto& s : states) out.outputs.push_back(std::move(s.result));
  return out;
}

}  // namespace detail

// Full-precision ring reduce-scatter with an fp16 wire: running sums travel
// as 2-byte elements but are accumulated in double.
inline CollectiveResult reduce_scatter_ring(Network& net, const PerRank<FlatTensor>& inputs,
                                            const std::string& label = kGradReduceScatter,
                                            std::size_t logical_len = kAllValid) {
  auto encode = [](FlatTensor t) {
    t.wire_element_bytes = 2;
    return t;
  };
  auto decode = [](const FlatTensor& t) { return t; };
  auto bytes_of = [&](const FlatTensor& t, std::size_t begin) {
    return detail::flat_bytes(t, begin, logical_len);
  };
  return detail::ring_reduce_scatter<FlatTensor>(net, inputs, label, encode, decode, bytes_of,
                                                 "reduce_scatter_ring");
}

// Negative control: the ring with a dequantize-add-quantize on every hop, so
// an element's running sum goes through world-1 sequential codec passes.
inline CollectiveResult reduce_scatter_ring_naive_quant(
    Network& net, const PerRank<FlatTensor>& inputs, const QuantConfig& cfg,
    const std::string& label = kGradReduceScatter, std::size_t logical_len = kAllValid) {
  cfg.validate();
  auto encode = [&](const FlatTensor& t) { return quantize(t, cfg); };
  auto decode = [](const QuantizedTensor& q) { return dequantize(q); };
  auto bytes_of = [&](const QuantizedTensor& q, std::size_t begin) {
    return detail::quant_bytes(q, begin, logical_len);
  };
  return detail::ring_reduce_scatter<QuantizedTensor>(net, inputs, label, encode, decode,
                                                      bytes_of, "reduce_scatter_ring_naive_quant");
}

namespace detail {

using SliceBundle = std::vector<QuantizedTensor>;

struct A2aState {
  const FlatTensor* input = nullptr;
  std::vector<QuantizedTensor> reduced;  // 2-hop: intra-node sums awaiting the inter hop
  FlatTensor result;
};

inline ByteCounts bundle_bytes(const SliceBundle& b, const std::vector<std::size_t>& offsets,
                               std::size_t logical_len) {
  ByteCounts total;
  for (std::size_t k = 0; k < b.size(); ++k) total += quant_bytes(b[k], offsets[k], logical_len);
  return total;
}

inline void log_scales(ScaleLog* log, Rank r, int pass, std::size_t offset,
                       const QuantizedTensor& q) {
  if (log == nullptr || q.config.is_passthrough()) return;
  (*log)[static_cast<std::size_t>(r)].push_back(
      {pass, offset, q.original_len, q.config.block_size, q.scales});
}

inline double max_abs(const FlatTensor& t) {
  double m = 0.0;
  for (double v : t.values) m = std::max(m, std::fabs(v));
  return m;
}

// Non-blocked mode shares one scale across every piece cut from the same
// source tensor; `range` is the max |x| of that source.
inline QuantizedTensor encode_piece(const FlatTensor& piece, const QuantConfig& cfg,
                                    double range) {
  if (cfg.mode == QuantMode::full_tensor) return quantize_with_range(piece, cfg, range);
  return quantize(piece, cfg);
}

// Dequantize-reduce-requantize of one column per output slice. Blocked and
// passthrough codecs use the fused kernel; the non-blocked codec must see all
// sums before it can pick its single scale.
inline std::vector<QuantizedTensor> reduce_columns(std::vector<std::vector<QuantizedTensor>>& cols,
                                                   const QuantConfig& cfg) {
  std::vector<QuantizedTensor> out;
  if (cfg.mode != QuantMode::full_tensor) {
    for (auto& c : cols) out.push_back(fused_dequant_reduce_quant(c, cfg));
    return out;
  }
  std::vector<FlatTensor> sums;
  double range = 0.0;
  for (auto& c : cols) {
    FlatTensor acc(std::vector<double>(c.front().original_len, 0.0));
    for (const auto& q : c) add_into(acc, dequantize(q));
    range = std::max(range, max_abs(acc));
    sums.push_back(std::move(acc));
  }
  for (const auto& t : sums) out.push_back(quantize_with_range(t, cfg, range));
  return out;
}

}  // namespace detail

// Quantize once, a single all-to-all over all ranks, dequantize, reduce in
// full precision (ascending source rank). Rank r ends with partition r.
inline CollectiveResult qgz_1hop(Network& net, const PerRank<FlatTensor>& inputs,
                                 const QuantConfig& cfg,
                                 const std::string& label = kGradReduceScatter,
                                 std::size_t logical_len = kAllValid) {
  cfg.validate();
  const int world = net.world();
  const std::size_t n = detail::common_length(inputs, world, "qgz_1hop");
  if (n % static_cast<std::size_t>(world) != 0) {
    throw ValidationError("qgz_1hop: length not divisible by world size");
  }
  const std::size_t part = n / static_cast<std::size_t>(world);
  if (!cfg.is_passthrough() && cfg.mode == QuantMode::blocked && part % cfg.block_size != 0) {
    throw ValidationError("qgz_1hop: partitions are not block-aligned");
  }

  PerRank<detail::A2aState> states(static_cast<std::size_t>(world));
  for (Rank r = 0; r < world; ++r) states[static_cast<std::size_t>(r)].input = &inputs[static_cast<std::size_t>(r)];

  RankProgram<detail::A2aState, detail::SliceBundle> program;
  program.phases.push_back(
      {"all_to_all",
       [&](Rank r, detail::A2aState& s) {
         std::vector<Envelope<detail::SliceBundle>> out;
         const double range = detail::max_abs(*s.input);
         for (Rank dst = 0; dst < world; ++dst) {
           const std::size_t off = static_cast<std::size_t>(dst) * part;
           detail::SliceBundle b{detail::encode_piece(detail::slice(*s.input, off, part), cfg, range)};
           out.push_back({r, dst, 0, detail::quant_bytes(b.front(), off, logical_len), std::move(b)});
         }
         return out;
       },
       [&](Rank, detail::A2aState& s, std::vector<Envelope<detail::SliceBundle>>& in) {
         s.result = FlatTensor(std::vector<double>(part, 0.0));
         for (const auto& e : in) detail::add_into(s.result, dequantize(e.body.front()));
       }});
  CollectiveResult out;
  out.trace = run_collective(net, CollectiveSpec{label, net.topology().nodes(), 1}, program, states);
  for (auto& s : states) out.outputs.push_back(std::move(s.result));
  return out;
}

struct QgzOptions {
  std::optional<QuantConfig> intra;  // codec of the first hop; defaults to cfg
  bool reorder = true;               // test hook: false reproduces misplacement
  ScaleLog* scale_log = nullptr;
};

// Hierarchical quantized reduce-scatter. Per pipeline stage:
//   1. reorder the stage's X*Y slices and quantize each (first codec pass),
//   2. intra-node all-to-all, Y slices to each local peer,
//   3. fused dequantize + reduce over the X node-mates + quantize (second pass),
//   4. inter-node all-to-all among ranks with the same local index,
//   5. dequantize and reduce over the Y nodes in full precision.
// Reductions run in ascending source rank. With reordering on, rank r ends
// with partition r of the input, exactly as a ring reduce-scatter.
inline CollectiveResult qgz_2hop(Network& net, const PerRank<FlatTensor>& inputs,
                                 const QuantConfig& cfg, int stages,
                                 const QgzOptions& opts = {},
                                 const std::string& label = kGradReduceScatter,
                                 std::size_t logical_len = kAllValid) {
  cfg.validate();
  const QuantConfig intra_cfg = opts.intra.value_or(cfg);
  intra_cfg.validate();
  const ClusterTopology& topo = net.topology();
  const int world = net.world();
  const int x = topo.gpus_per_node();
  const int y = topo.nodes();
  const std::size_t n = detail::common_length(inputs, world, "qgz_2hop");
  for (const auto& in : inputs) in.require_finite("qgz_2hop");
  const SliceLayout layout = SliceLayout::make(topo, stages, n);
  for (const QuantConfig* c : {&cfg, &intra_cfg}) {
    if (c->mode == QuantMode::blocked) layout.require_block_aligned(c->block_size);
  }
  const ReorderPermutation perm = reorder_mapping(x, y, stages);
  const std::size_t t = layout.ranks();
  const std::size_t len = layout.slice_len;
  if (opts.scale_log != nullptr) opts.scale_log->assign(static_cast<std::size_t>(world), {});

  // Partition index carried by new position j of a stage.
  auto partition_at = [&](int stage, std::size_t j) {
    const std::size_t base = static_cast<std::size_t>(stage) * t;
    return opts.reorder ? perm.inverse[base + j] - base : j;
  };

  PerRank<detail::A2aState> states(static_cast<std::size_t>(world));
  for (Rank r = 0; r < world; ++r) {
    auto& s = states[static_cast<std::size_t>(r)];
    s.input = &inputs[static_cast<std::size_t>(r)];
    s.result = FlatTensor(std::vector<double>(layout.partition_len(), 0.0));
  }

  RankProgram<detail::A2aState, detail::SliceBundle> program;
  for (int stage = 0; stage < stages; ++stage) {
    program.phases.push_back(
        {"intra_a2a_stage_" + std::to_string(stage),
         [&, stage](Rank r, detail::A2aState& s) {
           const int node = topo.node_of(r);
           const double range = detail::max_abs(*s.input);
           std::vector<Envelope<detail::SliceBundle>> out;
           for (int peer = 0; peer < x; ++peer) {
             detail::SliceBundle bundle;
             std::vector<std::size_t> offsets;
             for (int k = 0; k < y; ++k) {
               const std::size_t j = static_cast<std::size_t>(peer) * static_cast<std::size_t>(y) +
                                     static_cast<std::size_t>(k);
               const std::size_t off = layout.offset(stage, partition_at(stage, j));
               bundle.push_back(detail::encode_piece(detail::slice(*s.input, off, len), intra_cfg, range));
               detail::log_scales(opts.scale_log, r, 1, off, bundle.back());
               offsets.push_back(off);
             }
             const ByteCounts bytes = detail::bundle_bytes(bundle, offsets, logical_len);
             out.push_back({r, topo.rank_of(node, peer), 0, bytes, std::move(bundle)});
           }
           return out;
         },
         [&, stage](Rank r, detail::A2aState& s, std::vector<Envelope<detail::SliceBundle>>& in) {
           std::vector<std::vector<QuantizedTensor>> columns(static_cast<std::size_t>(y));
           for (int k = 0; k < y; ++k) {
             for (auto& e : in) {
               columns[static_cast<std::size_t>(k)].push_back(std::move(e.body[static_cast<std::size_t>(k)]));
             }
           }
           s.reduced = detail::reduce_columns(columns, cfg);
           for (int k = 0; k < y; ++k) {
             const std::size_t j = static_cast<std::size_t>(topo.local_of(r)) * static_cast<std::size_t>(y) +
                                   static_cast<std::size_t>(k);
             detail::log_scales(opts.scale_log, r, 2, layout.offset(stage, partition_at(stage, j)),
                                s.reduced.back());
           }
         }});
    program.phases.push_back(
        {"inter_a2a_stage_" + std::to_string(stage),
         [&, stage](Rank r, detail::A2aState& s) {
           const int local = topo.local_of(r);
           std::vector<Envelope<detail::SliceBundle>> out;
           for (int k = 0; k < y; ++k) {
             const std::size_t j = static_cast<std::size_t>(local) * static_cast<std::size_t>(y) +
                                   static_cast<std::size_t>(k);
             const std::size_t off = layout.offset(stage, partition_at(stage, j));
             detail::SliceBundle bundle{std::move(s.reduced[static_cast<std::size_t>(k)])};
             const ByteCounts bytes = detail::quant_bytes(bundle.front(), off, logical_len);
             out.push_back({r, topo.rank_of(k, local), 0, bytes, std::move(bundle)});
           }
           return out;
         },
         [&, stage](Rank, detail::A2aState& s, std::vector<Envelope<detail::SliceBundle>>& in) {
           FlatTensor acc(std::vector<double>(len, 0.0));
           for (const auto& e : in) detail::add_into(acc, dequantize(e.body.front()));
           std::copy(acc.values.begin(), acc.values.end(),
                     s.result.values.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(stage) * len));
           s.result.codec_passes = std::max(s.result.codec_passes, acc.codec_passes);
         }});
  }
  CollectiveResult out;
  out.trace = run_collective(net, CollectiveSpec{label, y, stages}, program, states);
  for (auto& s : states) out.outputs.push_back(std::move(s.result));
  return out;
}

}  // namespace zeropp
