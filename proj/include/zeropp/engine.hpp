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

// ZeRO-3 data-parallel training over the simulated cluster, with the three
// communication optimizations as independent toggles:
//   qwZ  forward/backward weight all-gather carries INT8 blocks,
//   hpZ  backward all-gather runs within a secondary group (one node by
//        default) from a replica cut out of the forward-gathered weights,
//   qgZ  gradient reduce-scatter is the 2-hop quantized all-to-all.
// Optimizer state lives only on the primary shard of each rank.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <iomanip>
#include <limits>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "zeropp/collectives.hpp"
#include "zeropp/error.hpp"
#include "zeropp/half.hpp"
#include "zeropp/optimizer.hpp"
#include "zeropp/partitioner.hpp"
#include "zeropp/quantizer.hpp"
#include "zeropp/simnet.hpp"
#include "zeropp/tensor.hpp"
#include "zeropp/topology.hpp"
#include "zeropp/toy_model.hpp"

namespace zeropp {

struct ZeroConfig {
  bool qwz = false;
  bool hpz = false;
  bool qgz = false;
  QuantConfig weight_codec = QuantConfig::int8();
  QuantConfig grad_codec = QuantConfig::int4();
  std::optional<QuantConfig> intra_grad_codec;  // first qgZ hop; defaults to grad_codec
  int stages = 1;
  int secondary_group = 0;  // <= 0: one group per node
  double qgz_fraction = 1.0;  // share of the run, from step 0, with qgZ on

  static ZeroConfig zero3() { return {}; }
  static ZeroConfig zeropp() {
    ZeroConfig c;
    c.qwz = c.hpz = c.qgz = true;
    return c;
  }

  int group_size(const ClusterTopology& topo) const {
    return secondary_group > 0 ? secondary_group : topo.gpus_per_node();
  }

  bool qgz_active(std::size_t step, std::size_t total_steps) const {
    return qgz && static_cast<double>(step) < qgz_fraction * static_cast<double>(total_steps);
  }

  void validate(const ClusterTopology& topo) const {
    weight_codec.validate();
    grad_codec.validate();
    if (intra_grad_codec) intra_grad_codec->validate();
    if (stages < 1) throw ConfigError("ZeroConfig: stages must be >= 1");
    if (!(qgz_fraction >= 0.0 && qgz_fraction <= 1.0)) {
      throw ConfigError("ZeroConfig: qgz_fraction must lie in [0, 1]");
    }
    const int g = group_size(topo);
    if (hpz && (g < 1 || topo.world() % g != 0)) {
      throw ConfigError("ZeroConfig: secondary group size " + std::to_string(g) +
                        " does not divide world size " + std::to_string(topo.world()));
    }
  }
};

// Length the flat parameter vector is padded to. Every rank's shard has the
// same length, and when qgZ may run, every 2-hop slice is a whole number of
// codec blocks.
inline std::size_t padded_length(std::size_t params, const ClusterTopology& topo,
                                 const ZeroConfig& cfg) {
  std::size_t unit = static_cast<std::size_t>(topo.world());
  if (cfg.qgz && cfg.qgz_fraction > 0.0) {
    std::size_t align = 1;
    for (const QuantConfig& c : {cfg.grad_codec, cfg.intra_grad_codec.value_or(cfg.grad_codec)}) {
      if (c.mode == QuantMode::blocked) align = std::lcm(align, c.block_size);
    }
    unit *= static_cast<std::size_t>(cfg.stages) * align;
  }
  return round_up(std::max<std::size_t>(params, 1), unit);
}

// The three collectives of one iteration over a padded flat parameter vector
// of `params` logical elements.
struct CommPlan {
  ClusterTopology topo;
  ZeroConfig cfg;
  std::size_t params = 0;
  std::size_t padded = 0;

  CommPlan(ClusterTopology t, ZeroConfig c, std::size_t m)
      : topo(t), cfg(std::move(c)), params(m), padded(padded_length(m, t, cfg)) {
    cfg.validate(topo);
  }

  std::size_t shard_len() const { return padded / static_cast<std::size_t>(topo.world()); }
};

inline void half_round_in_place(FlatTensor& t) {
  for (double& v : t.values) v = half::round(v);
}

// Forward all-gather of the fp16 primary shards. With qwZ the received
// blocks are dequantized and then rounded to half precision.
inline PerRank<FlatTensor> forward_gather(Network& net, const CommPlan& plan,
                                          const PerRank<FlatTensor>& shards,
                                          std::vector<CollectiveTrace>& traces) {
  CollectiveResult r = plan.cfg.qwz
                           ? all_gather_qwz(net, shards, plan.cfg.weight_codec, kFwdAllGather, plan.params)
                           : all_gather_baseline(net, shards, kFwdAllGather, plan.params);
  if (plan.cfg.qwz) {
    net.for_each_rank([&](Rank k) { half_round_in_place(r.outputs[static_cast<std::size_t>(k)]); });
  }
  traces.push_back(std::move(r.trace));
  return std::move(r.outputs);
}

// Backward all-gather. Without hpZ this repeats the forward gather from the
// primary shards. With hpZ each rank keeps the slice of the forward weights
// it owns in the secondary partition and the gather stays inside its group.
inline PerRank<FlatTensor> backward_gather(Network& net, const CommPlan& plan,
                                           const PerRank<FlatTensor>& shards,
                                           const PerRank<FlatTensor>& forward_weights,
                                           std::vector<CollectiveTrace>& traces) {
  if (!plan.cfg.hpz) {
    CollectiveResult r =
        plan.cfg.qwz ? all_gather_qwz(net, shards, plan.cfg.weight_codec, kBwdAllGather, plan.params)
                     : all_gather_baseline(net, shards, kBwdAllGather, plan.params);
    if (plan.cfg.qwz) {
      net.for_each_rank([&](Rank k) { half_round_in_place(r.outputs[static_cast<std::size_t>(k)]); });
    }
    traces.push_back(std::move(r.trace));
    return std::move(r.outputs);
  }
  const PartitionSpec spec(plan.padded, plan.topo.world(), plan.cfg.group_size(plan.topo));
  PerRank<FlatTensor> secondary(forward_weights.size());
  for (Rank k = 0; k < plan.topo.world(); ++k) {
    const IndexRange range = spec.secondary(k);
    secondary[static_cast<std::size_t>(k)] =
        detail::slice(forward_weights[static_cast<std::size_t>(k)], range.begin, range.size());
  }
  CollectiveResult r = all_gather_group(net, secondary, spec.secondary_group_size(), kBwdAllGather,
                                        plan.params);
  traces.push_back(std::move(r.trace));
  return std::move(r.outputs);
}

// Gradient reduce-scatter; rank r receives the sum over ranks of its primary
// shard of the (half-rounded, padded) gradients.
inline PerRank<FlatTensor> reduce_gradients(Network& net, const CommPlan& plan,
                                            const PerRank<FlatTensor>& grads, bool use_qgz,
                                            std::vector<CollectiveTrace>& traces) {
  CollectiveResult r;
  if (use_qgz) {
    QgzOptions opts;
    opts.intra = plan.cfg.intra_grad_codec;
    r = qgz_2hop(net, grads, plan.cfg.grad_codec, plan.cfg.stages, opts, kGradReduceScatter,
                 plan.params);
  } else {
    r = reduce_scatter_ring(net, grads, kGradReduceScatter, plan.params);
  }
  traces.push_back(std::move(r.trace));
  return std::move(r.outputs);
}

// Alpha-beta estimate of a whole iteration's communication. Pipelined
// collectives overlap their intra- and inter-node transfers.
inline double iteration_latency(const std::vector<CollectiveTrace>& traces, const LinkParams& links) {
  double total = 0.0;
  for (const auto& t : traces) total += estimate_latency(t, links, t.stages, t.stages > 1).total;
  return total;
}

struct IterationVolumes {
  double fwd = 0.0;
  double bwd = 0.0;
  double rs = 0.0;
  double fwd_metadata = 0.0;
  double bwd_metadata = 0.0;
  double rs_metadata = 0.0;
  double latency_s = 0.0;

  double total() const { return fwd + bwd + rs; }
};

inline IterationVolumes read_volumes(const TrafficLedger& ledger, std::size_t params) {
  IterationVolumes v;
  v.fwd = ledger.normalized_volume(kFwdAllGather, params);
  v.bwd = ledger.normalized_volume(kBwdAllGather, params);
  v.rs = ledger.normalized_volume(kGradReduceScatter, params);
  v.fwd_metadata = ledger.normalized_metadata(kFwdAllGather, params);
  v.bwd_metadata = ledger.normalized_metadata(kBwdAllGather, params);
  v.rs_metadata = ledger.normalized_metadata(kGradReduceScatter, params);
  return v;
}

// One communication-only iteration on a flat model of `params` elements with
// random fp16 weights and gradients. Used for the volume report, where no
// model arithmetic is needed.
inline IterationVolumes communication_iteration(const ClusterTopology& topo, const ZeroConfig& cfg,
                                                std::size_t params, std::uint64_t seed,
                                                const LinkParams& links = {},
                                                Scheduler scheduler = Scheduler::sequential,
                                                TrafficLedger* ledger_out = nullptr) {
  const CommPlan plan(topo, cfg, params);
  Network net(topo, scheduler);
  const std::size_t len = plan.shard_len();
  auto random_fp16 = [&](std::uint64_t stream, std::size_t n, std::size_t valid) {
    std::mt19937_64 rng(seed * 0x9e3779b97f4a7c15ULL + stream);
    std::normal_distribution<double> normal(0.0, 1.0);
    FlatTensor t(std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < valid; ++i) t.values[i] = half::round(normal(rng));
    return t;
  };
  PerRank<FlatTensor> shards(static_cast<std::size_t>(topo.world()));
  PerRank<FlatTensor> grads(shards.size());
  for (Rank r = 0; r < topo.world(); ++r) {
    const std::size_t begin = static_cast<std::size_t>(r) * len;
    const std::size_t valid = begin >= params ? 0 : std::min(len, params - begin);
    shards[static_cast<std::size_t>(r)] = random_fp16(2 * static_cast<std::uint64_t>(r), len, valid);
    grads[static_cast<std::size_t>(r)] =
        random_fp16(2 * static_cast<std::uint64_t>(r) + 1, plan.padded, params);
  }
  std::vector<CollectiveTrace> traces;
  {
    const PerRank<FlatTensor> fwd = forward_gather(net, plan, shards, traces);
    backward_gather(net, plan, shards, fwd, traces);
  }
  reduce_gradients(net, plan, grads, cfg.qgz && cfg.qgz_fraction > 0.0, traces);
  IterationVolumes v = read_volumes(net.ledger(), params);
  v.latency_s = iteration_latency(traces, links);
  if (ledger_out != nullptr) *ledger_out = net.ledger();
  return v;
}

struct TrainOptions {
  ClusterTopology topology{4, 2};
  std::vector<std::size_t> widths{16, 64, 64, 64, 4};
  std::size_t steps = 500;
  std::uint64_t seed = 1;
  std::size_t batch_per_rank = 8;
  std::size_t validation_samples = 512;
  AdamHyper adam{};
  LinkParams links{};
  Scheduler scheduler = Scheduler::sequential;
};

struct TrainRow {
  std::size_t step = 0;
  double loss = 0.0;
  double fwd_vol = 0.0;
  double bwd_vol = 0.0;
  double rs_vol = 0.0;
  double est_latency_s = 0.0;
  bool qwz = false;
  bool hpz = false;
  bool qgz = false;
};

struct TrainRecord {
  std::string variant;
  std::vector<TrainRow> rows;
  double initial_validation_loss = 0.0;
  double final_validation_loss = std::numeric_limits<double>::quiet_NaN();
  bool diverged = false;
  std::optional<std::size_t> divergence_step;
  std::string divergence_reason;

  void write_csv(std::ostream& os) const {
    os << "step,loss,fwd_vol,bwd_ag_vol,rs_vol,est_latency_s,qwZ,hpZ,qgZ\n";
    os << std::setprecision(17);
    for (const auto& r : rows) {
      os << r.step << ',' << r.loss << ',' << r.fwd_vol << ',' << r.bwd_vol << ',' << r.rs_vol << ','
         << r.est_latency_s << ',' << int{r.qwz} << ',' << int{r.hpz} << ',' << int{r.qgz} << '\n';
    }
  }
};

// Data-parallel trainer over all ranks of the simulated cluster. Each rank
// trains on its own batch; step t of rank r reads data stream t * P + r.
class ZeroEngine {
 public:
  ZeroEngine(TrainOptions opts, ZeroConfig cfg)
      : opts_(std::move(opts)),
        model_(opts_.widths),
        data_(model_, opts_.seed),
        plan_(opts_.topology, std::move(cfg), model_.param_count()) {
    if (opts_.batch_per_rank == 0) throw ConfigError("batch_per_rank must be >= 1");
    opts_.links.validate();
    std::vector<double> init = model_.init(opts_.seed);
    init.resize(plan_.padded, 0.0);
    const std::size_t len = plan_.shard_len();
    for (Rank r = 0; r < world(); ++r) {
      shards_.emplace_back(std::span<const double>(init).subspan(static_cast<std::size_t>(r) * len, len));
    }
  }

  const ToyModel& model() const { return model_; }
  const CommPlan& plan() const { return plan_; }
  const ZeroConfig& config() const { return plan_.cfg; }
  const TrainOptions& options() const { return opts_; }
  int world() const { return opts_.topology.world(); }
  std::size_t steps_done() const { return step_; }
  const PerRank<AdamShard>& optimizer_shards() const { return shards_; }

  // Logical parameters reassembled from the fp32 masters.
  std::vector<double> master_params() const {
    std::vector<double> out;
    out.reserve(plan_.padded);
    for (const auto& s : shards_) out.insert(out.end(), s.master.begin(), s.master.end());
    out.resize(model_.param_count());
    return out;
  }

  double validation_loss() const {
    return model_.loss(master_params(), data_.validation(opts_.validation_samples));
  }

  // Per-rank weights used by the last step's forward and backward passes.
  const PerRank<FlatTensor>& last_forward_weights() const { return last_fwd_; }
  const PerRank<FlatTensor>& last_backward_weights() const { return last_bwd_; }
  const TrafficLedger& last_ledger() const { return *last_ledger_; }

  TrainRow step() { return step(plan_.cfg.qgz_active(step_, opts_.steps)); }

  TrainRow step(bool use_qgz) {
    if (use_qgz && !plan_.cfg.qgz) throw ConfigError("qgZ requested but not enabled");
    Network net(opts_.topology, opts_.scheduler);
    const auto n = static_cast<std::size_t>(world());
    const std::size_t m = model_.param_count();

    PerRank<FlatTensor> fp16(n);
    for (std::size_t r = 0; r < n; ++r) {
      std::vector<double> v(shards_[r].master.begin(), shards_[r].master.end());
      for (double& x : v) x = half::round(x);
      fp16[r] = FlatTensor(std::move(v));
    }

    std::vector<CollectiveTrace> traces;
    last_fwd_ = forward_gather(net, plan_, fp16, traces);

    PerRank<Batch> batches(n);
    PerRank<ForwardCache> caches(n);
    std::vector<double> losses(n);
    net.for_each_rank([&](Rank r) {
      const auto i = static_cast<std::size_t>(r);
      batches[i] = data_.sample(step_ * n + i, opts_.batch_per_rank);
      losses[i] = model_.loss(std::span<const double>(last_fwd_[i].values).first(m), batches[i], &caches[i]);
    });

    last_bwd_ = backward_gather(net, plan_, fp16, last_fwd_, traces);

    PerRank<FlatTensor> grads(n);
    net.for_each_rank([&](Rank r) {
      const auto i = static_cast<std::size_t>(r);
      std::vector<double> g =
          model_.backward(std::span<const double>(last_bwd_[i].values).first(m), batches[i], caches[i]);
      for (double& x : g) x = half::round(x);
      g.resize(plan_.padded, 0.0);
      grads[i] = FlatTensor(std::move(g));
    });

    const PerRank<FlatTensor> reduced = reduce_gradients(net, plan_, grads, use_qgz, traces);

    const std::size_t len = plan_.shard_len();
    net.for_each_rank([&](Rank r) {
      const auto i = static_cast<std::size_t>(r);
      const std::size_t begin = i * len;
      const std::size_t valid = begin >= m ? 0 : std::min(len, m - begin);
      std::vector<double> g(reduced[i].values.begin(),
                            reduced[i].values.begin() + static_cast<std::ptrdiff_t>(valid));
      for (double& x : g) x /= static_cast<double>(n);
      shards_[i].update(g, opts_.adam);
    });

    TrainRow row;
    row.step = step_;
    double loss = 0.0;
    for (double l : losses) loss += l;
    row.loss = loss / static_cast<double>(n);
    const IterationVolumes v = read_volumes(net.ledger(), m);
    row.fwd_vol = v.fwd;
    row.bwd_vol = v.bwd;
    row.rs_vol = v.rs;
    row.est_latency_s = iteration_latency(traces, opts_.links);
    row.qwz = plan_.cfg.qwz;
    row.hpz = plan_.cfg.hpz;
    row.qgz = use_qgz;
    last_ledger_ = net.ledger();
    ++step_;
    return row;
  }

 private:
  TrainOptions opts_;
  ToyModel model_;
  SyntheticRegression data_;
  CommPlan plan_;
  PerRank<AdamShard> shards_;
  PerRank<FlatTensor> last_fwd_;
  PerRank<FlatTensor> last_bwd_;
  std::optional<TrafficLedger> last_ledger_;
  std::size_t step_ = 0;
};

// One plain ZeRO-3 iteration: both gathers over all ranks, ring
// reduce-scatter. The engine must have been built with every toggle off.
inline TrainRow zero3_step(ZeroEngine& engine) {
  const ZeroConfig& c = engine.config();
  if (c.qwz || c.hpz || c.qgz) throw ConfigError("zero3_step: engine has optimizations enabled");
  return engine.step(false);
}

// One iteration with the engine's toggles and the qgZ schedule applied.
inline TrainRow zeropp_step(ZeroEngine& engine) { return engine.step(); }

inline constexpr double kDivergenceFactor = 1e3;

// Runs opts.steps iterations. A non-finite loss, a loss above
// kDivergenceFactor times the first one, or a non-finite gradient reaching a
// collective ends the run early with the record marked diverged.
inline TrainRecord train_toy(const ZeroConfig& cfg, const TrainOptions& opts,
                             const std::string& variant = {}) {
  ZeroEngine engine(opts, cfg);
  TrainRecord rec;
  rec.variant = variant;
  rec.initial_validation_loss = engine.validation_loss();
  double first = 0.0;
  for (std::size_t t = 0; t < opts.steps; ++t) {
    TrainRow row;
    try {
      row = zeropp_step(engine);
    } catch (const ValidationError& e) {
      rec.diverged = true;
      rec.divergence_step = t;
      rec.divergence_reason = e.what();
      break;
    }
    rec.rows.push_back(row);
    if (t == 0) first = row.loss;
    if (!std::isfinite(row.loss) || row.loss > kDivergenceFactor * first) {
      rec.diverged = true;
      rec.divergence_step = t;
      rec.divergence_reason = "loss " + std::to_string(row.loss);
      break;
    }
  }
  rec.final_validation_loss = rec.diverged ? std::numeric_limits<double>::quiet_NaN()
                                           : engine.validation_loss();
  return rec;
}

}  // namespace zeropp
