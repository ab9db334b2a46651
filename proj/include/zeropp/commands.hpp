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

// The experiment commands behind the zeropp tool. Each writes CSV reports and
// a <command>_summary.json into the output directory and returns a process
// exit code: 0 when every check holds, 1 when one fails. Configuration
// problems surface as ConfigError and map to exit code 2 in the tool.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "zeropp/collectives.hpp"
#include "zeropp/engine.hpp"
#include "zeropp/error.hpp"
#include "zeropp/half.hpp"
#include "zeropp/partitioner.hpp"
#include "zeropp/quantizer.hpp"
#include "zeropp/run_config.hpp"
#include "zeropp/topology.hpp"

namespace zeropp {

inline constexpr int kExitOk = 0;
inline constexpr int kExitCheckFailed = 1;
inline constexpr int kExitConfigError = 2;

namespace detail {

struct CheckList {
  Json items = Json::array();
  bool ok = true;

  void add(const std::string& name, bool pass, const std::string& detail = {}) {
    items.push_back({{"name", name}, {"pass", pass}, {"detail", detail}});
    ok = ok && pass;
  }
};

inline std::filesystem::path prepare_out(const RunConfig& cfg) {
  std::filesystem::path dir(cfg.output_dir);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory " + dir.string() + ": " + ec.message());
  return dir;
}

inline std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream os(p);
  if (!os) throw ConfigError("cannot write " + p.string());
  os << std::setprecision(17);
  return os;
}

inline int finish(const std::filesystem::path& dir, const std::string& command, const RunConfig& cfg,
                  Json results, const CheckList& checks, std::ostream& log) {
  Json summary = {{"command", command},
                  {"seed", cfg.seed},
                  {"config", cfg.raw},
                  {"results", std::move(results)},
                  {"checks", checks.items},
                  {"ok", checks.ok}};
  auto os = open_out(dir / (command + "_summary.json"));
  os << summary.dump(2) << '\n';
  for (const auto& c : checks.items) {
    log << (c["pass"].get<bool>() ? "PASS " : "FAIL ") << c["name"].get<std::string>();
    if (!c["detail"].get<std::string>().empty()) log << "  (" << c["detail"].get<std::string>() << ")";
    log << '\n';
  }
  return checks.ok ? kExitOk : kExitCheckFailed;
}

inline std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(6) << v;
  return os.str();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// volume

struct VolumeVariant {
  std::string name;
  ZeroConfig cfg;
};

inline std::vector<VolumeVariant> volume_variants(const ZeroConfig& base) {
  auto with = [&](bool w, bool h, bool g) {
    ZeroConfig c = base;
    c.qwz = w;
    c.hpz = h;
    c.qgz = g;
    c.qgz_fraction = 1.0;
    return c;
  };
  return {{"baseline", with(false, false, false)},
          {"qwZ", with(true, false, false)},
          {"hpZ", with(false, true, false)},
          {"qgZ", with(false, false, true)},
          {"zeropp", with(true, true, true)}};
}

// Normalized volumes one iteration should produce, per collective. NaN means
// the value is topology-dependent and not asserted (a secondary group that
// spans nodes).
inline IterationVolumes expected_volumes(const ClusterTopology& topo, const ZeroConfig& cfg) {
  IterationVolumes e;
  if (topo.nodes() == 1) return e;
  const double w = cfg.qwz ? 1.0 / cfg.weight_codec.compression_vs_fp16() : 1.0;
  const int g = cfg.group_size(topo);
  const bool group_local = g <= topo.gpus_per_node() && topo.gpus_per_node() % g == 0;
  e.fwd = w;
  e.bwd = cfg.hpz ? (group_local ? 0.0 : std::numeric_limits<double>::quiet_NaN()) : w;
  e.rs = cfg.qgz ? 1.0 / cfg.grad_codec.compression_vs_fp16() : 1.0;
  return e;
}

inline int cmd_volume(const RunConfig& cfg, std::ostream& log) {
  const auto dir = detail::prepare_out(cfg);
  detail::CheckList checks;
  Json results = Json::array();
  auto csv = detail::open_out(dir / "volume.csv");
  csv << "variant,fwd_allgather,bwd_allgather,grad_reduce_scatter,total,"
         "fwd_metadata,bwd_metadata,rs_metadata,expected_fwd,expected_bwd,expected_rs,match\n";
  constexpr double kTol = 1e-6;
  constexpr double kMetadataShare = 0.02;
  for (const auto& v : volume_variants(cfg.zero)) {
    TrafficLedger ledger(cfg.topology);
    const IterationVolumes got =
        communication_iteration(cfg.topology, v.cfg, cfg.params, cfg.seed, cfg.links, cfg.scheduler, &ledger);
    const IterationVolumes want = expected_volumes(cfg.topology, v.cfg);
    bool match = true;
    const double pairs[3][3] = {{got.fwd, want.fwd, got.fwd_metadata},
                                {got.bwd, want.bwd, got.bwd_metadata},
                                {got.rs, want.rs, got.rs_metadata}};
    for (const auto& p : pairs) {
      if (!std::isnan(p[1]) && std::fabs(p[0] - p[1]) > kTol) match = false;
      if (p[0] > 0.0 && p[2] >= kMetadataShare * p[0]) match = false;
    }
    csv << v.name << ',' << got.fwd << ',' << got.bwd << ',' << got.rs << ',' << got.total() << ','
        << got.fwd_metadata << ',' << got.bwd_metadata << ',' << got.rs_metadata << ',' << want.fwd
        << ',' << want.bwd << ',' << want.rs << ',' << int{match} << '\n';
    auto lcsv = detail::open_out(dir / ("ledger_" + v.name + ".csv"));
    ledger.write_csv(lcsv, cfg.params);
    results.push_back({{"variant", v.name},
                       {"fwd", got.fwd},
                       {"bwd", got.bwd},
                       {"rs", got.rs},
                       {"total", got.total()},
                       {"metadata", {got.fwd_metadata, got.bwd_metadata, got.rs_metadata}},
                       {"est_latency_s", got.latency_s}});
    checks.add("volume " + v.name, match,
               detail::fmt(got.fwd) + ", " + detail::fmt(got.bwd) + ", " + detail::fmt(got.rs));
    log << v.name << ": fwd " << got.fwd << "  bwd " << got.bwd << "  rs " << got.rs << "  total "
        << got.total() << '\n';
  }
  return detail::finish(dir, "volume", cfg, std::move(results), checks, log);
}

// ---------------------------------------------------------------------------
// quant-bench

enum class Distribution { gaussian, uniform, heavy_tailed, lattice };

inline const char* to_string(Distribution d) {
  switch (d) {
    case Distribution::gaussian: return "gaussian";
    case Distribution::uniform: return "uniform";
    case Distribution::heavy_tailed: return "heavy_tailed";
    case Distribution::lattice: return "lattice";
  }
  return "?";
}

// Lattice data is integer codes with a full-scale entry every 8 elements, so
// every block of any legal size has scale exactly 1 and encodes losslessly.
inline FlatTensor bench_data(Distribution d, std::size_t n, int bits, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  FlatTensor t{std::vector<double>(n)};
  switch (d) {
    case Distribution::gaussian: {
      std::normal_distribution<double> g(0.0, 1.0);
      for (double& x : t.values) x = g(rng);
      break;
    }
    case Distribution::uniform: {
      std::uniform_real_distribution<double> u(-1.0, 1.0);
      for (double& x : t.values) x = u(rng);
      break;
    }
    case Distribution::heavy_tailed: {
      std::student_t_distribution<double> s(2.0);
      for (double& x : t.values) x = s(rng);
      break;
    }
    case Distribution::lattice: {
      const int q = (1 << (bits - 1)) - 1;
      std::uniform_int_distribution<int> c(-q, q);
      for (std::size_t i = 0; i < n; ++i) t.values[i] = i % 8 == 0 ? q : c(rng);
      break;
    }
  }
  return t;
}

inline int cmd_quant_bench(const RunConfig& cfg, std::ostream& log) {
  const auto dir = detail::prepare_out(cfg);
  detail::CheckList checks;
  Json results = Json::array();
  auto csv = detail::open_out(dir / "quant_bench.csv");
  csv << "distribution,bits,mode,block_size,elements,rmse,max_abs_error,bound_violations\n";
  const auto& qb = cfg.quant_bench;
  const std::size_t smallest = *std::min_element(qb.block_sizes.begin(), qb.block_sizes.end());
  std::size_t violations = 0;
  std::uint64_t stream = 0;
  for (Distribution d : {Distribution::gaussian, Distribution::uniform, Distribution::heavy_tailed,
                         Distribution::lattice}) {
    for (int bits : qb.bits) {
      const FlatTensor data = bench_data(d, qb.elements, bits, cfg.seed * 1000003ULL + stream++);
      std::vector<QuantConfig> codecs;
      for (std::size_t b : qb.block_sizes) codecs.push_back({bits, b, QuantMode::blocked});
      codecs.push_back(QuantConfig::full_tensor(bits));
      double smallest_rmse = 0.0;
      double full_rmse = 0.0;
      for (const auto& c : codecs) {
        const QuantErrorStats s = quant_error_stats(data, c);
        const std::size_t block = c.block_for(data.size());
        csv << to_string(d) << ',' << bits << ',' << to_string(c.mode) << ',' << block << ','
            << data.size() << ',' << s.rmse << ',' << s.max_abs_error << ','
            << s.per_block_bound_violations << '\n';
        results.push_back({{"distribution", to_string(d)},
                           {"bits", bits},
                           {"mode", to_string(c.mode)},
                           {"block_size", block},
                           {"rmse", s.rmse},
                           {"max_abs_error", s.max_abs_error},
                           {"bound_violations", s.per_block_bound_violations}});
        violations += s.per_block_bound_violations;
        if (c.mode == QuantMode::full_tensor) full_rmse = s.rmse;
        if (c.mode == QuantMode::blocked && c.block_size == smallest) smallest_rmse = s.rmse;
        if (d == Distribution::lattice) {
          checks.add("lattice exact INT" + std::to_string(bits) + " " + to_string(c.mode) + "/" +
                         std::to_string(block),
                     s.rmse == 0.0, "rmse " + detail::fmt(s.rmse));
        }
      }
      if (d == Distribution::heavy_tailed) {
        checks.add("heavy-tailed INT" + std::to_string(bits) + " blocked-" + std::to_string(smallest) +
                       " beats full-tensor",
                   smallest_rmse < full_rmse,
                   detail::fmt(smallest_rmse) + " vs " + detail::fmt(full_rmse));
      }
    }
  }
  checks.add("zero bound violations", violations == 0, std::to_string(violations));
  return detail::finish(dir, "quant_bench", cfg, std::move(results), checks, log);
}

// ---------------------------------------------------------------------------
// train

struct TrainVariant {
  std::string name;
  ZeroConfig cfg;
};

// The comparison set: plain ZeRO-3, everything on, everything on with a
// non-blocked gradient codec, qgZ for the first half only, and qgZ off.
inline std::vector<TrainVariant> train_variants(const ZeroConfig& base) {
  ZeroConfig on = base;
  on.qwz = on.hpz = on.qgz = true;
  on.qgz_fraction = 1.0;
  ZeroConfig off = on;
  off.qwz = off.hpz = off.qgz = false;
  ZeroConfig full = on;
  full.grad_codec = QuantConfig::full_tensor(on.grad_codec.bit_width);
  if (full.intra_grad_codec) full.intra_grad_codec = QuantConfig::full_tensor(full.intra_grad_codec->bit_width);
  ZeroConfig interleaved = on;
  interleaved.qgz_fraction = 0.5;
  ZeroConfig no_qgz = on;
  no_qgz.qgz = false;
  return {{"baseline", off},
          {"zeropp", on},
          {"zeropp_full_tensor", full},
          {"interleaved", interleaved},
          {"qgz_off", no_qgz}};
}

struct ConvergenceChecks {
  double relative_gap = 0.0;
  bool within_5pct = false;
  bool full_tensor_worse = false;
  bool interleaved_between = false;
};

inline ConvergenceChecks convergence_checks(const std::vector<TrainRecord>& recs) {
  auto final_of = [&](const std::string& n) {
    for (const auto& r : recs) {
      if (r.variant == n) return r.diverged ? std::numeric_limits<double>::infinity() : r.final_validation_loss;
    }
    throw ValidationError("convergence_checks: missing variant " + n);
  };
  ConvergenceChecks c;
  const double base = final_of("baseline");
  const double on = final_of("zeropp");
  const double full = final_of("zeropp_full_tensor");
  const double inter = final_of("interleaved");
  const double off = final_of("qgz_off");
  c.relative_gap = std::fabs(on - base) / base;
  c.within_5pct = c.relative_gap <= 0.05;
  c.full_tensor_worse = full > on;
  c.interleaved_between = std::min(on, off) <= inter && inter <= std::max(on, off);
  return c;
}

inline int cmd_train(const RunConfig& cfg, std::ostream& log) {
  const auto dir = detail::prepare_out(cfg);
  detail::CheckList checks;
  Json results = Json::array();
  std::vector<TrainRecord> recs;
  for (const auto& v : train_variants(cfg.zero)) {
    TrainRecord rec = train_toy(v.cfg, cfg.train_options(), v.name);
    auto csv = detail::open_out(dir / ("train_" + v.name + ".csv"));
    rec.write_csv(csv);
    Json r = {{"variant", v.name},
              {"steps", rec.rows.size()},
              {"initial_validation_loss", rec.initial_validation_loss},
              {"diverged", rec.diverged}};
    if (rec.diverged) {
      r["divergence_step"] = *rec.divergence_step;
      r["divergence_reason"] = rec.divergence_reason;
    } else {
      r["final_validation_loss"] = rec.final_validation_loss;
    }
    results.push_back(r);
    log << v.name << ": final validation loss "
        << (rec.diverged ? std::string("diverged") : detail::fmt(rec.final_validation_loss)) << '\n';
    recs.push_back(std::move(rec));
  }
  const ConvergenceChecks c = convergence_checks(recs);
  checks.add("zeropp within 5% of baseline", c.within_5pct, "gap " + detail::fmt(c.relative_gap));
  checks.add("full-tensor gradients worse than blocked", c.full_tensor_worse);
  checks.add("interleaved between all-on and qgZ-off", c.interleaved_between);
  return detail::finish(dir, "train", cfg, std::move(results), checks, log);
}

// ---------------------------------------------------------------------------
// latency

struct LatencyRow {
  int stages = 1;
  LatencyEstimate overlapped;
  LatencyEstimate sequential;
};

inline std::vector<LatencyRow> latency_table(const CollectiveTrace& trace, const LinkParams& links,
                                             int max_stages) {
  std::vector<LatencyRow> rows;
  for (int s = 1; s <= max_stages; ++s) {
    rows.push_back({s, estimate_latency(trace, links, s, true), estimate_latency(trace, links, s, false)});
  }
  return rows;
}

inline int argmin_stages(const std::vector<LatencyRow>& rows) {
  int best = rows.front().stages;
  double t = rows.front().overlapped.total;
  for (const auto& r : rows) {
    if (r.overlapped.total < t) {
      t = r.overlapped.total;
      best = r.stages;
    }
  }
  return best;
}

// Traces one 2-hop gradient reduce-scatter of the configured model and
// evaluates the pipelined cost model for S = 1..max_stages.
inline int cmd_latency(const RunConfig& cfg, std::ostream& log) {
  const auto dir = detail::prepare_out(cfg);
  detail::CheckList checks;
  ZeroConfig zc = cfg.zero;
  zc.qgz = true;
  zc.qgz_fraction = 1.0;
  zc.stages = 1;
  const CommPlan plan(cfg.topology, zc, cfg.params);
  Network net(cfg.topology, cfg.scheduler);
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  PerRank<FlatTensor> grads(static_cast<std::size_t>(cfg.topology.world()));
  for (auto& g : grads) {
    g = FlatTensor(std::vector<double>(plan.padded, 0.0));
    for (std::size_t i = 0; i < cfg.params; ++i) g.values[i] = half::round(normal(rng));
  }
  std::vector<CollectiveTrace> traces;
  reduce_gradients(net, plan, grads, true, traces);
  const auto rows = latency_table(traces.front(), cfg.links, cfg.max_stages);

  auto csv = detail::open_out(dir / "latency.csv");
  csv << "stages,intra_s,inter_s,total_overlap_s,total_no_overlap_s\n";
  Json results = Json::array();
  for (const auto& r : rows) {
    csv << r.stages << ',' << r.overlapped.intra << ',' << r.overlapped.inter << ','
        << r.overlapped.total << ',' << r.sequential.total << '\n';
    results.push_back({{"stages", r.stages},
                       {"intra_s", r.overlapped.intra},
                       {"inter_s", r.overlapped.inter},
                       {"total_overlap_s", r.overlapped.total},
                       {"total_no_overlap_s", r.sequential.total}});
  }
  const int best = argmin_stages(rows);
  log << "argmin S = " << best << "  T = " << rows[static_cast<std::size_t>(best - 1)].overlapped.total
      << " s\n";
  checks.add("T(1) equals the unpipelined sum",
             rows.front().overlapped.total == rows.front().sequential.total);
  return detail::finish(dir, "latency", cfg, {{"rows", results}, {"argmin_stages", best}}, checks, log);
}

// ---------------------------------------------------------------------------
// memory

inline int cmd_memory(const RunConfig& cfg, std::ostream& log) {
  const auto dir = detail::prepare_out(cfg);
  detail::CheckList checks;
  const MemoryModel& m = cfg.memory;
  {
    auto csv = detail::open_out(dir / "memory.csv");
    write_memory_csv(csv, m);
  }
  const double dp = memory_per_device(MemoryMode::dp, m);
  const double z3 = memory_per_device(MemoryMode::zero3, m);
  const double hpz = memory_per_device(MemoryMode::hpz, m);
  const double mics = memory_per_device(MemoryMode::mics, m);
  Json results = {{"DP", dp},           {"ZeRO3", z3},           {"hpZ", hpz}, {"MiCS", mics},
                  {"hpZ_over_ZeRO3", hpz / z3}, {"DP_over_hpZ", dp / hpz}};
  log << "hpZ / ZeRO3 = " << hpz / z3 << "   DP / hpZ = " << dp / hpz << '\n';
  checks.add("ZeRO3 times P equals DP", z3 * m.world == dp);
  return detail::finish(dir, "memory", cfg, std::move(results), checks, log);
}

inline const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names{"volume", "quant-bench", "train", "latency", "memory"};
  return names;
}

inline int run_command(const std::string& name, const RunConfig& cfg, std::ostream& log) {
  if (name == "volume") return cmd_volume(cfg, log);
  if (name == "quant-bench") return cmd_quant_bench(cfg, log);
  if (name == "train") return cmd_train(cfg, log);
  if (name == "latency") return cmd_latency(cfg, log);
  if (name == "memory") return cmd_memory(cfg, log);
  throw ConfigError("unknown command " + name);
}

}  // namespace zeropp
