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
#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "zeropp/collectives.hpp"

namespace zeropp {
namespace {

PerRank<FlatTensor> random_ints(int world, std::size_t n, std::uint64_t seed, int lo = -50, int hi = 50) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> d(lo, hi);
  PerRank<FlatTensor> out(static_cast<std::size_t>(world));
  for (auto& t : out) {
    t.values.resize(n);
    for (double& x : t.values) x = d(rng);
  }
  return out;
}

PerRank<FlatTensor> random_normal(int world, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d;
  PerRank<FlatTensor> out(static_cast<std::size_t>(world));
  for (auto& t : out) {
    t.values.resize(n);
    for (double& x : t.values) x = d(rng);
  }
  return out;
}

// Brute-force reduce-scatter: rank r gets the elementwise sum of partition r.
PerRank<std::vector<double>> oracle(const PerRank<FlatTensor>& in) {
  const std::size_t world = in.size();
  const std::size_t part = in.front().size() / world;
  PerRank<std::vector<double>> out(world, std::vector<double>(part, 0.0));
  for (std::size_t r = 0; r < world; ++r) {
    for (std::size_t i = 0; i < part; ++i) {
      for (std::size_t k = 0; k < world; ++k) out[r][i] += in[k].values[r * part + i];
    }
  }
  return out;
}

double rmse_vs(const PerRank<FlatTensor>& got, const PerRank<std::vector<double>>& want) {
  double sq = 0.0;
  std::size_t n = 0;
  for (std::size_t r = 0; r < got.size(); ++r) {
    for (std::size_t i = 0; i < want[r].size(); ++i) {
      const double d = got[r].values[i] - want[r][i];
      sq += d * d;
      ++n;
    }
  }
  return std::sqrt(sq / static_cast<double>(n));
}

// ---- all-gather

TEST(AllGather, SingleRankIsIdentity) {
  Network net(ClusterTopology(1, 1));
  const PerRank<FlatTensor> in{FlatTensor{{1.0, 2.0}}};
  const auto r = all_gather_baseline(net, in);
  EXPECT_EQ(r.outputs[0].values, in[0].values);
  EXPECT_EQ(net.ledger().bytes(kFwdAllGather, LinkClass::intra).total(), 0u);
}

TEST(AllGather, ConcatenatesInRankOrder) {
  Network net(ClusterTopology(2, 2));
  PerRank<FlatTensor> in;
  for (int r = 0; r < 4; ++r) in.push_back(FlatTensor{{static_cast<double>(r)}});
  const auto res = all_gather_baseline(net, in);
  for (const auto& o : res.outputs) EXPECT_EQ(o.values, (std::vector<double>{0, 1, 2, 3}));
  for (Rank r = 0; r < 4; ++r) EXPECT_EQ(net.ledger().sent(kFwdAllGather, r), 3u * 2u);
}

TEST(AllGather, UnequalShardsRejected) {
  Network net(ClusterTopology(2, 1));
  EXPECT_THROW(all_gather_baseline(net, {FlatTensor{{1.0}}, FlatTensor{{1.0, 2.0}}}), ValidationError);
}

TEST(AllGather, BaselineVolumeIsOne) {
  for (const ClusterTopology& topo : {ClusterTopology(1, 4), ClusterTopology(4, 2), ClusterTopology(2, 3)}) {
    Network net(topo);
    const std::size_t m = 96 * static_cast<std::size_t>(topo.world());
    all_gather_baseline(net, random_ints(topo.world(), m / static_cast<std::size_t>(topo.world()), 1));
    EXPECT_DOUBLE_EQ(net.ledger().normalized_volume(kFwdAllGather, m), 1.0);
  }
}

TEST(AllGather, GroupGatherStaysInsideGroups) {
  Network net(ClusterTopology(2, 2));
  PerRank<FlatTensor> in;
  for (int r = 0; r < 4; ++r) in.push_back(FlatTensor{{static_cast<double>(r)}});
  const auto res = all_gather_group(net, in, 2, kBwdAllGather);
  EXPECT_EQ(res.outputs[0].values, (std::vector<double>{0, 1}));
  EXPECT_EQ(res.outputs[3].values, (std::vector<double>{2, 3}));
  EXPECT_EQ(net.ledger().bytes(kBwdAllGather, LinkClass::inter).total(), 0u);
  EXPECT_THROW(all_gather_group(net, in, 3, "odd"), ValidationError);
}

TEST(AllGatherQwz, LatticeShardsMatchBaseline) {
  Network a(ClusterTopology(2, 2)), b(ClusterTopology(2, 2));
  const auto in = random_ints(4, 64, 2, -127, 127);
  auto lattice = in;
  for (auto& t : lattice) t.values[0] = 127;  // scale 1 for the single block
  const auto base = all_gather_baseline(a, lattice);
  const auto q = all_gather_qwz(b, lattice, QuantConfig::int8(64));
  for (std::size_t r = 0; r < 4; ++r) EXPECT_EQ(q.outputs[r].values, base.outputs[r].values);
}

TEST(AllGatherQwz, ErrorWithinHalfScaleAndVolumeHalf) {
  const ClusterTopology topo(4, 2);
  Network net(topo), ref(topo);
  const std::size_t shard = 4096;
  const auto in = random_normal(8, shard, 3);
  const QuantConfig cfg = QuantConfig::int8();
  const auto q = all_gather_qwz(net, in, cfg);
  const auto base = all_gather_baseline(ref, in);
  for (std::size_t k = 0; k < 8; ++k) {
    const QuantizedTensor enc = quantize(in[k], cfg);
    for (std::size_t i = 0; i < shard; ++i) {
      const double err = std::fabs(q.outputs[5].values[k * shard + i] - base.outputs[5].values[k * shard + i]);
      EXPECT_LE(err, enc.scale_of(i) / 2 * (1 + 1e-12));
    }
  }
  const std::size_t m = shard * 8;
  EXPECT_DOUBLE_EQ(net.ledger().normalized_volume(kFwdAllGather, m), 0.5);
  EXPECT_LT(net.ledger().normalized_metadata(kFwdAllGather, m), 0.02 * 0.5);
}

// ---- ring reduce-scatter

TEST(RingReduceScatter, TwoRankExample) {
  Network net(ClusterTopology(2, 1));
  const auto r = reduce_scatter_ring(net, {FlatTensor{{1.0, 2.0}}, FlatTensor{{3.0, 4.0}}});
  EXPECT_EQ(r.outputs[0].values, (std::vector<double>{4.0}));
  EXPECT_EQ(r.outputs[1].values, (std::vector<double>{6.0}));
}

TEST(RingReduceScatter, MatchesOracleOnIntegers) {
  for (const ClusterTopology& topo : {ClusterTopology(1, 1), ClusterTopology(3, 1), ClusterTopology(2, 3),
                                      ClusterTopology(4, 4)}) {
    Network net(topo);
    const auto in = random_ints(topo.world(), 12 * static_cast<std::size_t>(topo.world()), 4);
    const auto res = reduce_scatter_ring(net, in);
    const auto want = oracle(in);
    for (std::size_t r = 0; r < in.size(); ++r) EXPECT_EQ(res.outputs[r].values, want[r]);
  }
}

TEST(RingReduceScatter, ZerosAndDivisibility) {
  Network net(ClusterTopology(2, 2));
  PerRank<FlatTensor> zeros(4, FlatTensor{std::vector<double>(8, 0.0)});
  for (const auto& o : reduce_scatter_ring(net, zeros).outputs) EXPECT_EQ(o.values, std::vector<double>(2, 0.0));
  PerRank<FlatTensor> odd(4, FlatTensor{std::vector<double>(6, 0.0)});
  EXPECT_THROW(reduce_scatter_ring(net, odd), ValidationError);
}

TEST(RingReduceScatter, VolumeIsOne) {
  const ClusterTopology topo(4, 2);
  Network net(topo);
  const std::size_t m = 8 * 64;
  reduce_scatter_ring(net, random_ints(8, m, 5));
  EXPECT_DOUBLE_EQ(net.ledger().normalized_volume(kGradReduceScatter, m), 1.0);
}

// ---- naive quantized ring

TEST(NaiveRing, ZerosStayExact) {
  Network net(ClusterTopology(2, 2));
  PerRank<FlatTensor> zeros(4, FlatTensor{std::vector<double>(32, 0.0)});
  for (const auto& o : reduce_scatter_ring_naive_quant(net, zeros, QuantConfig::int4(8)).outputs) {
    EXPECT_EQ(o.values, std::vector<double>(8, 0.0));
  }
}

TEST(NaiveRing, CodecPassesEqualWorldMinusOne) {
  for (int world : {2, 4, 8}) {
    Network net(ClusterTopology(world, 1));
    const auto res = reduce_scatter_ring_naive_quant(net, random_normal(world, 64 * static_cast<std::size_t>(world), 6),
                                                     QuantConfig::int4(64));
    for (const auto& o : res.outputs) EXPECT_EQ(o.codec_passes, static_cast<std::uint32_t>(world - 1));
  }
}

// ---- qgZ 1-hop

TEST(Qgz1Hop, PassthroughMatchesOracle) {
  Network net(ClusterTopology(2, 3));
  const auto in = random_ints(6, 48, 7);
  const auto res = qgz_1hop(net, in, QuantConfig::passthrough());
  const auto want = oracle(in);
  for (std::size_t r = 0; r < 6; ++r) EXPECT_EQ(res.outputs[r].values, want[r]);
}

TEST(Qgz1Hop, SingleNodeHasNoCrossNodeBytes) {
  Network net(ClusterTopology(4, 1));
  qgz_1hop(net, random_normal(4, 4 * 512, 8), QuantConfig::int4());
  EXPECT_EQ(net.ledger().bytes(kGradReduceScatter, LinkClass::inter).total(), 0u);
}

TEST(Qgz1Hop, VolumeGrowsWithGpusPerNode) {
  Network net(ClusterTopology(8, 2));
  const std::size_t m = 16 * 2048;
  qgz_1hop(net, random_normal(16, m, 9), QuantConfig::int8());
  EXPECT_DOUBLE_EQ(net.ledger().normalized_volume(kGradReduceScatter, m), 4.0);
}

// ---- qgZ 2-hop

TEST(Qgz2Hop, PlacementMatchesRingForAllShapes) {
  for (int x : {2, 4}) {
    for (int y : {2, 3}) {
      for (int s : {1, 2, 4}) {
        const ClusterTopology topo(x, y);
        Network a(topo), b(topo);
        const std::size_t n = static_cast<std::size_t>(x * y * s) * 5;
        const auto in = random_ints(topo.world(), n, static_cast<std::uint64_t>(x * 100 + y * 10 + s));
        const auto q = qgz_2hop(a, in, QuantConfig::passthrough(), s);
        const auto ring = reduce_scatter_ring(b, in);
        for (std::size_t r = 0; r < in.size(); ++r) {
          EXPECT_EQ(q.outputs[r].values, ring.outputs[r].values) << x << "x" << y << " S=" << s << " rank " << r;
        }
      }
    }
  }
}

TEST(Qgz2Hop, WithoutReorderRanksOneAndTwoSwap) {
  const ClusterTopology topo(2, 2);
  Network net(topo);
  const auto in = random_ints(4, 16, 10);
  QgzOptions opts;
  opts.reorder = false;
  const auto q = qgz_2hop(net, in, QuantConfig::passthrough(), 1, opts);
  const auto want = oracle(in);
  EXPECT_EQ(q.outputs[0].values, want[0]);
  EXPECT_EQ(q.outputs[1].values, want[2]);
  EXPECT_EQ(q.outputs[2].values, want[1]);
  EXPECT_EQ(q.outputs[3].values, want[3]);
  EXPECT_NE(want[1], want[2]);
}

TEST(Qgz2Hop, Int4VolumeIsAQuarter) {
  const ClusterTopology topo(4, 2);
  Network net(topo);
  const std::size_t m = 8 * 512 * 4;
  qgz_2hop(net, random_normal(8, m, 11), QuantConfig::int4(), 2);
  EXPECT_DOUBLE_EQ(net.ledger().normalized_volume(kGradReduceScatter, m), 0.25);
  EXPECT_LT(net.ledger().normalized_metadata(kGradReduceScatter, m), 0.02 * 0.25);
}

TEST(Qgz2Hop, TwoCodecPassesAtAnyWorldSize) {
  for (const ClusterTopology& topo : {ClusterTopology(2, 2), ClusterTopology(4, 3), ClusterTopology(8, 2)}) {
    Network net(topo);
    const std::size_t n = static_cast<std::size_t>(topo.world()) * 64;
    const auto res = qgz_2hop(net, random_normal(topo.world(), n, 12), QuantConfig::int4(64), 1);
    for (const auto& o : res.outputs) EXPECT_EQ(o.codec_passes, 2u);
  }
}

TEST(Qgz2Hop, ErrorBoundFromRecordedScales) {
  const ClusterTopology topo(4, 3);
  Network net(topo);
  const int x = 4, y = 3, s = 2;
  const std::size_t n = static_cast<std::size_t>(x * y * s) * 128;
  const auto in = random_normal(topo.world(), n, 13);
  ScaleLog log;
  QgzOptions opts;
  opts.intra = QuantConfig::int8(64);
  opts.scale_log = &log;
  const auto res = qgz_2hop(net, in, QuantConfig::int4(64), s, opts);

  std::vector<double> s1(n, 0.0), s2(n, 0.0);
  for (const auto& per_rank : log) {
    for (const auto& rec : per_rank) {
      auto& target = rec.pass == 1 ? s1 : s2;
      for (std::size_t i = 0; i < rec.len; ++i) {
        target[rec.global_offset + i] = std::max(target[rec.global_offset + i], rec.scales[i / rec.block]);
      }
    }
  }
  const auto want = oracle(in);
  const std::size_t part = n / static_cast<std::size_t>(topo.world());
  for (std::size_t r = 0; r < want.size(); ++r) {
    for (std::size_t i = 0; i < part; ++i) {
      const std::size_t g = r * part + i;
      ASSERT_GT(s1[g], 0.0);
      ASSERT_GT(s2[g], 0.0);
      const double bound = y * (x * s1[g] / 2 + s2[g] / 2);
      EXPECT_LE(std::fabs(res.outputs[r].values[i] - want[r][i]), bound * (1 + 1e-9));
    }
  }
}

TEST(Qgz2Hop, BeatsNaiveRingAtSixteenRanks) {
  const ClusterTopology topo(4, 4);
  Network a(topo), b(topo);
  const std::size_t n = 16 * 512 * 2;
  const auto in = random_normal(16, n, 14);
  const auto want = oracle(in);
  const double naive = rmse_vs(reduce_scatter_ring_naive_quant(a, in, QuantConfig::int4()).outputs, want);
  const double qgz = rmse_vs(qgz_2hop(b, in, QuantConfig::int4(), 1).outputs, want);
  EXPECT_GT(naive, qgz);
}

TEST(Qgz2Hop, MisalignedSlicesRejected) {
  Network net(ClusterTopology(2, 2));
  EXPECT_THROW(qgz_2hop(net, random_normal(4, 4 * 24, 15), QuantConfig::int4(16), 1), ValidationError);
  EXPECT_THROW(qgz_2hop(net, random_normal(4, 30, 15), QuantConfig::passthrough(), 1), ValidationError);
}

TEST(Qgz2Hop, FullTensorModeSharesOneScalePerSource) {
  const ClusterTopology topo(2, 2);
  Network net(topo);
  ScaleLog log;
  QgzOptions opts;
  opts.scale_log = &log;
  const auto in = random_normal(4, 64, 16);
  qgz_2hop(net, in, QuantConfig::full_tensor(4), 1, opts);
  for (const auto& per_rank : log) {
    double first = -1.0;
    for (const auto& rec : per_rank) {
      if (rec.pass != 1) continue;
      ASSERT_EQ(rec.scales.size(), 1u);
      if (first < 0) first = rec.scales[0];
      EXPECT_EQ(rec.scales[0], first);
    }
  }
}

TEST(Qgz2Hop, ThreadedMatchesSequential) {
  const ClusterTopology topo(4, 2);
  Network a(topo, Scheduler::sequential), b(topo, Scheduler::threaded);
  const auto in = random_normal(8, 8 * 512 * 2, 17);
  const auto ra = qgz_2hop(a, in, QuantConfig::int4(), 2);
  const auto rb = qgz_2hop(b, in, QuantConfig::int4(), 2);
  for (std::size_t r = 0; r < 8; ++r) EXPECT_EQ(ra.outputs[r].values, rb.outputs[r].values);
}

}  // namespace
}  // namespace zeropp
