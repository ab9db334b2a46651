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
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "zeropp/topology.hpp"

namespace zeropp {
namespace {

TEST(Topology, RankLayout) {
  const ClusterTopology t(2, 3);
  EXPECT_EQ(t.world(), 6);
  EXPECT_EQ(t.node_of(5), 2);
  EXPECT_EQ(t.local_of(5), 1);
  EXPECT_EQ(t.rank_of(1, 0), 2);
  EXPECT_THROW(t.check_rank(6), ValidationError);
  EXPECT_THROW(ClusterTopology(0, 1), ConfigError);
}

TEST(Topology, ClassifyLink) {
  const ClusterTopology t(2, 2);
  EXPECT_EQ(classify_link(0, 1, t), LinkClass::intra);
  EXPECT_EQ(classify_link(0, 2, t), LinkClass::inter);
  EXPECT_EQ(classify_link(3, 3, t), LinkClass::intra);
  EXPECT_THROW(classify_link(0, 4, t), ValidationError);
}

TEST(Ledger, SelfSendsAreFree) {
  TrafficLedger l(ClusterTopology(2, 2));
  l.declare("x", 4);
  l.record("x", 1, 1, {100, 0, 0});
  EXPECT_EQ(l.bytes("x", LinkClass::intra).total(), 0u);
  EXPECT_EQ(l.sent("x", 1), 0u);
}

TEST(Ledger, CountsAndConservation) {
  TrafficLedger l(ClusterTopology(2, 2));
  l.declare("x", 4);
  l.record("x", 0, 1, {10, 1, 2});
  l.record("x", 0, 2, {20, 0, 0});
  l.record("x", 3, 0, {5, 0, 0});
  EXPECT_EQ(l.bytes("x", LinkClass::intra), (ByteCounts{10, 1, 2}));
  EXPECT_EQ(l.bytes("x", LinkClass::inter), (ByteCounts{25, 0, 0}));
  std::uint64_t sent = 0, received = 0;
  for (Rank r = 0; r < 4; ++r) {
    sent += l.sent("x", r);
    received += l.received("x", r);
  }
  EXPECT_EQ(sent, received);
  EXPECT_THROW(l.declare("x", 2), ValidationError);
}

TEST(Ledger, NormalizedVolumeOfAFullRing) {
  // A 4-rank ring all-gather of M fp16 params over 2 nodes: two node-crossing
  // links each carry 3 shards of 2M/4 bytes.
  const std::uint64_t m = 1000;
  TrafficLedger l(ClusterTopology(2, 2));
  l.declare("ag", 4);
  l.record("ag", 1, 2, {3 * 2 * m / 4, 0, 0});
  l.record("ag", 3, 0, {3 * 2 * m / 4, 0, 0});
  EXPECT_DOUBLE_EQ(l.normalized_volume("ag", m), 1.0);
  EXPECT_DOUBLE_EQ(normalized_cross_node_volume(l, m), 1.0);
}

TEST(Ledger, CsvColumns) {
  TrafficLedger l(ClusterTopology(1, 2));
  l.declare("rs", 2);
  l.record("rs", 0, 1, {4, 2, 0});
  std::ostringstream os;
  l.write_csv(os, 4);
  EXPECT_EQ(os.str(),
            "collective,link_class,payload_bytes,metadata_bytes,padding_bytes,normalized_volume\n"
            "rs,intra,0,0,0,\n"
            "rs,inter,4,2,0,0.5\n");
}

TEST(Ledger, MergeAddsUp) {
  const ClusterTopology t(1, 2);
  TrafficLedger a(t), b(t);
  a.declare("x", 2);
  b.declare("x", 2);
  a.record("x", 0, 1, {1, 0, 0});
  b.record("x", 1, 0, {2, 0, 0});
  a.merge(b);
  EXPECT_EQ(a.bytes("x", LinkClass::inter).payload, 3u);
  EXPECT_EQ(a.received("x", 0), 2u);
}

CollectiveTrace two_phase_trace(std::uint64_t intra, std::uint64_t inter) {
  CollectiveTrace t{"t", 1, {}};
  t.phases.emplace_back("a", 2);
  t.phases.back().intra_bytes[0] = intra;
  t.phases.back().intra_messages[0] = 1;
  t.phases.emplace_back("b", 2);
  t.phases.back().inter_bytes[0] = inter;
  t.phases.back().inter_messages[0] = 1;
  return t;
}

TEST(Latency, SingleStageIsTheUnpipelinedSum) {
  const LinkParams links;
  const CollectiveTrace t = two_phase_trace(1 << 20, 1 << 18);
  const auto a = estimate_latency(t, links, 1, true);
  const auto b = estimate_latency(t, links, 1, false);
  EXPECT_DOUBLE_EQ(a.total, b.total);
  EXPECT_DOUBLE_EQ(a.total, a.intra + a.inter);
}

TEST(Latency, EqualPhasesTwoStagesSaveAQuarter) {
  LinkParams links;
  links.intra = {0.0, 1e9};
  links.inter = {0.0, 1e9};
  const CollectiveTrace t = two_phase_trace(1000, 1000);
  const double t1 = estimate_latency(t, links, 1, true).total;
  EXPECT_DOUBLE_EQ(estimate_latency(t, links, 2, true).total, 0.75 * t1);
}

TEST(Latency, AlphaCreatesInteriorMinimum) {
  LinkParams links;
  links.intra = {1e-4, 1e9};
  links.inter = {1e-4, 1e9};
  const CollectiveTrace t = two_phase_trace(1000000, 1000000);
  double best = 1e30;
  int arg = 0;
  for (int s = 1; s <= 8; ++s) {
    const double v = estimate_latency(t, links, s, true).total;
    if (v < best) {
      best = v;
      arg = s;
    }
  }
  EXPECT_GT(arg, 1);
  EXPECT_LT(arg, 8);
  EXPECT_THROW(estimate_latency(t, links, 0, true), ValidationError);
}

TEST(Latency, ComputeIsNeverHidden) {
  const CollectiveTrace t = two_phase_trace(10, 10);
  const LinkParams links;
  EXPECT_DOUBLE_EQ(estimate_latency(t, links, 3, true, 0.5).total -
                       estimate_latency(t, links, 3, true).total,
                   0.5);
}

}  // namespace
}  // namespace zeropp
