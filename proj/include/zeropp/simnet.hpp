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

// Bulk-synchronous execution of per-rank programs.
//
// A collective is a list of phases. In each phase every rank first produces
// its outgoing envelopes from its own state, then the whole exchange is
// delivered at once, then every rank consumes its inbox. A rank never sees a
// payload from phase k+1 while in phase k. Inboxes are ordered by (source
// rank, tag), which pins every downstream reduction order, so results do not
// depend on whether ranks run one after another or on worker threads.

#include <algorithm>
#include <cstddef>
#include <exception>
#include <functional>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <thread>
#include <tuple>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "zeropp/error.hpp"
#include "zeropp/topology.hpp"

namespace zeropp {

template <typename T>
using PerRank = std::vector<T>;

template <typename Msg>
struct Envelope {
  Rank src = 0;
  Rank dst = 0;
  int tag = 0;
  ByteCounts bytes;
  Msg body{};
};

template <typename Msg>
using ExchangePlan = std::vector<Envelope<Msg>>;

// Deliveries per destination rank, each sorted by (src, tag).
template <typename Msg>
using Inbox = PerRank<std::vector<Envelope<Msg>>>;

enum class Scheduler { sequential, threaded };

class Network {
 public:
  explicit Network(ClusterTopology topo, Scheduler scheduler = Scheduler::sequential)
      : topo_(topo), ledger_(topo), scheduler_(scheduler) {}

  const ClusterTopology& topology() const { return topo_; }
  int world() const { return topo_.world(); }
  TrafficLedger& ledger() { return ledger_; }
  const TrafficLedger& ledger() const { return ledger_; }
  Scheduler scheduler() const { return scheduler_; }
  void set_scheduler(Scheduler s) { scheduler_ = s; }

  // JSON lines, one per non-self delivery: collective, phase, src, dst, bytes, class.
  void set_event_log(std::ostream* os) { event_log_ = os; }

  // Runs f(rank) for every rank. Each call must touch only that rank's state.
  template <typename F>
  void for_each_rank(F&& f) const {
    const int world = topo_.world();
    if (scheduler_ == Scheduler::sequential || world == 1) {
      for (Rank r = 0; r < world; ++r) f(r);
      return;
    }
    const int workers =
        std::min(world, std::max(2, static_cast<int>(std::thread::hardware_concurrency())));
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(world));
    {
      std::vector<std::jthread> pool;
      pool.reserve(static_cast<std::size_t>(workers));
      for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
          for (Rank r = w; r < world; r += workers) {
            try {
              f(r);
            } catch (...) {
              errors[static_cast<std::size_t>(r)] = std::current_exception();
            }
          }
        });
      }
    }
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  // Delivers one phase worth of envelopes and charges the ledger. Self
  // deliveries are handed over but cost nothing.
  template <typename Msg>
  Inbox<Msg> run_phase(const std::string& label, ExchangePlan<Msg> plan,
                       PhaseRecord* record = nullptr, const std::string& phase_name = {}) {
    std::set<std::tuple<Rank, Rank, int>> seen;
    for (const auto& e : plan) {
      topo_.check_rank(e.src);
      topo_.check_rank(e.dst);
      if (!seen.emplace(e.src, e.dst, e.tag).second) {
        throw PlanError("duplicate envelope (src " + std::to_string(e.src) + ", dst " +
                        std::to_string(e.dst) + ", tag " + std::to_string(e.tag) + ")");
      }
    }
    std::stable_sort(plan.begin(), plan.end(), [](const auto& a, const auto& b) {
      return std::tie(a.dst, a.src, a.tag) < std::tie(b.dst, b.src, b.tag);
    });

    Inbox<Msg> inbox(static_cast<std::size_t>(topo_.world()));
    for (auto& e : plan) {
      if (e.src != e.dst) {
        ledger_.record(label, e.src, e.dst, e.bytes);
        const LinkClass c = classify_link(e.src, e.dst, topo_);
        if (record != nullptr) {
          const auto s = static_cast<std::size_t>(e.src);
          if (c == LinkClass::intra) {
            record->intra_bytes[s] += e.bytes.total();
            record->intra_messages[s] += 1;
          } else {
            record->inter_bytes[s] += e.bytes.total();
            record->inter_messages[s] += 1;
          }
        }
        if (event_log_ != nullptr) {
          nlohmann::json line = {{"collective", label}, {"phase", phase_name},
                                 {"src", e.src},        {"dst", e.dst},
                                 {"bytes", e.bytes.total()}, {"class", to_string(c)}};
          *event_log_ << line.dump() << '\n';
        }
      }
      inbox[static_cast<std::size_t>(e.dst)].push_back(std::move(e));
    }
    return inbox;
  }

 private:
  ClusterTopology topo_;
  TrafficLedger ledger_;
  Scheduler scheduler_;
  std::ostream* event_log_ = nullptr;
};

template <typename State, typename Msg>
struct RankProgram {
  struct Phase {
    std::string name;
    // Outgoing envelopes of this rank; src must be the rank itself.
    std::function<std::vector<Envelope<Msg>>(Rank, State&)> send;
    std::function<void(Rank, State&, std::vector<Envelope<Msg>>&)> receive;
  };
  std::vector<Phase> phases;
};

struct CollectiveSpec {
  std::string label;
  int exchange_width = 1;  // participants of the exchange that crosses nodes
  int stages = 1;
};

// Executes one program per rank in lockstep. All programs must share the same
// phase structure. States are updated in place; the returned trace feeds the
// latency model.
template <typename State, typename Msg>
CollectiveTrace run_collective(Network& net, const CollectiveSpec& spec,
                               std::span<const RankProgram<State, Msg>> programs,
                               PerRank<State>& states) {
  const int world = net.world();
  if (static_cast<int>(programs.size()) != world || static_cast<int>(states.size()) != world) {
    throw ProtocolError("run_collective: need one program and one state per rank");
  }
  const std::size_t n_phases = programs.front().phases.size();
  for (const auto& p : programs) {
    if (p.phases.size() != n_phases) throw ProtocolError("run_collective: phase counts differ");
    for (std::size_t i = 0; i < n_phases; ++i) {
      if (p.phases[i].name != programs.front().phases[i].name) {
        throw ProtocolError("run_collective: phase " + std::to_string(i) + " names differ");
      }
    }
  }

  net.ledger().declare(spec.label, spec.exchange_width);
  CollectiveTrace trace{spec.label, spec.stages, {}};
  for (std::size_t i = 0; i < n_phases; ++i) {
    PerRank<std::vector<Envelope<Msg>>> outgoing(static_cast<std::size_t>(world));
    net.for_each_rank([&](Rank r) {
      const auto& phase = programs[static_cast<std::size_t>(r)].phases[i];
      if (phase.send) outgoing[static_cast<std::size_t>(r)] = phase.send(r, states[static_cast<std::size_t>(r)]);
    });
    ExchangePlan<Msg> plan;
    for (Rank r = 0; r < world; ++r) {
      for (auto& e : outgoing[static_cast<std::size_t>(r)]) {
        if (e.src != r) throw PlanError("rank " + std::to_string(r) + " sent as " + std::to_string(e.src));
        plan.push_back(std::move(e));
      }
    }
    const std::string& name = programs.front().phases[i].name;
    trace.phases.emplace_back(name, world);
    Inbox<Msg> inbox = net.run_phase(spec.label, std::move(plan), &trace.phases.back(), name);
    net.for_each_rank([&](Rank r) {
      const auto& phase = programs[static_cast<std::size_t>(r)].phases[i];
      if (phase.receive) {
        phase.receive(r, states[static_cast<std::size_t>(r)], inbox[static_cast<std::size_t>(r)]);
      }
    });
  }
  return trace;
}

template <typename State, typename Msg>
CollectiveTrace run_collective(Network& net, const CollectiveSpec& spec,
                               const RankProgram<State, Msg>& program, PerRank<State>& states) {
  const std::vector<RankProgram<State, Msg>> programs(static_cast<std::size_t>(net.world()), program);
  return run_collective(net, spec, std::span<const RankProgram<State, Msg>>(programs), states);
}

}  // namespace zeropp
