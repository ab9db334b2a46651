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

// Experiment configuration. A run config is a JSON object whose schema is the
// default document below: a user file may only name keys that exist there,
// with values of a compatible type. Overrides use dotted paths, e.g.
//   zero.grad_codec.bits=8   topology.nodes=2   zero.intra_grad_codec={"bits":8}
// The value is parsed as JSON when possible and taken as a string otherwise.

#include <cstddef>
#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "zeropp/engine.hpp"
#include "zeropp/error.hpp"
#include "zeropp/partitioner.hpp"
#include "zeropp/quantizer.hpp"
#include "zeropp/simnet.hpp"
#include "zeropp/topology.hpp"

namespace zeropp {

using Json = nlohmann::json;

inline Json default_config_json() {
  return Json::parse(R"({
    "topology": {"gpus_per_node": 8, "nodes": 4},
    "links": {"intra_alpha": 2e-6, "intra_beta": 150e9, "inter_alpha": 10e-6, "inter_beta": 12.5e9},
    "model": {"params": 1048576, "widths": [16, 64, 64, 64, 4]},
    "zero": {
      "qwz": true, "hpz": true, "qgz": true,
      "weight_codec": {"bits": 8, "block": 2048, "mode": "blocked"},
      "grad_codec": {"bits": 4, "block": 512, "mode": "blocked"},
      "intra_grad_codec": null,
      "stages": 1,
      "secondary_group": 0,
      "qgz_fraction": 1.0
    },
    "train": {"steps": 500, "batch_per_rank": 8, "validation_samples": 512,
              "lr": 1e-3, "beta1": 0.9, "beta2": 0.999, "eps": 1e-8},
    "quant_bench": {"elements": 1048576, "block_sizes": [64, 512, 2048], "bits": [4, 8]},
    "latency": {"max_stages": 8},
    "memory": {"params": 100e9, "optimizer_multiplier": 12, "world": 1024, "secondary_groups": 64},
    "scheduler": "sequential",
    "seed": 1,
    "output_dir": "out"
  })");
}

namespace detail {

inline bool compatible(const Json& schema, const Json& value) {
  if (schema.is_null()) return value.is_null() || value.is_object();  // optional codec
  if (schema.is_boolean()) return value.is_boolean();
  if (schema.is_number_integer()) return value.is_number_integer();
  if (schema.is_number()) return value.is_number();
  if (schema.is_string()) return value.is_string();
  if (schema.is_array()) return value.is_array();
  if (schema.is_object()) return value.is_object();
  return false;
}

// Merges `patch` into `doc`, rejecting keys the schema does not know.
inline void merge_checked(Json& doc, const Json& schema, const Json& patch, const std::string& path) {
  if (!patch.is_object()) throw ConfigError("config: " + path + " must be an object");
  for (const auto& [key, value] : patch.items()) {
    const std::string where = path.empty() ? key : path + "." + key;
    if (!schema.is_object() || !schema.contains(key)) throw ConfigError("config: unknown key " + where);
    const Json& s = schema.at(key);
    if (!compatible(s, value)) throw ConfigError("config: wrong type for " + where);
    if (s.is_object() && !s.empty()) {
      merge_checked(doc[key], s, value, where);
    } else {
      doc[key] = value;
    }
  }
}

inline void check_codec_keys(const Json& j, const std::string& where) {
  for (const auto& [key, _] : j.items()) {
    if (key != "bits" && key != "block" && key != "mode") {
      throw ConfigError("config: unknown key " + where + "." + key);
    }
  }
}

inline QuantConfig parse_codec(const Json& j, const std::string& where) {
  check_codec_keys(j, where);
  QuantConfig c;
  const std::string mode = j.value("mode", std::string("blocked"));
  if (mode == "blocked") {
    c.mode = QuantMode::blocked;
  } else if (mode == "full_tensor") {
    c.mode = QuantMode::full_tensor;
  } else if (mode == "passthrough") {
    return QuantConfig::passthrough();
  } else {
    throw ConfigError("config: " + where + ".mode must be blocked, full_tensor or passthrough");
  }
  if (!j.contains("bits") || !j.at("bits").is_number_integer()) {
    throw ConfigError("config: " + where + ".bits must be an integer");
  }
  c.bit_width = j.at("bits").get<int>();
  if (c.mode == QuantMode::full_tensor) {
    c.block_size = 8;
  } else {
    if (!j.contains("block") || !j.at("block").is_number_integer() || j.at("block").get<long long>() < 1) {
      throw ConfigError("config: " + where + ".block must be a positive integer");
    }
    c.block_size = j.at("block").get<std::size_t>();
  }
  c.validate();
  return c;
}

template <typename T>
T positive(const Json& j, const std::string& where) {
  if (!(j.get<double>() > 0.0)) throw ConfigError("config: " + where + " must be positive");
  return j.get<T>();
}

}  // namespace detail

struct QuantBenchSettings {
  std::size_t elements = 1 << 20;
  std::vector<std::size_t> block_sizes{64, 512, 2048};
  std::vector<int> bits{4, 8};
};

struct RunConfig {
  Json raw;  // fully merged document
  ClusterTopology topology{8, 4};
  LinkParams links;
  std::size_t params = 1 << 20;
  std::vector<std::size_t> widths;
  ZeroConfig zero;
  std::size_t steps = 500;
  std::size_t batch_per_rank = 8;
  std::size_t validation_samples = 512;
  AdamHyper adam;
  QuantBenchSettings quant_bench;
  int max_stages = 8;
  MemoryModel memory;
  Scheduler scheduler = Scheduler::sequential;
  std::uint64_t seed = 1;
  std::string output_dir = "out";

  TrainOptions train_options() const {
    TrainOptions o;
    o.topology = topology;
    o.widths = widths;
    o.steps = steps;
    o.seed = seed;
    o.batch_per_rank = batch_per_rank;
    o.validation_samples = validation_samples;
    o.adam = adam;
    o.links = links;
    o.scheduler = scheduler;
    return o;
  }
};

// Applies one "dotted.key=value" override to a merged document.
inline void apply_override(Json& doc, const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override must look like key=value: " + spec);
  const std::string path = spec.substr(0, eq);
  const std::string text = spec.substr(eq + 1);
  Json value = Json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;

  // Build the nested patch and reuse the strict merge.
  Json patch = value;
  std::vector<std::string> keys;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    keys.push_back(path.substr(start, dot - start));
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  for (auto it = keys.rbegin(); it != keys.rend(); ++it) {
    if (it->empty()) throw ConfigError("override has an empty key segment: " + path);
    patch = Json{{*it, patch}};
  }
  detail::merge_checked(doc, default_config_json(), patch, "");
}

// Validates a merged document and converts it to typed settings.
inline RunConfig parse_run_config(const Json& doc) {
  RunConfig c;
  c.raw = doc;
  try {
    const Json& topo = doc.at("topology");
    const int x = topo.at("gpus_per_node").get<int>();
    const int y = topo.at("nodes").get<int>();
    if (x < 1 || y < 1) throw ConfigError("config: topology sizes must be >= 1");
    c.topology = ClusterTopology(x, y);

    const Json& l = doc.at("links");
    c.links.intra = {l.at("intra_alpha").get<double>(), l.at("intra_beta").get<double>()};
    c.links.inter = {l.at("inter_alpha").get<double>(), l.at("inter_beta").get<double>()};
    try {
      c.links.validate();
    } catch (const ValidationError& e) {
      throw ConfigError(std::string("config: ") + e.what());
    }

    const Json& m = doc.at("model");
    c.params = detail::positive<std::size_t>(m.at("params"), "model.params");
    c.widths = m.at("widths").get<std::vector<std::size_t>>();
    if (c.widths.size() < 2) throw ConfigError("config: model.widths needs at least two entries");
    for (std::size_t w : c.widths) {
      if (w == 0) throw ConfigError("config: model.widths entries must be positive");
    }

    const Json& z = doc.at("zero");
    c.zero.qwz = z.at("qwz").get<bool>();
    c.zero.hpz = z.at("hpz").get<bool>();
    c.zero.qgz = z.at("qgz").get<bool>();
    c.zero.weight_codec = detail::parse_codec(z.at("weight_codec"), "zero.weight_codec");
    c.zero.grad_codec = detail::parse_codec(z.at("grad_codec"), "zero.grad_codec");
    if (!z.at("intra_grad_codec").is_null()) {
      c.zero.intra_grad_codec = detail::parse_codec(z.at("intra_grad_codec"), "zero.intra_grad_codec");
    }
    c.zero.stages = z.at("stages").get<int>();
    c.zero.secondary_group = z.at("secondary_group").get<int>();
    c.zero.qgz_fraction = z.at("qgz_fraction").get<double>();
    c.zero.validate(c.topology);

    const Json& t = doc.at("train");
    c.steps = t.at("steps").get<std::size_t>();
    c.batch_per_rank = detail::positive<std::size_t>(t.at("batch_per_rank"), "train.batch_per_rank");
    c.validation_samples =
        detail::positive<std::size_t>(t.at("validation_samples"), "train.validation_samples");
    c.adam.lr = t.at("lr").get<double>();
    c.adam.beta1 = t.at("beta1").get<double>();
    c.adam.beta2 = t.at("beta2").get<double>();
    c.adam.eps = t.at("eps").get<double>();
    if (c.adam.lr < 0 || c.adam.beta1 < 0 || c.adam.beta1 >= 1 || c.adam.beta2 < 0 ||
        c.adam.beta2 >= 1 || c.adam.eps <= 0) {
      throw ConfigError("config: Adam hyperparameters out of range");
    }

    const Json& q = doc.at("quant_bench");
    c.quant_bench.elements = detail::positive<std::size_t>(q.at("elements"), "quant_bench.elements");
    c.quant_bench.block_sizes = q.at("block_sizes").get<std::vector<std::size_t>>();
    c.quant_bench.bits = q.at("bits").get<std::vector<int>>();
    for (std::size_t b : c.quant_bench.block_sizes) QuantConfig{8, b, QuantMode::blocked}.validate();
    for (int b : c.quant_bench.bits) QuantConfig{b, 8, QuantMode::blocked}.validate();

    c.max_stages = doc.at("latency").at("max_stages").get<int>();
    if (c.max_stages < 1) throw ConfigError("config: latency.max_stages must be >= 1");

    const Json& mem = doc.at("memory");
    c.memory.params = mem.at("params").get<double>();
    c.memory.optimizer_multiplier = mem.at("optimizer_multiplier").get<double>();
    c.memory.world = mem.at("world").get<int>();
    c.memory.secondary_groups = mem.at("secondary_groups").get<int>();
    try {
      c.memory.validate();
    } catch (const ValidationError& e) {
      throw ConfigError(std::string("config: ") + e.what());
    }

    const std::string sched = doc.at("scheduler").get<std::string>();
    if (sched == "sequential") {
      c.scheduler = Scheduler::sequential;
    } else if (sched == "threaded") {
      c.scheduler = Scheduler::threaded;
    } else {
      throw ConfigError("config: scheduler must be sequential or threaded");
    }
    c.seed = doc.at("seed").get<std::uint64_t>();
    c.output_dir = doc.at("output_dir").get<std::string>();
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return c;
}

// Defaults, then the file (if any), then overrides in order.
inline RunConfig load_run_config(const std::optional<std::string>& path,
                                 const std::vector<std::string>& overrides = {}) {
  Json doc = default_config_json();
  if (path) {
    std::ifstream in(*path);
    if (!in) throw ConfigError("cannot open config file " + *path);
    Json user = Json::parse(in, nullptr, false);
    if (user.is_discarded()) throw ConfigError("config file " + *path + " is not valid JSON");
    detail::merge_checked(doc, default_config_json(), user, "");
  }
  for (const auto& o : overrides) apply_override(doc, o);
  return parse_run_config(doc);
}

}  // namespace zeropp
