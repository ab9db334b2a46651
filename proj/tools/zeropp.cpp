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
// zeropp: runs one experiment and writes its reports.
//
//   zeropp <volume|quant-bench|train|latency|memory> [--config PATH]
//          [--seed N] [--out DIR] [--override key=value ...]
//
// Exit codes: 0 all checks hold, 1 a check failed, 2 bad configuration.

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "zeropp/commands.hpp"
#include "zeropp/run_config.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Simulated ZeRO-3 communication experiments"};
  app.require_subcommand(1, 1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::vector<std::string> overrides;
  app.add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "random seed (overrides the config)");
  app.add_option("--out", out, "output directory (overrides the config)");
  app.add_option("--override", overrides, "dotted.key=value, may be repeated")->take_all();

  for (const auto& name : zeropp::command_names()) {
    app.add_subcommand(name, "run the " + name + " experiment")->fallthrough();
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : zeropp::kExitConfigError;
  }

  try {
    if (seed) overrides.push_back("seed=" + std::to_string(*seed));
    if (out) overrides.push_back("output_dir=" + nlohmann::json(*out).dump());
    const std::optional<std::string> path =
        config_path.empty() ? std::nullopt : std::optional<std::string>(config_path);
    const zeropp::RunConfig cfg = zeropp::load_run_config(path, overrides);
    return zeropp::run_command(app.get_subcommands().front()->get_name(), cfg, std::cout);
  } catch (const zeropp::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return zeropp::kExitConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return zeropp::kExitCheckFailed;
  }
}
