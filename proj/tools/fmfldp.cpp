// Copyright 2026 The fmfldp Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <CLI11.hpp>
#include <iostream>
#include <string>
#include <vector>

#include "fmfldp/experiment.hpp"

namespace {

using fmfldp::experiment::ExperimentConfig;

// Flags shared by the run/sweep/costs verbs. Each one maps onto a config
// key; flags win over the config file.
struct CommonArgs {
  std::string config_path;
  std::vector<std::pair<std::string, std::string>> overrides;

  void attach(CLI::App& cmd) {
    cmd.add_option("-c,--config", config_path, "Config file with key = value lines");
    const auto add_keyed = [&](const char* flag, const char* key, const char* help) {
      cmd.add_option_function<std::string>(
          flag,
          [this, key](const std::string& value) { overrides.emplace_back(key, value); },
          help);
    };
    add_keyed("--data", "data_path", "Ratings CSV path");
    add_keyed("--epsilon", "epsilon", "Per-report privacy parameter");
    add_keyed("--k", "reports_per_user", "Randomized reports per user per epoch");
    add_keyed("--users", "n_users", "User subset size (or 'full')");
    add_keyed("--items", "n_items", "Item subset size (or 'full')");
    add_keyed("--seed", "seed", "Master seed");
    add_keyed("--mode", "mode", "ldp, nonprivate or random");
    add_keyed("--out", "output_path", "Metrics CSV path");
    add_keyed("--epochs", "epochs", "Training epochs");
    add_keyed("--splits", "n_splits", "Number of evaluation splits");
    cmd.add_option_function<std::vector<std::string>>(
        "--set",
        [this](const std::vector<std::string>& pairs) {
          for (const std::string& pair : pairs) {
            const auto eq = pair.find('=');
            if (eq == std::string::npos) {
              throw CLI::ValidationError("--set", "expected key=value, got '" + pair + "'");
            }
            overrides.emplace_back(pair.substr(0, eq), pair.substr(eq + 1));
          }
        },
        "Set any config key, e.g. --set learning_rate=0.01");
  }

  ExperimentConfig build() const {
    ExperimentConfig config;
    if (!config_path.empty()) {
      config = fmfldp::experiment::load_config(config_path);
    }
    for (const auto& [key, value] : overrides) {
      fmfldp::experiment::apply_override(config, key, value);
    }
    return config;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated implicit-feedback matrix factorization with randomized reports"};
  app.require_subcommand(1);

  CommonArgs run_args;
  CLI::App* run_cmd = app.add_subcommand("run", "Train and evaluate one configuration");
  run_args.attach(*run_cmd);

  CommonArgs sweep_args;
  CLI::App* sweep_cmd =
      app.add_subcommand("sweep", "Grid run over epsilon / k / dataset size axes");
  sweep_args.attach(*sweep_cmd);
  std::string sweep_epsilons, sweep_reports, sweep_sizes;
  sweep_cmd->add_option("--epsilons", sweep_epsilons, "Comma list, e.g. 0.5,2.5,6");
  sweep_cmd->add_option("--ks", sweep_reports, "Comma list, e.g. 1,50,100,250");
  sweep_cmd->add_option("--sizes", sweep_sizes, "Comma list of UxM pairs, e.g. 1000x1000");

  CommonArgs costs_args;
  CLI::App* costs_cmd =
      app.add_subcommand("costs", "Print the per-user communication cost table");
  costs_args.attach(*costs_cmd);

  std::vector<std::string> summarize_paths;
  CLI::App* summarize_cmd =
      app.add_subcommand("summarize", "Aggregate metric CSVs (mean and stddev per key)");
  summarize_cmd->add_option("csv", summarize_paths, "Metric CSV files")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run_cmd->parsed()) {
      fmfldp::experiment::run_experiment(run_args.build(), std::cout);
    } else if (sweep_cmd->parsed()) {
      ExperimentConfig config = sweep_args.build();
      if (!sweep_epsilons.empty()) {
        fmfldp::experiment::apply_override(config, "sweep_epsilons", sweep_epsilons);
      }
      if (!sweep_reports.empty()) {
        fmfldp::experiment::apply_override(config, "sweep_reports", sweep_reports);
      }
      if (!sweep_sizes.empty()) {
        fmfldp::experiment::apply_override(config, "sweep_sizes", sweep_sizes);
      }
      const int failures = fmfldp::experiment::run_sweep(config, std::cout, std::cerr);
      if (failures != 0) {
        std::cerr << failures << " sweep point(s) failed\n";
        return 1;
      }
    } else if (costs_cmd->parsed()) {
      fmfldp::experiment::report_costs(costs_args.build(), std::cout);
    } else if (summarize_cmd->parsed()) {
      fmfldp::experiment::summarize_csv(summarize_paths, std::cout);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
