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

#ifndef FMFLDP_EXPERIMENT_HPP_
#define FMFLDP_EXPERIMENT_HPP_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fmfldp/cross_validate.hpp"
#include "fmfldp/dataset.hpp"
#include "fmfldp/mf.hpp"

namespace fmfldp::experiment {

// When set, relative data paths resolve against this directory.
inline constexpr const char* kDataDirEnvVar = "FMFLDP_DATA_DIR";

// Everything a run needs, loadable from a flat "key = value" file. Optional
// n_users / n_items mean "use the whole filtered dataset" and may also be
// spelled "full" in config files.
struct ExperimentConfig {
  std::string data_path;
  std::size_t min_interactions = 60;
  std::optional<std::size_t> n_users;
  std::optional<std::size_t> n_items;
  mf::HyperParams hp;
  SplitMode split_mode = SplitMode::kRandomLeaveOneOut;
  std::size_t n_splits = 1;
  std::vector<int> cutoffs = {2, 5, 10};
  std::uint64_t seed = 42;
  std::string output_path = "metrics.csv";
  std::string checkpoint_path;  // empty: no checkpoint
  eval::ModelMode mode = eval::ModelMode::kLdp;
  std::size_t eval_every = 1;

  // Sweep axes; empty axes fall back to the corresponding single value
  // above.
  std::vector<double> sweep_epsilons;
  std::vector<std::size_t> sweep_reports;
  std::vector<std::pair<std::size_t, std::size_t>> sweep_sizes;  // (n_users, n_items)

  void validate() const;

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

// Parses "key = value" lines; '#' starts a comment, blank lines are
// ignored. Unknown or repeated keys raise std::runtime_error naming the
// 1-based line.
ExperimentConfig parse_config(std::istream& in);
ExperimentConfig load_config(const std::filesystem::path& path);

// Sets one config key from its config-file spelling; used for CLI
// overrides. Unknown keys or unparsable values throw.
void apply_override(ExperimentConfig& config, const std::string& key,
                    const std::string& value);

// Canonical config-file rendering; parse_config(serialize_config(c)) == c.
std::string serialize_config(const ExperimentConfig& config);

// data_path, resolved against kDataDirEnvVar when the path is relative and
// the variable is set.
std::filesystem::path resolve_data_path(const ExperimentConfig& config);

// Loads, prepares and splits the dataset, trains one model per split,
// writes one metrics-trace CSV per split (output_path, or with a
// ".split<i>" suffix when n_splits > 1) and prints the dataset summary, the
// privacy budget and the final cross-split metrics to `out`. On divergence
// the partial trace is still written before the error propagates.
void run_experiment(const ExperimentConfig& config, std::ostream& out);

// Grid run over the sweep axes. Each grid point is cross-validated and
// appended as one CSV row keyed by (epsilon, k, n_users, n_items); rows
// already present in output_path are skipped, so interrupted sweeps resume.
// Returns the number of failed grid points.
int run_sweep(const ExperimentConfig& config, std::ostream& out, std::ostream& err);

// Prints the per-user communication cost table for the configured model
// size. Loads the dataset only when n_items is not given explicitly.
void report_costs(const ExperimentConfig& config, std::ostream& out);

// Aggregates rows of previously written metric CSVs that share a header:
// rows are grouped by the key columns (epoch / epsilon / k / n_users /
// n_items, whichever are present) and every other column is reported as
// mean and sample standard deviation.
void summarize_csv(const std::vector<std::string>& paths, std::ostream& out);

}  // namespace fmfldp::experiment

#endif  // FMFLDP_EXPERIMENT_HPP_
