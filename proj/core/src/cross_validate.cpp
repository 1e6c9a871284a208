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

#include "fmfldp/cross_validate.hpp"

#include <cmath>
#include <stdexcept>

#include "fmfldp/rng.hpp"
#include "fmfldp/server.hpp"

namespace fmfldp::eval {

CrossValStats summarize_metrics(const std::vector<Metrics>& per_split) {
  if (per_split.empty()) {
    throw std::invalid_argument("need metrics from at least one split");
  }
  CrossValStats stats;
  stats.per_split = per_split;
  const auto n = static_cast<double>(per_split.size());
  stats.mean.n_users = per_split.front().n_users;
  stats.stddev.n_users = per_split.front().n_users;
  for (const auto& [k, _] : per_split.front().hr) {
    double sum = 0.0;
    for (const auto& m : per_split) {
      const auto it = m.hr.find(k);
      if (it == m.hr.end()) {
        throw std::invalid_argument("split metrics disagree on ranking cutoffs");
      }
      sum += it->second;
    }
    const double mean = sum / n;
    double sq = 0.0;
    for (const auto& m : per_split) {
      const double d = m.hr.at(k) - mean;
      sq += d * d;
    }
    stats.mean.hr[k] = mean;
    stats.stddev.hr[k] = per_split.size() > 1 ? std::sqrt(sq / (n - 1.0)) : 0.0;
  }
  return stats;
}

CrossValStats cross_validate(const InteractionDataset& ds, const mf::HyperParams& hp,
                             SplitMode split_mode, std::size_t n_splits,
                             const std::vector<int>& cutoffs, std::uint64_t master_seed,
                             ModelMode mode) {
  if (n_splits == 0) {
    throw std::invalid_argument("n_splits must be positive");
  }
  hp.validate();
  std::vector<Metrics> per_split;
  per_split.reserve(n_splits);
  for (std::size_t s = 0; s < n_splits; ++s) {
    const SplitPair split =
        split_leave_one_out(ds, split_mode, derive_seed(master_seed, {stream::kSplit, s}));
    const std::vector<RankingTask> tasks =
        build_ranking_tasks(ds, split, derive_seed(master_seed, {stream::kNegatives, s}));
    const std::uint64_t run_seed = derive_seed(master_seed, {stream::kRun, s});
    server::TrainHooks hooks;
    hooks.compute_loss = false;

    Metrics metrics;
    switch (mode) {
      case ModelMode::kRandom:
        metrics = random_model_hit_ratio(tasks, cutoffs,
                                         derive_seed(master_seed, {stream::kRandomModel, s}));
        break;
      case ModelMode::kLdp: {
        const server::TrainingResult result =
            server::run_training(split.train, hp, run_seed, hooks);
        metrics = hit_ratio(tasks, result.user_embeddings, result.item_matrix, cutoffs);
        break;
      }
      case ModelMode::kNonPrivate: {
        const server::TrainingResult result =
            server::run_training_nonprivate(split.train, hp, run_seed, hooks);
        metrics = hit_ratio(tasks, result.user_embeddings, result.item_matrix, cutoffs);
        break;
      }
    }
    per_split.push_back(std::move(metrics));
  }
  return summarize_metrics(per_split);
}

}  // namespace fmfldp::eval
