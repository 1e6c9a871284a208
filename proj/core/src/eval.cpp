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

#include "fmfldp/eval.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

#include "fmfldp/rng.hpp"

namespace fmfldp::eval {
namespace {

void check_cutoffs(const std::vector<int>& cutoffs) {
  if (cutoffs.empty()) {
    throw std::invalid_argument("need at least one ranking cutoff");
  }
  for (std::size_t i = 0; i < cutoffs.size(); ++i) {
    if (cutoffs[i] <= 0) {
      throw std::invalid_argument("ranking cutoffs must be positive");
    }
    if (i > 0 && cutoffs[i] <= cutoffs[i - 1]) {
      throw std::invalid_argument("ranking cutoffs must be strictly ascending");
    }
  }
}

Metrics tally_ranks(const std::vector<int>& ranks, const std::vector<int>& cutoffs) {
  Metrics m;
  m.n_users = ranks.size();
  for (int k : cutoffs) {
    std::size_t hits = 0;
    for (int r : ranks) {
      if (r <= k) ++hits;
    }
    m.hr[k] = static_cast<double>(hits) / static_cast<double>(ranks.size());
  }
  return m;
}

}  // namespace

int rank_test_item(const mf::UserEmbedding& x, const mf::ItemMatrix& V,
                   const RankingTask& task) {
  const double test_score = mf::score(x, V.row(task.test_item).transpose());
  int rank = 1;
  for (std::uint32_t j : task.negatives) {
    const double s = mf::score(x, V.row(j).transpose());
    if (s > test_score || (s == test_score && j < task.test_item)) {
      ++rank;
    }
  }
  return rank;
}

Metrics hit_ratio(const std::vector<RankingTask>& tasks,
                  const std::vector<mf::UserEmbedding>& X, const mf::ItemMatrix& V,
                  const std::vector<int>& cutoffs) {
  check_cutoffs(cutoffs);
  if (tasks.empty()) {
    throw std::invalid_argument("cannot evaluate zero ranking tasks");
  }
  std::vector<int> ranks;
  ranks.reserve(tasks.size());
  for (const auto& task : tasks) {
    if (task.user >= X.size()) {
      throw std::out_of_range("ranking task user " + std::to_string(task.user) +
                              " has no embedding");
    }
    ranks.push_back(rank_test_item(X[task.user], V, task));
  }
  return tally_ranks(ranks, cutoffs);
}

Metrics random_baseline(const std::vector<int>& cutoffs) {
  check_cutoffs(cutoffs);
  Metrics m;
  constexpr double kCandidates = 1.0 + static_cast<double>(kNumNegatives);
  for (int k : cutoffs) {
    m.hr[k] = std::min(1.0, static_cast<double>(k) / kCandidates);
  }
  return m;
}

Metrics random_model_hit_ratio(const std::vector<RankingTask>& tasks,
                               const std::vector<int>& cutoffs, std::uint64_t seed) {
  check_cutoffs(cutoffs);
  if (tasks.empty()) {
    throw std::invalid_argument("cannot evaluate zero ranking tasks");
  }
  std::vector<int> ranks;
  ranks.reserve(tasks.size());
  for (const auto& task : tasks) {
    Rng rng = Rng::derive(seed, {stream::kRandomModel, task.user});
    const double test_score = rng.next_unit();
    int rank = 1;
    for (std::uint32_t j : task.negatives) {
      const double s = rng.next_unit();
      if (s > test_score || (s == test_score && j < task.test_item)) {
        ++rank;
      }
    }
    ranks.push_back(rank);
  }
  return tally_ranks(ranks, cutoffs);
}

std::vector<RankingTask> build_ranking_tasks(const InteractionDataset& full,
                                             const SplitPair& split,
                                             std::uint64_t seed) {
  if (split.test_item.size() != full.n_users() ||
      split.train.n_users() != full.n_users() || split.train.n_items() != full.n_items()) {
    throw std::invalid_argument("split does not match the full dataset");
  }
  std::vector<RankingTask> tasks;
  tasks.reserve(full.n_users());
  for (std::uint32_t u = 0; u < full.n_users(); ++u) {
    RankingTask task;
    task.user = u;
    task.test_item = split.test_item[u];
    // The full dataset still contains the held-out interaction, so sampling
    // against it keeps both train and test items out of the negatives.
    task.negatives = sample_negatives(full, u, kNumNegatives, derive_seed(seed, {u}));
    tasks.push_back(std::move(task));
  }
  return tasks;
}

}  // namespace fmfldp::eval
