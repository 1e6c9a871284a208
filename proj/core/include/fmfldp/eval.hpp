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

#ifndef FMFLDP_EVAL_HPP_
#define FMFLDP_EVAL_HPP_

#include <cstdint>
#include <map>
#include <vector>

#include "fmfldp/dataset.hpp"
#include "fmfldp/mf.hpp"

namespace fmfldp::eval {

// Number of non-interacted items ranked against each held-out test item.
inline constexpr std::size_t kNumNegatives = 99;

// One leave-one-out ranking instance: the held-out item competes against
// negatives the user never interacted with.
struct RankingTask {
  std::uint32_t user = 0;
  std::uint32_t test_item = 0;
  std::vector<std::uint32_t> negatives;

  friend bool operator==(const RankingTask&, const RankingTask&) = default;
};

struct Metrics {
  std::map<int, double> hr;  // cutoff K -> hit ratio
  std::size_t n_users = 0;

  friend bool operator==(const Metrics&, const Metrics&) = default;
};

// 1-based position of the test item among {test item} union negatives when
// sorted by descending score. Score ties count as ranked above the test item
// only for items with a smaller index, which makes the rank deterministic.
int rank_test_item(const mf::UserEmbedding& x, const mf::ItemMatrix& V,
                   const RankingTask& task);

// Fraction of tasks whose test item ranks within the top K, for each cutoff.
// Cutoffs must be positive and strictly ascending.
Metrics hit_ratio(const std::vector<RankingTask>& tasks,
                  const std::vector<mf::UserEmbedding>& X, const mf::ItemMatrix& V,
                  const std::vector<int>& cutoffs);

// Closed-form expectation for a scorer that ranks uniformly at random:
// hr[K] = K / (1 + kNumNegatives).
Metrics random_baseline(const std::vector<int>& cutoffs);

// Empirical metrics of a model that assigns i.i.d. random scores. Each task
// uses the stream derive_seed(seed, {stream::kRandomModel, user}).
Metrics random_model_hit_ratio(const std::vector<RankingTask>& tasks,
                               const std::vector<int>& cutoffs, std::uint64_t seed);

// One task per user. Negatives are drawn against the full pre-split dataset
// so neither train nor test interactions can appear among them; per-user
// stream seed is derive_seed(seed, {user}).
std::vector<RankingTask> build_ranking_tasks(const InteractionDataset& full,
                                             const SplitPair& split,
                                             std::uint64_t seed);

}  // namespace fmfldp::eval

#endif  // FMFLDP_EVAL_HPP_
