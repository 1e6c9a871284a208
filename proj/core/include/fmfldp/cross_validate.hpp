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

#ifndef FMFLDP_CROSS_VALIDATE_HPP_
#define FMFLDP_CROSS_VALIDATE_HPP_

#include <cstdint>
#include <vector>

#include "fmfldp/dataset.hpp"
#include "fmfldp/eval.hpp"
#include "fmfldp/mf.hpp"

namespace fmfldp::eval {

enum class ModelMode {
  kLdp,         // randomized reports through the shuffler
  kNonPrivate,  // exact mean gradients
  kRandom,      // untrained scorer, sanity floor
};

struct CrossValStats {
  Metrics mean;                    // per-cutoff mean over splits
  Metrics stddev;                  // per-cutoff sample stddev (0 when n_splits == 1)
  std::vector<Metrics> per_split;  // final metrics of each split
};

// Mean and sample standard deviation per cutoff; all inputs must share the
// same cutoffs.
CrossValStats summarize_metrics(const std::vector<Metrics>& per_split);

// Repeated leave-one-out evaluation: for each split s in [0, n_splits) the
// dataset is re-split with seed derive_seed(master_seed, {stream::kSplit, s}),
// negatives come from derive_seed(master_seed, {stream::kNegatives, s}), the
// model trains with derive_seed(master_seed, {stream::kRun, s}) and the final
// model is scored. Reported metrics are over the final epoch only.
CrossValStats cross_validate(const InteractionDataset& ds, const mf::HyperParams& hp,
                             SplitMode split_mode, std::size_t n_splits,
                             const std::vector<int>& cutoffs, std::uint64_t master_seed,
                             ModelMode mode);

}  // namespace fmfldp::eval

#endif  // FMFLDP_CROSS_VALIDATE_HPP_
