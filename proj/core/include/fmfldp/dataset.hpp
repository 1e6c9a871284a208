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

#ifndef FMFLDP_DATASET_HPP_
#define FMFLDP_DATASET_HPP_

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <unordered_map>
#include <vector>

namespace fmfldp {

// One row of a ratings CSV.
struct RawRating {
  std::int64_t user_id = 0;
  std::int64_t item_id = 0;
  double rating = 0.0;
  std::int64_t timestamp = 0;

  friend bool operator==(const RawRating&, const RawRating&) = default;
};

// (user index, item index, timestamp) with both indices dense.
struct IndexedInteraction {
  std::uint32_t user = 0;
  std::uint32_t item = 0;
  std::int64_t timestamp = 0;

  friend bool operator==(const IndexedInteraction&, const IndexedInteraction&) = default;
};

// Sparse binary user-item interaction matrix in CSR layout. Users and items
// carry dense indices; the original ids survive in lookup tables so that
// subsetting and filtering stay traceable to the source data. A stored pair
// means r_ui = 1; absence means r_ui = 0. Per-user item lists are sorted by
// item index.
class InteractionDataset {
 public:
  InteractionDataset() = default;

  // Builds a dataset over explicit id universes. Every interaction must
  // reference valid dense indices and no (user, item) pair may repeat.
  // Ids must be unique; they define the dense index order as given.
  static InteractionDataset from_indexed(std::vector<std::int64_t> user_ids,
                                         std::vector<std::int64_t> item_ids,
                                         std::vector<IndexedInteraction> interactions);

  std::size_t n_users() const { return user_ids_.size(); }
  std::size_t n_items() const { return item_ids_.size(); }
  std::size_t n_interactions() const { return items_.size(); }

  // Item indices of one user, ascending.
  std::span<const std::uint32_t> items_of(std::uint32_t user) const;
  // Timestamps aligned with items_of(user).
  std::span<const std::int64_t> timestamps_of(std::uint32_t user) const;
  bool has_interaction(std::uint32_t user, std::uint32_t item) const;

  std::int64_t user_id(std::uint32_t user) const { return user_ids_.at(user); }
  std::int64_t item_id(std::uint32_t item) const { return item_ids_.at(item); }
  std::optional<std::uint32_t> user_index(std::int64_t original_id) const;
  std::optional<std::uint32_t> item_index(std::int64_t original_id) const;

  const std::vector<std::int64_t>& user_ids() const { return user_ids_; }
  const std::vector<std::int64_t>& item_ids() const { return item_ids_; }

  // Fraction of the user-item grid that is empty.
  double sparsity() const;

  // Human-readable "key=value" lines: user, item and interaction counts
  // plus sparsity.
  std::string summary() const;

  friend bool operator==(const InteractionDataset& a, const InteractionDataset& b);

 private:
  std::vector<std::size_t> offsets_;      // size n_users + 1
  std::vector<std::uint32_t> items_;      // concatenated per-user item lists
  std::vector<std::int64_t> timestamps_;  // aligned with items_
  std::vector<std::int64_t> user_ids_;    // dense index -> original id
  std::vector<std::int64_t> item_ids_;
  std::unordered_map<std::int64_t, std::uint32_t> user_index_;
  std::unordered_map<std::int64_t, std::uint32_t> item_index_;
};

// Parses a ratings CSV with header "userId,movieId,rating,timestamp".
// Malformed rows raise std::runtime_error naming the 1-based line number.
std::vector<RawRating> parse_ratings(std::istream& in);

// Convenience overload; errors mention the path.
std::vector<RawRating> parse_ratings_file(const std::string& path);

// Collapses ratings to binary interactions: every rated pair becomes
// r_ui = 1 and duplicate (user, item) pairs keep the latest timestamp.
InteractionDataset binarize(const std::vector<RawRating>& ratings);

// Alternately removes users and items with fewer than `threshold`
// interactions until both directions are stable.
InteractionDataset filter_min_interactions(const InteractionDataset& ds,
                                           std::size_t threshold);

// Keeps `n_items` uniformly sampled items, then `n_users` users sampled
// uniformly from those with at least one interaction left. Streams are
// derive_seed(seed, {stream::kSubsetItems}) and {stream::kSubsetUsers}.
InteractionDataset sample_subset(const InteractionDataset& ds,
                                 std::size_t n_users,
                                 std::size_t n_items,
                                 std::uint64_t seed);

enum class SplitMode {
  kRandomLeaveOneOut,  // hold out one uniformly chosen interaction per user
  kLatestLeaveOneOut,  // hold out the interaction with the newest timestamp
};

// Train set plus one held-out test item per user. The train set keeps the
// full user and item index spaces of the source dataset.
struct SplitPair {
  InteractionDataset train;
  std::vector<std::uint32_t> test_item;  // dense user index -> item index
  SplitMode mode = SplitMode::kRandomLeaveOneOut;
  std::uint64_t seed = 0;
};

// Removes exactly one interaction per user. Requires every user to have at
// least two interactions. Random choices use per-user streams
// derive_seed(seed, {stream::kSplit, user}); latest-mode timestamp ties
// break toward the larger item index.
SplitPair split_leave_one_out(const InteractionDataset& ds, SplitMode mode,
                              std::uint64_t seed);

// `n` distinct items the user has not interacted with, excluding `exclude`
// as well. Sampling stream: derive_seed(seed, {stream::kNegatives}).
std::vector<std::uint32_t> sample_negatives(const InteractionDataset& ds,
                                            std::uint32_t user,
                                            std::size_t n,
                                            std::uint64_t seed,
                                            std::span<const std::uint32_t> exclude = {});

}  // namespace fmfldp

#endif  // FMFLDP_DATASET_HPP_
