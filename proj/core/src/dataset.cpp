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

#include "fmfldp/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <sstream>
#include <stdexcept>

#include "fmfldp/rng.hpp"

namespace fmfldp {
namespace {

constexpr char kExpectedHeader[] = "userId,movieId,rating,timestamp";

std::string strip_cr(std::string line) {
  if (!line.empty() && line.back() == '\r') {
    line.pop_back();
  }
  return line;
}

[[noreturn]] void parse_error(std::size_t line_no, const std::string& what) {
  throw std::runtime_error("ratings line " + std::to_string(line_no) + ": " + what);
}

template <typename T>
T parse_number(std::string_view field, std::size_t line_no, const char* name) {
  T value{};
  const char* first = field.data();
  const char* last = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || field.empty()) {
    parse_error(line_no, std::string("malformed ") + name + " '" + std::string(field) + "'");
  }
  return value;
}

// Raw (user id, item id, timestamp) triple prior to densification.
struct IdTriple {
  std::int64_t user_id;
  std::int64_t item_id;
  std::int64_t timestamp;
};

std::vector<std::int64_t> sorted_unique_ids(const std::vector<IdTriple>& triples,
                                            std::int64_t IdTriple::* field) {
  std::vector<std::int64_t> ids;
  ids.reserve(triples.size());
  for (const auto& t : triples) ids.push_back(t.*field);
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

// Densifies ids (ascending id order) and builds the CSR dataset. Duplicate
// (user, item) pairs must have been resolved by the caller.
InteractionDataset build_from_triples(const std::vector<IdTriple>& triples) {
  std::vector<std::int64_t> user_ids = sorted_unique_ids(triples, &IdTriple::user_id);
  std::vector<std::int64_t> item_ids = sorted_unique_ids(triples, &IdTriple::item_id);

  std::unordered_map<std::int64_t, std::uint32_t> user_index;
  user_index.reserve(user_ids.size());
  for (std::uint32_t i = 0; i < user_ids.size(); ++i) user_index.emplace(user_ids[i], i);
  std::unordered_map<std::int64_t, std::uint32_t> item_index;
  item_index.reserve(item_ids.size());
  for (std::uint32_t i = 0; i < item_ids.size(); ++i) item_index.emplace(item_ids[i], i);

  std::vector<IndexedInteraction> interactions;
  interactions.reserve(triples.size());
  for (const auto& t : triples) {
    interactions.push_back({user_index.at(t.user_id), item_index.at(t.item_id), t.timestamp});
  }
  return InteractionDataset::from_indexed(std::move(user_ids), std::move(item_ids),
                                          std::move(interactions));
}

}  // namespace

InteractionDataset InteractionDataset::from_indexed(
    std::vector<std::int64_t> user_ids, std::vector<std::int64_t> item_ids,
    std::vector<IndexedInteraction> interactions) {
  InteractionDataset ds;
  ds.user_ids_ = std::move(user_ids);
  ds.item_ids_ = std::move(item_ids);
  ds.user_index_.reserve(ds.user_ids_.size());
  for (std::uint32_t i = 0; i < ds.user_ids_.size(); ++i) {
    if (!ds.user_index_.emplace(ds.user_ids_[i], i).second) {
      throw std::invalid_argument("duplicate user id " + std::to_string(ds.user_ids_[i]));
    }
  }
  ds.item_index_.reserve(ds.item_ids_.size());
  for (std::uint32_t i = 0; i < ds.item_ids_.size(); ++i) {
    if (!ds.item_index_.emplace(ds.item_ids_[i], i).second) {
      throw std::invalid_argument("duplicate item id " + std::to_string(ds.item_ids_[i]));
    }
  }

  std::sort(interactions.begin(), interactions.end(),
            [](const IndexedInteraction& a, const IndexedInteraction& b) {
              return std::tie(a.user, a.item) < std::tie(b.user, b.item);
            });
  ds.offsets_.assign(ds.user_ids_.size() + 1, 0);
  ds.items_.reserve(interactions.size());
  ds.timestamps_.reserve(interactions.size());
  for (std::size_t i = 0; i < interactions.size(); ++i) {
    const auto& e = interactions[i];
    if (e.user >= ds.n_users() || e.item >= ds.n_items()) {
      throw std::invalid_argument("interaction index out of range");
    }
    if (i > 0 && interactions[i - 1].user == e.user && interactions[i - 1].item == e.item) {
      throw std::invalid_argument("duplicate interaction for user index " +
                                  std::to_string(e.user) + ", item index " +
                                  std::to_string(e.item));
    }
    ds.offsets_[e.user + 1] += 1;
    ds.items_.push_back(e.item);
    ds.timestamps_.push_back(e.timestamp);
  }
  for (std::size_t u = 0; u < ds.user_ids_.size(); ++u) {
    ds.offsets_[u + 1] += ds.offsets_[u];
  }
  return ds;
}

std::span<const std::uint32_t> InteractionDataset::items_of(std::uint32_t user) const {
  if (user >= n_users()) {
    throw std::out_of_range("user index " + std::to_string(user) + " out of range");
  }
  return {items_.data() + offsets_[user], offsets_[user + 1] - offsets_[user]};
}

std::span<const std::int64_t> InteractionDataset::timestamps_of(std::uint32_t user) const {
  if (user >= n_users()) {
    throw std::out_of_range("user index " + std::to_string(user) + " out of range");
  }
  return {timestamps_.data() + offsets_[user], offsets_[user + 1] - offsets_[user]};
}

bool InteractionDataset::has_interaction(std::uint32_t user, std::uint32_t item) const {
  const auto items = items_of(user);
  return std::binary_search(items.begin(), items.end(), item);
}

std::optional<std::uint32_t> InteractionDataset::user_index(std::int64_t original_id) const {
  const auto it = user_index_.find(original_id);
  if (it == user_index_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::uint32_t> InteractionDataset::item_index(std::int64_t original_id) const {
  const auto it = item_index_.find(original_id);
  if (it == item_index_.end()) return std::nullopt;
  return it->second;
}

double InteractionDataset::sparsity() const {
  const double cells = static_cast<double>(n_users()) * static_cast<double>(n_items());
  if (cells == 0.0) return 1.0;
  return 1.0 - static_cast<double>(n_interactions()) / cells;
}

std::string InteractionDataset::summary() const {
  std::ostringstream out;
  out << "n_users=" << n_users() << '\n'
      << "n_items=" << n_items() << '\n'
      << "n_interactions=" << n_interactions() << '\n';
  out.precision(6);
  out << std::fixed << "sparsity=" << sparsity() << '\n';
  return out.str();
}

bool operator==(const InteractionDataset& a, const InteractionDataset& b) {
  return a.offsets_ == b.offsets_ && a.items_ == b.items_ &&
         a.timestamps_ == b.timestamps_ && a.user_ids_ == b.user_ids_ &&
         a.item_ids_ == b.item_ids_;
}

std::vector<RawRating> parse_ratings(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) {
    throw std::runtime_error("ratings stream is empty");
  }
  if (strip_cr(line) != kExpectedHeader) {
    throw std::runtime_error(std::string("ratings header must be '") + kExpectedHeader +
                             "', got '" + strip_cr(line) + "'");
  }

  std::vector<RawRating> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    line = strip_cr(line);
    if (line.empty()) {
      parse_error(line_no, "empty row");
    }
    std::string_view view(line);
    std::string_view fields[4];
    std::size_t field_count = 0;
    while (true) {
      const std::size_t comma = view.find(',');
      const std::string_view field = view.substr(0, comma);
      if (field_count == 4) {
        parse_error(line_no, "expected 4 fields");
      }
      fields[field_count++] = field;
      if (comma == std::string_view::npos) break;
      view.remove_prefix(comma + 1);
    }
    if (field_count != 4) {
      parse_error(line_no, "expected 4 fields");
    }

    RawRating r;
    r.user_id = parse_number<std::int64_t>(fields[0], line_no, "user id");
    r.item_id = parse_number<std::int64_t>(fields[1], line_no, "item id");
    r.rating = parse_number<double>(fields[2], line_no, "rating");
    r.timestamp = parse_number<std::int64_t>(fields[3], line_no, "timestamp");
    if (!(r.rating > 0.0)) {
      parse_error(line_no, "rating must be positive, got '" + std::string(fields[2]) + "'");
    }
    if (r.timestamp < 0) {
      parse_error(line_no, "timestamp must be non-negative");
    }
    out.push_back(r);
  }
  return out;
}

std::vector<RawRating> parse_ratings_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open ratings file '" + path + "'");
  }
  try {
    return parse_ratings(in);
  } catch (const std::runtime_error& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
}

InteractionDataset binarize(const std::vector<RawRating>& ratings) {
  if (ratings.empty()) {
    throw std::invalid_argument("cannot binarize an empty ratings list");
  }
  std::vector<IdTriple> triples;
  triples.reserve(ratings.size());
  for (const auto& r : ratings) {
    triples.push_back({r.user_id, r.item_id, r.timestamp});
  }
  // Duplicates keep the latest timestamp: sort so the newest copy of each
  // (user, item) pair comes last, then keep that copy.
  std::sort(triples.begin(), triples.end(), [](const IdTriple& a, const IdTriple& b) {
    return std::tie(a.user_id, a.item_id, a.timestamp) <
           std::tie(b.user_id, b.item_id, b.timestamp);
  });
  std::vector<IdTriple> unique;
  unique.reserve(triples.size());
  for (std::size_t i = 0; i < triples.size(); ++i) {
    if (i + 1 < triples.size() && triples[i + 1].user_id == triples[i].user_id &&
        triples[i + 1].item_id == triples[i].item_id) {
      continue;
    }
    unique.push_back(triples[i]);
  }
  return build_from_triples(unique);
}

InteractionDataset filter_min_interactions(const InteractionDataset& ds,
                                           std::size_t threshold) {
  if (threshold == 0) {
    throw std::invalid_argument("filter threshold must be at least 1");
  }
  std::vector<bool> keep_user(ds.n_users(), true);
  std::vector<bool> keep_item(ds.n_items(), true);

  bool changed = true;
  while (changed) {
    changed = false;
    for (std::uint32_t u = 0; u < ds.n_users(); ++u) {
      if (!keep_user[u]) continue;
      std::size_t degree = 0;
      for (std::uint32_t i : ds.items_of(u)) {
        if (keep_item[i]) ++degree;
      }
      if (degree < threshold) {
        keep_user[u] = false;
        changed = true;
      }
    }
    std::vector<std::size_t> item_degree(ds.n_items(), 0);
    for (std::uint32_t u = 0; u < ds.n_users(); ++u) {
      if (!keep_user[u]) continue;
      for (std::uint32_t i : ds.items_of(u)) {
        if (keep_item[i]) ++item_degree[i];
      }
    }
    for (std::uint32_t i = 0; i < ds.n_items(); ++i) {
      if (keep_item[i] && item_degree[i] < threshold) {
        keep_item[i] = false;
        changed = true;
      }
    }
  }

  std::vector<IdTriple> triples;
  for (std::uint32_t u = 0; u < ds.n_users(); ++u) {
    if (!keep_user[u]) continue;
    const auto items = ds.items_of(u);
    const auto stamps = ds.timestamps_of(u);
    for (std::size_t j = 0; j < items.size(); ++j) {
      if (keep_item[items[j]]) {
        triples.push_back({ds.user_id(u), ds.item_id(items[j]), stamps[j]});
      }
    }
  }
  if (triples.empty()) {
    throw std::runtime_error("no interactions satisfy the minimum-interaction filter (threshold " +
                             std::to_string(threshold) + ")");
  }
  return build_from_triples(triples);
}

InteractionDataset sample_subset(const InteractionDataset& ds, std::size_t n_users,
                                 std::size_t n_items, std::uint64_t seed) {
  if (n_users == 0 || n_items == 0) {
    throw std::invalid_argument("subset dimensions must be positive");
  }
  if (n_items > ds.n_items()) {
    throw std::invalid_argument("requested " + std::to_string(n_items) + " items, dataset has " +
                                std::to_string(ds.n_items()));
  }
  Rng item_rng = Rng::derive(seed, {stream::kSubsetItems});
  const std::vector<std::size_t> item_pick =
      item_rng.sample_without_replacement(ds.n_items(), n_items);
  std::vector<bool> keep_item(ds.n_items(), false);
  for (std::size_t i : item_pick) keep_item[i] = true;

  std::vector<std::uint32_t> eligible;
  for (std::uint32_t u = 0; u < ds.n_users(); ++u) {
    for (std::uint32_t i : ds.items_of(u)) {
      if (keep_item[i]) {
        eligible.push_back(u);
        break;
      }
    }
  }
  if (n_users > eligible.size()) {
    throw std::invalid_argument("requested " + std::to_string(n_users) + " users, only " +
                                std::to_string(eligible.size()) +
                                " interact with the sampled items");
  }
  Rng user_rng = Rng::derive(seed, {stream::kSubsetUsers});
  const std::vector<std::size_t> user_pick =
      user_rng.sample_without_replacement(eligible.size(), n_users);

  // The sampled universes define the output dimensions even when an item ends
  // up with no interactions among the chosen users; the model size must match
  // the request exactly.
  std::vector<std::int64_t> user_ids;
  user_ids.reserve(n_users);
  for (std::size_t p : user_pick) user_ids.push_back(ds.user_id(eligible[p]));
  std::sort(user_ids.begin(), user_ids.end());
  std::vector<std::int64_t> item_ids;
  item_ids.reserve(n_items);
  for (std::size_t i : item_pick) item_ids.push_back(ds.item_id(static_cast<std::uint32_t>(i)));
  std::sort(item_ids.begin(), item_ids.end());

  std::unordered_map<std::int64_t, std::uint32_t> user_map;
  for (std::uint32_t u = 0; u < user_ids.size(); ++u) user_map[user_ids[u]] = u;
  std::vector<std::uint32_t> item_map(ds.n_items(), 0);
  for (std::uint32_t i = 0; i < item_ids.size(); ++i) {
    item_map[ds.item_index(item_ids[i]).value()] = i;
  }

  std::vector<IndexedInteraction> interactions;
  for (std::size_t p : user_pick) {
    const std::uint32_t u = eligible[p];
    const std::uint32_t new_u = user_map.at(ds.user_id(u));
    const auto items = ds.items_of(u);
    const auto stamps = ds.timestamps_of(u);
    for (std::size_t j = 0; j < items.size(); ++j) {
      if (keep_item[items[j]]) {
        interactions.push_back({new_u, item_map[items[j]], stamps[j]});
      }
    }
  }
  return InteractionDataset::from_indexed(std::move(user_ids), std::move(item_ids),
                                          std::move(interactions));
}

SplitPair split_leave_one_out(const InteractionDataset& ds, SplitMode mode,
                              std::uint64_t seed) {
  SplitPair split;
  split.mode = mode;
  split.seed = seed;
  split.test_item.resize(ds.n_users());

  std::vector<IndexedInteraction> train;
  train.reserve(ds.n_interactions() > ds.n_users() ? ds.n_interactions() - ds.n_users() : 0);
  for (std::uint32_t u = 0; u < ds.n_users(); ++u) {
    const auto items = ds.items_of(u);
    const auto stamps = ds.timestamps_of(u);
    if (items.size() < 2) {
      throw std::runtime_error("user id " + std::to_string(ds.user_id(u)) +
                               " has fewer than 2 interactions; cannot hold one out");
    }
    std::size_t held_out = 0;
    if (mode == SplitMode::kRandomLeaveOneOut) {
      held_out = Rng::derive(seed, {stream::kSplit, u}).next_index(items.size());
    } else {
      for (std::size_t j = 1; j < items.size(); ++j) {
        // Ties on the timestamp go to the larger item index; item lists are
        // ascending, so >= keeps the later entry.
        if (stamps[j] >= stamps[held_out]) held_out = j;
      }
    }
    split.test_item[u] = items[held_out];
    for (std::size_t j = 0; j < items.size(); ++j) {
      if (j != held_out) {
        train.push_back({u, items[j], stamps[j]});
      }
    }
  }
  split.train = InteractionDataset::from_indexed(ds.user_ids(), ds.item_ids(), std::move(train));
  return split;
}

std::vector<std::uint32_t> sample_negatives(const InteractionDataset& ds, std::uint32_t user,
                                            std::size_t n, std::uint64_t seed,
                                            std::span<const std::uint32_t> exclude) {
  if (user >= ds.n_users()) {
    throw std::out_of_range("user index " + std::to_string(user) + " out of range");
  }
  const auto items = ds.items_of(user);
  std::vector<std::uint32_t> excluded(exclude.begin(), exclude.end());
  std::sort(excluded.begin(), excluded.end());
  excluded.erase(std::unique(excluded.begin(), excluded.end()), excluded.end());

  std::size_t blocked = items.size();
  for (std::uint32_t e : excluded) {
    if (e >= ds.n_items()) {
      throw std::out_of_range("excluded item index " + std::to_string(e) + " out of range");
    }
    if (!std::binary_search(items.begin(), items.end(), e)) ++blocked;
  }
  if (n > ds.n_items() - blocked) {
    throw std::invalid_argument("user id " + std::to_string(ds.user_id(user)) + " has only " +
                                std::to_string(ds.n_items() - blocked) +
                                " non-interacted items, need " + std::to_string(n));
  }

  Rng rng = Rng::derive(seed, {stream::kNegatives});
  std::vector<std::uint32_t> out;
  out.reserve(n);
  std::vector<bool> chosen(ds.n_items(), false);
  while (out.size() < n) {
    const auto candidate = static_cast<std::uint32_t>(rng.next_index(ds.n_items()));
    if (chosen[candidate] || std::binary_search(items.begin(), items.end(), candidate) ||
        std::binary_search(excluded.begin(), excluded.end(), candidate)) {
      continue;
    }
    chosen[candidate] = true;
    out.push_back(candidate);
  }
  return out;
}

}  // namespace fmfldp
