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

#ifndef FMFLDP_PROXY_HPP_
#define FMFLDP_PROXY_HPP_

#include <cstdint>
#include <span>
#include <vector>

#include "fmfldp/ldp.hpp"
#include "fmfldp/rng.hpp"

namespace fmfldp::proxy {

// What one client hands to the shuffler for one epoch.
struct ClientMessage {
  std::uint64_t client_id = 0;
  std::uint32_t epoch = 0;
  std::vector<ldp::PerturbedReport> reports;

  friend bool operator==(const ClientMessage&, const ClientMessage&) = default;
};

// The shuffler's output: reports with every client identifier removed and
// the order randomized. Nothing in this type can attribute a report to a
// sender.
struct AnonymousReportBatch {
  std::uint32_t epoch = 0;
  std::vector<ldp::PerturbedReport> reports;

  friend bool operator==(const AnonymousReportBatch&, const AnonymousReportBatch&) = default;
};

// Drops client ids, pools all reports and applies a uniform random
// permutation. All messages must carry the same epoch and the input must be
// non-empty.
AnonymousReportBatch strip_and_shuffle(const std::vector<ClientMessage>& messages,
                                       Rng& rng);

// Byte layout: u32 LE epoch, u32 LE report count, then each report in wire
// encoding (4-byte LE cell index plus sign byte).
std::vector<std::uint8_t> serialize_batch(const AnonymousReportBatch& batch);
AnonymousReportBatch deserialize_batch(std::span<const std::uint8_t> bytes);

}  // namespace fmfldp::proxy

#endif  // FMFLDP_PROXY_HPP_
