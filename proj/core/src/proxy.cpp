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

#include "fmfldp/proxy.hpp"

#include <stdexcept>
#include <string>

namespace fmfldp::proxy {
namespace {

void append_u32_le(std::uint32_t value, std::vector<std::uint8_t>& out) {
  out.push_back(static_cast<std::uint8_t>(value & 0xff));
  out.push_back(static_cast<std::uint8_t>((value >> 8) & 0xff));
  out.push_back(static_cast<std::uint8_t>((value >> 16) & 0xff));
  out.push_back(static_cast<std::uint8_t>((value >> 24) & 0xff));
}

std::uint32_t read_u32_le(std::span<const std::uint8_t> bytes) {
  return static_cast<std::uint32_t>(bytes[0]) | (static_cast<std::uint32_t>(bytes[1]) << 8) |
         (static_cast<std::uint32_t>(bytes[2]) << 16) |
         (static_cast<std::uint32_t>(bytes[3]) << 24);
}

}  // namespace

AnonymousReportBatch strip_and_shuffle(const std::vector<ClientMessage>& messages,
                                       Rng& rng) {
  if (messages.empty()) {
    throw std::invalid_argument("shuffler received no client messages");
  }
  AnonymousReportBatch batch;
  batch.epoch = messages.front().epoch;
  std::size_t total = 0;
  for (const auto& m : messages) {
    if (m.epoch != batch.epoch) {
      throw std::invalid_argument("mixed epochs in shuffler input: " +
                                  std::to_string(batch.epoch) + " and " +
                                  std::to_string(m.epoch));
    }
    total += m.reports.size();
  }
  batch.reports.reserve(total);
  for (const auto& m : messages) {
    batch.reports.insert(batch.reports.end(), m.reports.begin(), m.reports.end());
  }
  rng.shuffle(batch.reports);
  return batch;
}

std::vector<std::uint8_t> serialize_batch(const AnonymousReportBatch& batch) {
  std::vector<std::uint8_t> out;
  out.reserve(8 + batch.reports.size() * ldp::kWireReportBytes);
  append_u32_le(batch.epoch, out);
  append_u32_le(static_cast<std::uint32_t>(batch.reports.size()), out);
  for (const auto& report : batch.reports) {
    ldp::encode_report(report, out);
  }
  return out;
}

AnonymousReportBatch deserialize_batch(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8) {
    throw std::invalid_argument("batch header truncated");
  }
  AnonymousReportBatch batch;
  batch.epoch = read_u32_le(bytes.subspan(0, 4));
  const std::uint32_t count = read_u32_le(bytes.subspan(4, 4));
  if (bytes.size() != 8 + static_cast<std::size_t>(count) * ldp::kWireReportBytes) {
    throw std::invalid_argument("batch length does not match report count");
  }
  batch.reports.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    batch.reports.push_back(
        ldp::decode_wire_report(bytes.subspan(8 + i * ldp::kWireReportBytes,
                                              ldp::kWireReportBytes)));
  }
  return batch;
}

}  // namespace fmfldp::proxy
