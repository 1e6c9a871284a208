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

#ifndef FMFLDP_LDP_HPP_
#define FMFLDP_LDP_HPP_

#include <cstdint>
#include <span>
#include <vector>

#include "fmfldp/mf.hpp"
#include "fmfldp/rng.hpp"

namespace fmfldp::ldp {

// One randomized-response report. It names a single flattened gradient cell
// and a sign; the magnitude is the public constant scale_constant(params).
struct PerturbedReport {
  std::uint32_t cell_index = 0;  // item * n_factors + factor, row-major
  bool positive = false;         // true decodes to +B, false to -B

  friend bool operator==(const PerturbedReport&, const PerturbedReport&) = default;
};

struct MechanismParams {
  double epsilon = 2.5;                // per-report privacy parameter
  std::size_t n_items = 0;             // M
  std::size_t n_factors = 0;           // F
  std::size_t reports_per_user = 1;    // k

  std::size_t cells() const { return n_items * n_factors; }
  void validate() const;

  friend bool operator==(const MechanismParams&, const MechanismParams&) = default;
};

MechanismParams make_mechanism_params(const mf::HyperParams& hp, std::size_t n_items);

// Decode magnitude B = ((e^eps + 1) / (e^eps - 1)) * M * F. This is the
// value that makes a single report an unbiased estimate of the full clipped
// gradient matrix.
double scale_constant(const MechanismParams& params);

// Pr[report is positive] for a clipped cell value x in [-1, 1]:
//   (x (e^eps - 1) + e^eps + 1) / (2 e^eps + 2).
// x = 1 gives e^eps / (e^eps + 1), x = -1 gives 1 / (e^eps + 1), x = 0
// gives 1/2.
double bernoulli_prob(double x, double epsilon);

// Elementwise clamp to [-1, 1].
mf::ItemGradient clip_to_unit(mf::ItemGradient grad);

// One randomized-response report over an already clipped gradient: picks a
// uniform cell, then tosses the biased coin for its value. Consumes exactly
// three Rng draws (item, factor, coin).
PerturbedReport perturb_once(const mf::ItemGradient& clipped,
                             const MechanismParams& params, Rng& rng);

// Same sampling with the clipped cell value produced on demand, for callers
// that never materialize the dense gradient. `clipped_value_at(item, factor)`
// must return exactly what the dense matrix would hold at that cell; the
// draw order matches perturb_once, so both produce identical reports from
// identical Rng states.
template <typename ValueAt>
PerturbedReport perturb_once_with(ValueAt&& clipped_value_at,
                                  const MechanismParams& params, Rng& rng) {
  params.validate();
  const auto item = static_cast<std::uint32_t>(rng.next_index(params.n_items));
  const auto factor = static_cast<std::uint32_t>(rng.next_index(params.n_factors));
  const double x = clipped_value_at(item, factor);
  const double p = bernoulli_prob(x, params.epsilon);
  PerturbedReport report;
  report.cell_index = item * static_cast<std::uint32_t>(params.n_factors) + factor;
  report.positive = rng.bernoulli(p);
  return report;
}

// k independent reports over one gradient; clips internally. Cells are
// sampled with replacement.
std::vector<PerturbedReport> perturb_k(const mf::ItemGradient& grad,
                                       const MechanismParams& params, Rng& rng);

// Dense unbiased single-report estimate: +-B at the reported cell, zero
// elsewhere.
mf::ItemGradient decode_report(const PerturbedReport& report,
                               const MechanismParams& params);

// User-level budget consumed by one epoch of k reports.
double privacy_budget(const MechanismParams& params);

// Wire encoding: 4-byte little-endian cell index followed by one sign byte
// (0x01 positive, 0x00 negative).
inline constexpr std::size_t kWireReportBytes = 5;

void encode_report(const PerturbedReport& report, std::vector<std::uint8_t>& out);
PerturbedReport decode_wire_report(std::span<const std::uint8_t> bytes);

}  // namespace fmfldp::ldp

#endif  // FMFLDP_LDP_HPP_
