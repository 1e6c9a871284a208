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

#include "fmfldp/ldp.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace fmfldp::ldp {

void MechanismParams::validate() const {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
    throw std::invalid_argument("epsilon must be finite and positive");
  }
  if (n_items == 0 || n_factors == 0) {
    throw std::invalid_argument("mechanism needs a non-empty gradient grid");
  }
  if (n_items > std::numeric_limits<std::uint32_t>::max() / n_factors) {
    throw std::invalid_argument("gradient grid exceeds the 32-bit cell index space");
  }
  if (reports_per_user == 0) {
    throw std::invalid_argument("reports_per_user must be positive");
  }
}

MechanismParams make_mechanism_params(const mf::HyperParams& hp, std::size_t n_items) {
  hp.validate();
  MechanismParams params;
  params.epsilon = hp.epsilon;
  params.n_items = n_items;
  params.n_factors = hp.n_factors;
  params.reports_per_user = hp.reports_per_user;
  params.validate();
  return params;
}

double scale_constant(const MechanismParams& params) {
  params.validate();
  const double e = std::exp(params.epsilon);
  return (e + 1.0) / (e - 1.0) * static_cast<double>(params.n_items) *
         static_cast<double>(params.n_factors);
}

double bernoulli_prob(double x, double epsilon) {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
    throw std::invalid_argument("epsilon must be finite and positive");
  }
  if (!(x >= -1.0 && x <= 1.0)) {
    throw std::invalid_argument("randomized-response input " + std::to_string(x) +
                                " outside [-1, 1]");
  }
  // Evaluated as (e^eps (1 + x) + (1 - x)) / (2 e^eps + 2), which equals
  // (x (e^eps - 1) + e^eps + 1) / (2 e^eps + 2) but keeps both numerator
  // terms nonnegative. The cancellation-free form holds the probability
  // ratio p(1) / p(-1) at e^eps to within an ulp even for large epsilon.
  const double e = std::exp(epsilon);
  return (e * (1.0 + x) + (1.0 - x)) / (2.0 * e + 2.0);
}

mf::ItemGradient clip_to_unit(mf::ItemGradient grad) {
  return grad.cwiseMax(-1.0).cwiseMin(1.0);
}

PerturbedReport perturb_once(const mf::ItemGradient& clipped,
                             const MechanismParams& params, Rng& rng) {
  if (clipped.rows() != static_cast<Eigen::Index>(params.n_items) ||
      clipped.cols() != static_cast<Eigen::Index>(params.n_factors)) {
    throw std::invalid_argument("gradient shape does not match mechanism parameters");
  }
  return perturb_once_with(
      [&clipped](std::uint32_t item, std::uint32_t factor) {
        return clipped(item, factor);
      },
      params, rng);
}

std::vector<PerturbedReport> perturb_k(const mf::ItemGradient& grad,
                                       const MechanismParams& params, Rng& rng) {
  const mf::ItemGradient clipped = clip_to_unit(grad);
  std::vector<PerturbedReport> reports;
  reports.reserve(params.reports_per_user);
  for (std::size_t j = 0; j < params.reports_per_user; ++j) {
    reports.push_back(perturb_once(clipped, params, rng));
  }
  return reports;
}

mf::ItemGradient decode_report(const PerturbedReport& report,
                               const MechanismParams& params) {
  params.validate();
  if (report.cell_index >= params.cells()) {
    throw std::invalid_argument("report cell index " + std::to_string(report.cell_index) +
                                " outside a " + std::to_string(params.n_items) + "x" +
                                std::to_string(params.n_factors) + " gradient");
  }
  mf::ItemGradient decoded = mf::ItemGradient::Zero(
      static_cast<Eigen::Index>(params.n_items), static_cast<Eigen::Index>(params.n_factors));
  const double b = scale_constant(params);
  decoded(report.cell_index / params.n_factors, report.cell_index % params.n_factors) =
      report.positive ? b : -b;
  return decoded;
}

double privacy_budget(const MechanismParams& params) {
  params.validate();
  return static_cast<double>(params.reports_per_user) * params.epsilon;
}

void encode_report(const PerturbedReport& report, std::vector<std::uint8_t>& out) {
  out.push_back(static_cast<std::uint8_t>(report.cell_index & 0xff));
  out.push_back(static_cast<std::uint8_t>((report.cell_index >> 8) & 0xff));
  out.push_back(static_cast<std::uint8_t>((report.cell_index >> 16) & 0xff));
  out.push_back(static_cast<std::uint8_t>((report.cell_index >> 24) & 0xff));
  out.push_back(report.positive ? std::uint8_t{1} : std::uint8_t{0});
}

PerturbedReport decode_wire_report(std::span<const std::uint8_t> bytes) {
  if (bytes.size() != kWireReportBytes) {
    throw std::invalid_argument("wire report must be exactly " +
                                std::to_string(kWireReportBytes) + " bytes, got " +
                                std::to_string(bytes.size()));
  }
  if (bytes[4] > 1) {
    throw std::invalid_argument("wire report sign byte must be 0 or 1, got " +
                                std::to_string(bytes[4]));
  }
  PerturbedReport report;
  report.cell_index = static_cast<std::uint32_t>(bytes[0]) |
                      (static_cast<std::uint32_t>(bytes[1]) << 8) |
                      (static_cast<std::uint32_t>(bytes[2]) << 16) |
                      (static_cast<std::uint32_t>(bytes[3]) << 24);
  report.positive = bytes[4] == 1;
  return report;
}

}  // namespace fmfldp::ldp
