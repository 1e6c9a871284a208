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

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <map>
#include <vector>

#include "support/stats.hpp"

namespace fmfldp::ldp {
namespace {

MechanismParams small_params(double epsilon, std::size_t n_items, std::size_t n_factors,
                             std::size_t k = 1) {
  MechanismParams params;
  params.epsilon = epsilon;
  params.n_items = n_items;
  params.n_factors = n_factors;
  params.reports_per_user = k;
  return params;
}

mf::ItemGradient ramp_gradient(Eigen::Index rows, Eigen::Index cols, double lo, double hi) {
  mf::ItemGradient g(rows, cols);
  const double n = static_cast<double>(rows * cols - 1);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index f = 0; f < cols; ++f) {
      const double t = n == 0.0 ? 0.0 : static_cast<double>(i * cols + f) / n;
      g(i, f) = lo + t * (hi - lo);
    }
  }
  return g;
}

TEST(BernoulliProb, HandValuesAtLogThree) {
  const double eps = std::log(3.0);
  EXPECT_NEAR(bernoulli_prob(1.0, eps), 0.75, 1e-15);
  EXPECT_NEAR(bernoulli_prob(0.0, eps), 0.50, 1e-15);
  EXPECT_NEAR(bernoulli_prob(-1.0, eps), 0.25, 1e-15);
  EXPECT_NEAR(bernoulli_prob(0.5, eps), 0.625, 1e-15);
}

TEST(BernoulliProb, MonotoneAndBounded) {
  const double eps = 2.5;
  double prev = 0.0;
  for (int i = 0; i <= 100; ++i) {
    const double x = -1.0 + 2.0 * i / 100.0;
    const double p = bernoulli_prob(x, eps);
    EXPECT_GT(p, 0.0);
    EXPECT_LT(p, 1.0);
    if (i > 0) {
      EXPECT_GT(p, prev);
    }
    prev = p;
  }
  // Extremes are e^eps / (e^eps + 1) and its complement.
  const double top = std::exp(eps) / (std::exp(eps) + 1.0);
  EXPECT_NEAR(bernoulli_prob(1.0, eps), top, 1e-15);
  EXPECT_NEAR(bernoulli_prob(-1.0, eps), 1.0 - top, 1e-15);
}

TEST(BernoulliProb, RejectsOutOfRangeValues) {
  EXPECT_THROW(bernoulli_prob(1.0000001, 1.0), std::invalid_argument);
  EXPECT_THROW(bernoulli_prob(-1.0000001, 1.0), std::invalid_argument);
  EXPECT_THROW(bernoulli_prob(std::nan(""), 1.0), std::invalid_argument);
  EXPECT_NO_THROW(bernoulli_prob(1.0, 1.0));
  EXPECT_NO_THROW(bernoulli_prob(-1.0, 1.0));
}

TEST(ScaleConstant, HandValueAtLogThree) {
  // (e^eps + 1)/(e^eps - 1) = 2 at eps = ln 3, times M F = 10.
  const auto params = small_params(std::log(3.0), 5, 2);
  EXPECT_NEAR(scale_constant(params), 20.0, 1e-12);
}

TEST(MechanismParams, ValidatesShapeAndBudget) {
  EXPECT_NO_THROW(small_params(2.5, 100, 5, 10).validate());
  EXPECT_THROW(small_params(2.5, 0, 5).validate(), std::invalid_argument);
  EXPECT_THROW(small_params(2.5, 100, 0).validate(), std::invalid_argument);
  EXPECT_THROW(small_params(0.0, 100, 5).validate(), std::invalid_argument);
  EXPECT_THROW(small_params(-1.0, 100, 5).validate(), std::invalid_argument);
  EXPECT_THROW(small_params(std::numeric_limits<double>::infinity(), 100, 5).validate(),
               std::invalid_argument);
  auto params = small_params(2.5, 100, 5);
  params.reports_per_user = 0;
  EXPECT_THROW(params.validate(), std::invalid_argument);
  // Flattened cell index must fit the 32-bit report field.
  EXPECT_THROW(small_params(2.5, std::size_t{1} << 31, 2).validate(), std::invalid_argument);
}

TEST(MechanismParams, BuiltFromHyperParams) {
  mf::HyperParams hp;
  hp.epsilon = 1.5;
  hp.n_factors = 7;
  hp.reports_per_user = 33;
  const MechanismParams params = make_mechanism_params(hp, 420);
  EXPECT_EQ(params.epsilon, 1.5);
  EXPECT_EQ(params.n_items, 420u);
  EXPECT_EQ(params.n_factors, 7u);
  EXPECT_EQ(params.reports_per_user, 33u);
  EXPECT_EQ(params.cells(), 2940u);
}

TEST(PrivacyBudget, ScalesLinearlyInReportCount) {
  EXPECT_DOUBLE_EQ(privacy_budget(small_params(2.5, 10, 5, 100)), 250.0);
  EXPECT_DOUBLE_EQ(privacy_budget(small_params(0.5, 10, 5, 1)), 0.5);
}

TEST(ClipToUnit, ClampsElementwise) {
  mf::ItemGradient g(2, 2);
  g << -3.0, -1.0, 0.25, 7.5;
  const mf::ItemGradient clipped = clip_to_unit(g);
  EXPECT_EQ(clipped(0, 0), -1.0);
  EXPECT_EQ(clipped(0, 1), -1.0);
  EXPECT_EQ(clipped(1, 0), 0.25);
  EXPECT_EQ(clipped(1, 1), 1.0);
}

TEST(PerturbOnce, CellUniformAndFairSignOnZeroGradient) {
  const auto params = small_params(2.5, 4, 3);
  const mf::ItemGradient zero = mf::ItemGradient::Zero(4, 3);
  Rng rng(101);
  constexpr int kDraws = 60000;
  std::vector<std::int64_t> cell_counts(params.cells(), 0);
  std::int64_t positives = 0;
  for (int n = 0; n < kDraws; ++n) {
    const PerturbedReport r = perturb_once(zero, params, rng);
    ASSERT_LT(r.cell_index, params.cells());
    ++cell_counts[r.cell_index];
    positives += r.positive ? 1 : 0;
  }
  EXPECT_GT(test::uniform_fit_p_value(cell_counts), 1e-3);
  // Zero gradient: sign is a fair coin. 6 sigma for Binomial(60000, 1/2).
  EXPECT_NEAR(positives, kDraws / 2, 6.0 * std::sqrt(kDraws * 0.25));
}

TEST(PerturbOnce, SignFrequenciesTrackTheCellValue) {
  const double eps = std::log(3.0);
  const auto params = small_params(eps, 2, 2);
  mf::ItemGradient g(2, 2);
  g << 1.0, 0.0, -1.0, 0.5;
  const std::vector<double> expected_p = {0.75, 0.5, 0.25, 0.625};

  Rng rng(202);
  constexpr int kDraws = 80000;
  std::vector<std::int64_t> seen(4, 0);
  std::vector<std::int64_t> pos(4, 0);
  for (int n = 0; n < kDraws; ++n) {
    const PerturbedReport r = perturb_once(g, params, rng);
    ++seen[r.cell_index];
    pos[r.cell_index] += r.positive ? 1 : 0;
  }
  for (int cell = 0; cell < 4; ++cell) {
    ASSERT_GT(seen[cell], 0);
    const double n = static_cast<double>(seen[cell]);
    const double p_hat = static_cast<double>(pos[cell]) / n;
    const double sigma = std::sqrt(expected_p[cell] * (1 - expected_p[cell]) / n);
    EXPECT_NEAR(p_hat, expected_p[cell], 6.0 * sigma) << "cell " << cell;
  }
}

TEST(PerturbOnce, LazyAndDensePathsProduceIdenticalReports) {
  const auto params = small_params(1.3, 7, 4);
  const mf::ItemGradient g = ramp_gradient(7, 4, -2.5, 2.5);
  const mf::ItemGradient clipped = clip_to_unit(g);
  Rng dense_rng(303);
  Rng lazy_rng(303);
  for (int n = 0; n < 200; ++n) {
    const PerturbedReport dense = perturb_once(clipped, params, dense_rng);
    const PerturbedReport lazy = perturb_once_with(
        [&](std::uint32_t item, std::uint32_t factor) { return clipped(item, factor); },
        params, lazy_rng);
    ASSERT_EQ(dense, lazy) << "report " << n;
  }
}

TEST(PerturbOnce, RejectsShapeMismatch) {
  const auto params = small_params(1.0, 3, 3);
  const mf::ItemGradient wrong = mf::ItemGradient::Zero(3, 2);
  Rng rng(1);
  EXPECT_THROW(perturb_once(wrong, params, rng), std::invalid_argument);
}

TEST(PerturbK, ClipsInternallyAndMatchesPreclippedSequence) {
  const auto params = small_params(0.8, 5, 3, 40);
  const mf::ItemGradient raw = ramp_gradient(5, 3, -4.0, 4.0);
  Rng rng_raw(404);
  Rng rng_clipped(404);
  const auto from_raw = perturb_k(raw, params, rng_raw);
  const auto from_clipped = perturb_k(clip_to_unit(raw), params, rng_clipped);
  ASSERT_EQ(from_raw.size(), 40u);
  EXPECT_EQ(from_raw, from_clipped);
}

TEST(DecodeReport, PlacesSignedMagnitudeAtTheCell) {
  const auto params = small_params(std::log(3.0), 2, 3);
  const double b = scale_constant(params);
  const mf::ItemGradient plus = decode_report({4, true}, params);
  ASSERT_EQ(plus.rows(), 2);
  ASSERT_EQ(plus.cols(), 3);
  EXPECT_EQ(plus(1, 1), b);
  EXPECT_EQ(plus.cwiseAbs().sum(), b);
  const mf::ItemGradient minus = decode_report({0, false}, params);
  EXPECT_EQ(minus(0, 0), -b);
  EXPECT_THROW(decode_report({6, true}, params), std::invalid_argument);
}

TEST(DecodeReport, SingleReportEstimateIsUnbiased) {
  // Mean of decoded reports converges to the clipped gradient cellwise.
  const double eps = 1.0;
  const auto params = small_params(eps, 2, 2);
  mf::ItemGradient g(2, 2);
  g << 0.8, -0.3, 0.0, -1.0;
  Rng rng(505);
  constexpr int kDraws = 200000;
  mf::ItemGradient sum = mf::ItemGradient::Zero(2, 2);
  for (int n = 0; n < kDraws; ++n) {
    sum += decode_report(perturb_once(g, params, rng), params);
  }
  const mf::ItemGradient mean = sum / static_cast<double>(kDraws);
  // Per-cell standard error is close to B / sqrt(n MF).
  const double se = scale_constant(params) / std::sqrt(static_cast<double>(kDraws) * 4.0);
  for (Eigen::Index i = 0; i < 2; ++i) {
    for (Eigen::Index f = 0; f < 2; ++f) {
      EXPECT_NEAR(mean(i, f), g(i, f), 5.0 * se) << "cell (" << i << "," << f << ")";
    }
  }
}

TEST(ReportDistribution, RatioBoundHoldsForEveryOutput) {
  // For any two clipped gradients, the probability of any (cell, sign)
  // output differs by at most e^eps. The bound is tight at values 1 and -1.
  const double eps = 1.7;
  const double bound = std::exp(eps);

  const mf::ItemGradient a = ramp_gradient(3, 2, -1.0, 1.0);
  const mf::ItemGradient b = ramp_gradient(3, 2, 1.0, -1.0);
  for (std::uint32_t cell = 0; cell < 6; ++cell) {
    const double pa = bernoulli_prob(a(cell / 2, cell % 2), eps);
    const double pb = bernoulli_prob(b(cell / 2, cell % 2), eps);
    // Cell choice is uniform for all inputs, so it cancels in the ratio.
    EXPECT_LE(pa / pb, bound + 1e-12);
    EXPECT_LE(pb / pa, bound + 1e-12);
    EXPECT_LE((1 - pa) / (1 - pb), bound + 1e-12);
    EXPECT_LE((1 - pb) / (1 - pa), bound + 1e-12);
  }
  const double tight = bernoulli_prob(1.0, eps) / bernoulli_prob(-1.0, eps);
  EXPECT_NEAR(tight, bound, 1e-9);
}

TEST(WireFormat, RoundTripsAndRejectsGarbage) {
  std::vector<std::uint8_t> bytes;
  encode_report({0x01020304, true}, bytes);
  ASSERT_EQ(bytes.size(), kWireReportBytes);
  // Little-endian cell index, then the sign byte.
  EXPECT_EQ(bytes[0], 0x04);
  EXPECT_EQ(bytes[1], 0x03);
  EXPECT_EQ(bytes[2], 0x02);
  EXPECT_EQ(bytes[3], 0x01);
  EXPECT_EQ(bytes[4], 0x01);
  EXPECT_EQ(decode_wire_report(bytes), (PerturbedReport{0x01020304, true}));

  encode_report({7, false}, bytes);
  ASSERT_EQ(bytes.size(), 2 * kWireReportBytes);  // encode appends
  const std::span<const std::uint8_t> second(bytes.data() + kWireReportBytes,
                                             kWireReportBytes);
  EXPECT_EQ(decode_wire_report(second), (PerturbedReport{7, false}));

  const std::vector<std::uint8_t> short_buf = {1, 2, 3, 4};
  EXPECT_THROW(decode_wire_report(short_buf), std::invalid_argument);
  const std::vector<std::uint8_t> bad_sign = {1, 0, 0, 0, 2};
  EXPECT_THROW(decode_wire_report(bad_sign), std::invalid_argument);
}

}  // namespace
}  // namespace fmfldp::ldp
