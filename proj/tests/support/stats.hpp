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

#ifndef FMFLDP_TESTS_SUPPORT_STATS_HPP_
#define FMFLDP_TESTS_SUPPORT_STATS_HPP_

#include <cstdint>
#include <vector>

namespace fmfldp::test {

// Pearson statistic against explicit expected counts.
double chi_square_stat(const std::vector<std::int64_t>& observed,
                       const std::vector<double>& expected);

// Pearson statistic against the uniform distribution over the buckets.
double chi_square_uniform_stat(const std::vector<std::int64_t>& observed);

// Upper-tail p-value of the chi-square distribution.
double chi_square_p_value(double stat, double degrees_of_freedom);

// Convenience: p-value of observed counts against uniform buckets.
double uniform_fit_p_value(const std::vector<std::int64_t>& observed);

}  // namespace fmfldp::test

#endif  // FMFLDP_TESTS_SUPPORT_STATS_HPP_
