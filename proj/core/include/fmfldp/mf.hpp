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

#ifndef FMFLDP_MF_HPP_
#define FMFLDP_MF_HPP_

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <vector>

#include "fmfldp/dataset.hpp"

namespace fmfldp::mf {

using Vector = Eigen::VectorXd;
// Row-major so row i is the contiguous embedding of item i and row-major
// serialization is the natural memory order.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using UserEmbedding = Vector;  // length F
using ItemMatrix = Matrix;     // M x F
using ItemGradient = Matrix;   // M x F, same layout as the item matrix

struct HyperParams {
  std::size_t n_factors = 5;           // embedding dimension F
  double reg = 1e-6;                   // L2 weight lambda
  double learning_rate = 1e-3;         // gamma
  double confidence_alpha = 40.0;      // confidence weight is 1 + alpha * r
  std::size_t epochs = 20;             // T
  std::size_t inner_steps = 20;        // item-matrix gradient steps per epoch
  double epsilon = 2.5;                // per-report privacy parameter
  std::size_t reports_per_user = 100;  // k

  // Throws std::invalid_argument on out-of-range values.
  void validate() const;

  friend bool operator==(const HyperParams&, const HyperParams&) = default;
};

// Confidence weight 1 + alpha * r for an interaction value r in {0, 1}.
double confidence(double r, double alpha);

// Gram matrix V^T V (F x F), shared across users within an epoch.
Eigen::MatrixXd item_gram(const ItemMatrix& V);

// Closed-form minimizer of the per-user objective
//   sum_i c_ui (p_ui - x^T v_i)^2 + lambda ||x||^2
// over all items i, i.e. the ridge solve
//   (V^T C_u V + lambda I) x = V^T C_u p_u.
// `interacted` holds the user's item indices in ascending order. Throws
// std::runtime_error when the normal equations cannot be solved to a
// relative residual of 1e-8.
UserEmbedding update_user_embedding(const ItemMatrix& V,
                                    std::span<const std::uint32_t> interacted,
                                    const HyperParams& hp);

// Same solution using a precomputed item Gram matrix; the normal matrix is
// assembled as gram + alpha * sum_{interacted} v v^T + lambda I, which
// agrees with the direct form because non-interacted items have unit
// confidence.
UserEmbedding update_user_embedding_gram(const ItemMatrix& V,
                                         const Eigen::MatrixXd& gram,
                                         std::span<const std::uint32_t> interacted,
                                         const HyperParams& hp);

// Per-user item-factor matrix f(u, i) = c_ui (p_ui - x^T v_i) x, dense over
// all items. Row i equals -1/2 of the derivative of the user's unregularized
// objective with respect to v_i.
ItemGradient item_gradient(const UserEmbedding& x, const ItemMatrix& V,
                           std::span<const std::uint32_t> interacted,
                           const HyperParams& hp);

// Single cell of item_gradient, computed with the same arithmetic as the
// dense version so both paths produce bitwise-identical values.
double item_gradient_entry(const UserEmbedding& x, const ItemMatrix& V,
                           bool interacted, std::uint32_t item,
                           std::uint32_t factor, const HyperParams& hp);

// Weighted squared-error objective with L2 terms:
//   sum_u sum_i c_ui (p_ui - x_u^T v_i)^2
//     + lambda (sum_u ||x_u||^2 + sum_i ||v_i||^2).
double implicit_loss(const std::vector<UserEmbedding>& X, const ItemMatrix& V,
                     const InteractionDataset& ds, const HyperParams& hp);

// Predicted preference x^T v.
double score(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& v);

// Fresh closed-form embeddings for every user against the given item matrix.
std::vector<UserEmbedding> all_user_embeddings(const ItemMatrix& V,
                                               const InteractionDataset& ds,
                                               const HyperParams& hp);

}  // namespace fmfldp::mf

#endif  // FMFLDP_MF_HPP_
