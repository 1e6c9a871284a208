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

#include "fmfldp/mf.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace fmfldp::mf {
namespace {

constexpr double kResidualTolerance = 1e-8;

// Solves A x = b for a symmetric positive semi-definite A and verifies the
// solution; a residual above tolerance means the system was numerically
// singular.
Vector solve_checked(const Eigen::MatrixXd& A, const Vector& b) {
  const Vector x = A.ldlt().solve(b);
  const double b_norm = b.norm();
  if (b_norm == 0.0) {
    return Vector::Zero(b.size());
  }
  const double residual = (A * x - b).norm() / b_norm;
  if (!(residual <= kResidualTolerance)) {
    throw std::runtime_error("user update system is numerically singular (relative residual " +
                             std::to_string(residual) + ")");
  }
  return x;
}

void check_interactions(std::span<const std::uint32_t> interacted, Eigen::Index n_items) {
  for (std::uint32_t i : interacted) {
    if (static_cast<Eigen::Index>(i) >= n_items) {
      throw std::invalid_argument("interacted item index " + std::to_string(i) +
                                  " out of range");
    }
  }
}

}  // namespace

void HyperParams::validate() const {
  if (n_factors == 0) {
    throw std::invalid_argument("n_factors must be positive");
  }
  if (!(reg >= 0.0) || !std::isfinite(reg)) {
    throw std::invalid_argument("reg must be finite and non-negative");
  }
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw std::invalid_argument("learning_rate must be finite and positive");
  }
  if (!(confidence_alpha >= 0.0) || !std::isfinite(confidence_alpha)) {
    throw std::invalid_argument("confidence_alpha must be finite and non-negative");
  }
  if (inner_steps == 0) {
    throw std::invalid_argument("inner_steps must be positive");
  }
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
    throw std::invalid_argument("epsilon must be finite and positive");
  }
  if (reports_per_user == 0) {
    throw std::invalid_argument("reports_per_user must be positive");
  }
}

double confidence(double r, double alpha) {
  if (r != 0.0 && r != 1.0) {
    throw std::invalid_argument("interaction value must be 0 or 1, got " + std::to_string(r));
  }
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) {
    throw std::invalid_argument("confidence alpha must be finite and non-negative");
  }
  return 1.0 + alpha * r;
}

Eigen::MatrixXd item_gram(const ItemMatrix& V) { return V.transpose() * V; }

UserEmbedding update_user_embedding(const ItemMatrix& V,
                                    std::span<const std::uint32_t> interacted,
                                    const HyperParams& hp) {
  hp.validate();
  check_interactions(interacted, V.rows());
  const auto F = static_cast<Eigen::Index>(hp.n_factors);
  if (V.cols() != F) {
    throw std::invalid_argument("item matrix has " + std::to_string(V.cols()) +
                                " columns, expected " + std::to_string(hp.n_factors));
  }

  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(F, F);
  Vector b = Vector::Zero(F);
  std::size_t next = 0;
  for (Eigen::Index i = 0; i < V.rows(); ++i) {
    const bool hit = next < interacted.size() &&
                     interacted[next] == static_cast<std::uint32_t>(i);
    const double c = confidence(hit ? 1.0 : 0.0, hp.confidence_alpha);
    const Vector v = V.row(i).transpose();
    A.noalias() += c * (v * v.transpose());
    if (hit) {
      b.noalias() += c * v;  // p_ui = 1 on interacted items, 0 elsewhere
      ++next;
    }
  }
  A.diagonal().array() += hp.reg;
  return solve_checked(A, b);
}

UserEmbedding update_user_embedding_gram(const ItemMatrix& V,
                                         const Eigen::MatrixXd& gram,
                                         std::span<const std::uint32_t> interacted,
                                         const HyperParams& hp) {
  hp.validate();
  check_interactions(interacted, V.rows());
  const auto F = static_cast<Eigen::Index>(hp.n_factors);
  if (V.cols() != F || gram.rows() != F || gram.cols() != F) {
    throw std::invalid_argument("item matrix or Gram matrix shape mismatch");
  }

  Eigen::MatrixXd A = gram;
  Vector b = Vector::Zero(F);
  const double one_plus_alpha = 1.0 + hp.confidence_alpha;
  for (std::uint32_t i : interacted) {
    A.noalias() += hp.confidence_alpha * (V.row(i).transpose() * V.row(i));
    b.noalias() += one_plus_alpha * V.row(i).transpose();
  }
  A.diagonal().array() += hp.reg;
  return solve_checked(A, b);
}

ItemGradient item_gradient(const UserEmbedding& x, const ItemMatrix& V,
                           std::span<const std::uint32_t> interacted,
                           const HyperParams& hp) {
  hp.validate();
  check_interactions(interacted, V.rows());
  if (x.size() != V.cols()) {
    throw std::invalid_argument("user embedding length does not match item matrix");
  }
  ItemGradient grad(V.rows(), V.cols());
  std::size_t next = 0;
  for (Eigen::Index i = 0; i < V.rows(); ++i) {
    const bool hit = next < interacted.size() &&
                     interacted[next] == static_cast<std::uint32_t>(i);
    if (hit) ++next;
    const double p = hit ? 1.0 : 0.0;
    const double c = confidence(p, hp.confidence_alpha);
    const double coef = c * (p - x.dot(V.row(i).transpose()));
    grad.row(i) = coef * x.transpose();
  }
  return grad;
}

double item_gradient_entry(const UserEmbedding& x, const ItemMatrix& V,
                           bool interacted, std::uint32_t item,
                           std::uint32_t factor, const HyperParams& hp) {
  if (static_cast<Eigen::Index>(item) >= V.rows() ||
      static_cast<Eigen::Index>(factor) >= V.cols()) {
    throw std::out_of_range("gradient cell out of range");
  }
  const double p = interacted ? 1.0 : 0.0;
  const double c = confidence(p, hp.confidence_alpha);
  const double coef = c * (p - x.dot(V.row(item).transpose()));
  return coef * x[factor];
}

double implicit_loss(const std::vector<UserEmbedding>& X, const ItemMatrix& V,
                     const InteractionDataset& ds, const HyperParams& hp) {
  hp.validate();
  if (X.size() != ds.n_users() || V.rows() != static_cast<Eigen::Index>(ds.n_items())) {
    throw std::invalid_argument("embedding shapes do not match the dataset");
  }
  const Eigen::MatrixXd gram = item_gram(V);
  const double one_plus_alpha = 1.0 + hp.confidence_alpha;

  double fit = 0.0;
  double x_norm2 = 0.0;
  for (std::uint32_t u = 0; u < ds.n_users(); ++u) {
    const UserEmbedding& x = X[u];
    if (x.size() != V.cols()) {
      throw std::invalid_argument("user embedding length does not match item matrix");
    }
    // sum_i s_i^2 over all items, then swap the interacted terms from s^2 to
    // (1 + alpha)(1 - s)^2.
    double user_fit = x.dot(gram * x);
    for (std::uint32_t i : ds.items_of(u)) {
      const double s = x.dot(V.row(i).transpose());
      user_fit += one_plus_alpha * (1.0 - s) * (1.0 - s) - s * s;
    }
    fit += user_fit;
    x_norm2 += x.squaredNorm();
  }
  return fit + hp.reg * (x_norm2 + V.squaredNorm());
}

double score(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& v) {
  if (x.size() != v.size()) {
    throw std::invalid_argument("score operands must have equal length");
  }
  return x.dot(v);
}

std::vector<UserEmbedding> all_user_embeddings(const ItemMatrix& V,
                                               const InteractionDataset& ds,
                                               const HyperParams& hp) {
  const Eigen::MatrixXd gram = item_gram(V);
  std::vector<UserEmbedding> X;
  X.reserve(ds.n_users());
  for (std::uint32_t u = 0; u < ds.n_users(); ++u) {
    X.push_back(update_user_embedding_gram(V, gram, ds.items_of(u), hp));
  }
  return X;
}

}  // namespace fmfldp::mf
