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

#include "fmfldp/server.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>

namespace fmfldp::server {
namespace {

constexpr char kCheckpointMagic[4] = {'F', 'M', 'F', '1'};
constexpr std::size_t kBytesPerMatrixEntry = 4;  // float32 in the cost model
constexpr std::size_t kBytesPerReportModel = 4;  // packed (index, sign) tuple

void write_u32_le(std::ofstream& out, std::uint32_t value) {
  const std::uint8_t bytes[4] = {
      static_cast<std::uint8_t>(value & 0xff),
      static_cast<std::uint8_t>((value >> 8) & 0xff),
      static_cast<std::uint8_t>((value >> 16) & 0xff),
      static_cast<std::uint8_t>((value >> 24) & 0xff),
  };
  out.write(reinterpret_cast<const char*>(bytes), 4);
}

std::uint32_t read_u32_le(std::ifstream& in, const std::string& path) {
  std::uint8_t bytes[4];
  if (!in.read(reinterpret_cast<char*>(bytes), 4)) {
    throw std::runtime_error("checkpoint '" + path + "' is truncated");
  }
  return static_cast<std::uint32_t>(bytes[0]) | (static_cast<std::uint32_t>(bytes[1]) << 8) |
         (static_cast<std::uint32_t>(bytes[2]) << 16) |
         (static_cast<std::uint32_t>(bytes[3]) << 24);
}

void write_f64_le(std::ofstream& out, double value) {
  const auto bits = std::bit_cast<std::uint64_t>(value);
  std::uint8_t bytes[8];
  for (int i = 0; i < 8; ++i) {
    bytes[i] = static_cast<std::uint8_t>((bits >> (8 * i)) & 0xff);
  }
  out.write(reinterpret_cast<const char*>(bytes), 8);
}

double read_f64_le(std::ifstream& in, const std::string& path) {
  std::uint8_t bytes[8];
  if (!in.read(reinterpret_cast<char*>(bytes), 8)) {
    throw std::runtime_error("checkpoint '" + path + "' is truncated");
  }
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) {
    bits |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  }
  return std::bit_cast<double>(bits);
}

// Shared epoch driver; `grad` must be the aggregated report-space gradient.
void finish_epoch(ServerState& state, const InteractionDataset& train,
                  const TrainHooks& hooks, const mf::ItemGradient& grad,
                  EpochRecord rec) {
  try {
    state.item_matrix = apply_update(std::move(state.item_matrix), grad, state.hp);
  } catch (const DivergenceError& e) {
    throw DivergenceError("epoch " + std::to_string(rec.epoch) + ": " + e.what(),
                          state.trace);
  }
  state.epoch = rec.epoch;

  const std::size_t every = hooks.eval_every == 0 ? 1 : hooks.eval_every;
  const bool evaluate_now =
      rec.epoch % every == 0 || rec.epoch == state.hp.epochs;
  rec.download_bytes_per_user =
      static_cast<std::uint64_t>(train.n_items()) * state.hp.n_factors * kBytesPerMatrixEntry;
  if (evaluate_now && (hooks.evaluate || hooks.compute_loss)) {
    const std::vector<mf::UserEmbedding> X =
        mf::all_user_embeddings(state.item_matrix, train, state.hp);
    if (hooks.evaluate) {
      rec.metrics = hooks.evaluate(X, state.item_matrix);
      rec.evaluated = true;
    }
    if (hooks.compute_loss) {
      rec.loss = mf::implicit_loss(X, state.item_matrix, train, state.hp);
    }
    state.trace.push_back(std::move(rec));
  }
}

}  // namespace

std::int64_t CellCounts::total_reports() const {
  std::int64_t total = 0;
  for (std::int64_t c : positive) total += c;
  for (std::int64_t c : negative) total += c;
  return total;
}

CellCounts tally_reports(const proxy::AnonymousReportBatch& batch,
                         const ldp::MechanismParams& params) {
  params.validate();
  CellCounts counts;
  counts.positive.assign(params.cells(), 0);
  counts.negative.assign(params.cells(), 0);
  for (const auto& report : batch.reports) {
    if (report.cell_index >= params.cells()) {
      throw std::invalid_argument("report cell index " + std::to_string(report.cell_index) +
                                  " outside a " + std::to_string(params.n_items) + "x" +
                                  std::to_string(params.n_factors) + " gradient");
    }
    if (report.positive) {
      ++counts.positive[report.cell_index];
    } else {
      ++counts.negative[report.cell_index];
    }
  }
  return counts;
}

mf::ItemGradient aggregate(const proxy::AnonymousReportBatch& batch,
                           std::size_t n_users, const ldp::MechanismParams& params) {
  if (n_users == 0) {
    throw std::invalid_argument("aggregate needs at least one user");
  }
  const std::size_t expected = n_users * params.reports_per_user;
  if (batch.reports.size() != expected) {
    throw std::invalid_argument("expected " + std::to_string(expected) + " reports (" +
                                std::to_string(n_users) + " users x " +
                                std::to_string(params.reports_per_user) + "), got " +
                                std::to_string(batch.reports.size()));
  }
  const CellCounts counts = tally_reports(batch, params);
  const double b = scale_constant(params);
  const double denom = static_cast<double>(expected);

  mf::ItemGradient grad(static_cast<Eigen::Index>(params.n_items),
                        static_cast<Eigen::Index>(params.n_factors));
  for (std::size_t cell = 0; cell < params.cells(); ++cell) {
    const auto net = static_cast<double>(counts.positive[cell] - counts.negative[cell]);
    grad(static_cast<Eigen::Index>(cell / params.n_factors),
         static_cast<Eigen::Index>(cell % params.n_factors)) = b * net / denom;
  }
  return grad;
}

mf::ItemMatrix apply_update(mf::ItemMatrix V, const mf::ItemGradient& grad,
                            const mf::HyperParams& hp) {
  hp.validate();
  if (V.rows() != grad.rows() || V.cols() != grad.cols()) {
    throw std::invalid_argument("gradient shape does not match the item matrix");
  }
  const double two_reg = 2.0 * hp.reg;
  for (std::size_t s = 0; s < hp.inner_steps; ++s) {
    V -= hp.learning_rate * (grad + two_reg * V);
  }
  if (!V.allFinite()) {
    throw DivergenceError("item matrix diverged to non-finite values");
  }
  return V;
}

mf::ItemMatrix init_item_matrix(std::size_t n_items, std::size_t n_factors,
                                std::uint64_t seed) {
  if (n_items == 0 || n_factors == 0) {
    throw std::invalid_argument("item matrix dimensions must be positive");
  }
  Rng rng = Rng::derive(seed, {stream::kItemMatrixInit});
  mf::ItemMatrix V(static_cast<Eigen::Index>(n_items), static_cast<Eigen::Index>(n_factors));
  for (Eigen::Index i = 0; i < V.rows(); ++i) {
    for (Eigen::Index f = 0; f < V.cols(); ++f) {
      V(i, f) = (2.0 * rng.next_unit() - 1.0) * 0.01;
    }
  }
  return V;
}

mf::ItemGradient client_report_gradient(const mf::UserEmbedding& x,
                                        const mf::ItemMatrix& V,
                                        std::span<const std::uint32_t> interacted,
                                        const mf::HyperParams& hp) {
  hp.validate();
  if (x.size() != V.cols()) {
    throw std::invalid_argument("user embedding length does not match item matrix");
  }
  mf::ItemGradient grad(V.rows(), V.cols());
  std::size_t next = 0;
  for (Eigen::Index i = 0; i < V.rows(); ++i) {
    const bool hit = next < interacted.size() &&
                     interacted[next] == static_cast<std::uint32_t>(i);
    if (hit) ++next;
    const double p = hit ? 1.0 : 0.0;
    const double c = mf::confidence(p, hp.confidence_alpha);
    const double rc = -2.0 * (c * (p - x.dot(V.row(i).transpose())));
    grad.row(i) = rc * x.transpose();
  }
  return grad;
}

double client_report_entry(const mf::UserEmbedding& x, const mf::ItemMatrix& V,
                           bool interacted, std::uint32_t item, std::uint32_t factor,
                           const mf::HyperParams& hp) {
  if (static_cast<Eigen::Index>(item) >= V.rows() ||
      static_cast<Eigen::Index>(factor) >= V.cols()) {
    throw std::out_of_range("gradient cell out of range");
  }
  const double p = interacted ? 1.0 : 0.0;
  const double c = mf::confidence(p, hp.confidence_alpha);
  const double rc = -2.0 * (c * (p - x.dot(V.row(item).transpose())));
  return rc * x[factor];
}

proxy::ClientMessage simulate_client(std::uint32_t user, const mf::ItemMatrix& V,
                                     const Eigen::MatrixXd& gram,
                                     const InteractionDataset& train,
                                     const mf::HyperParams& hp,
                                     const ldp::MechanismParams& params,
                                     std::uint32_t epoch, Rng& rng) {
  const auto interacted = train.items_of(user);
  const mf::UserEmbedding x = mf::update_user_embedding_gram(V, gram, interacted, hp);

  proxy::ClientMessage message;
  message.client_id = static_cast<std::uint64_t>(train.user_id(user));
  message.epoch = epoch;
  message.reports.reserve(params.reports_per_user);
  const auto value_at = [&](std::uint32_t item, std::uint32_t factor) {
    const bool hit = std::binary_search(interacted.begin(), interacted.end(), item);
    return std::clamp(client_report_entry(x, V, hit, item, factor, hp), -1.0, 1.0);
  };
  for (std::size_t j = 0; j < params.reports_per_user; ++j) {
    message.reports.push_back(ldp::perturb_once_with(value_at, params, rng));
  }
  return message;
}

ServerState init_server(const InteractionDataset& train, const mf::HyperParams& hp,
                        std::uint64_t seed, Mode mode) {
  hp.validate();
  if (train.n_users() == 0 || train.n_items() == 0) {
    throw std::invalid_argument("training set is empty");
  }
  ServerState state;
  state.hp = hp;
  state.mech = ldp::make_mechanism_params(hp, train.n_items());
  state.mode = mode;
  state.seed = seed;
  state.item_matrix = init_item_matrix(train.n_items(), hp.n_factors, seed);
  return state;
}

void run_epoch(ServerState& state, const InteractionDataset& train,
               const TrainHooks& hooks) {
  if (state.epoch >= state.hp.epochs) {
    throw std::invalid_argument("all " + std::to_string(state.hp.epochs) +
                                " epochs already executed");
  }
  if (train.n_items() != static_cast<std::size_t>(state.item_matrix.rows())) {
    throw std::invalid_argument("training set does not match the item matrix");
  }
  const std::uint32_t epoch = state.epoch;
  const Eigen::MatrixXd gram = mf::item_gram(state.item_matrix);

  EpochRecord rec;
  rec.epoch = epoch + 1;

  mf::ItemGradient grad;
  if (state.mode == Mode::kLdp) {
    std::vector<proxy::ClientMessage> messages;
    messages.reserve(train.n_users());
    for (std::uint32_t u = 0; u < train.n_users(); ++u) {
      Rng client_rng = Rng::derive(state.seed, {stream::kClientReports, epoch, u});
      messages.push_back(simulate_client(u, state.item_matrix, gram, train, state.hp,
                                         state.mech, epoch, client_rng));
    }
    Rng shuffle_rng = Rng::derive(state.seed, {stream::kProxyShuffle, epoch});
    const proxy::AnonymousReportBatch batch = proxy::strip_and_shuffle(messages, shuffle_rng);
    grad = aggregate(batch, train.n_users(), state.mech);
    rec.n_reports = batch.reports.size();
    rec.upload_bytes_per_user =
        static_cast<std::uint64_t>(state.mech.reports_per_user) * kBytesPerReportModel;
  } else {
    mf::ItemGradient sum = mf::ItemGradient::Zero(state.item_matrix.rows(),
                                                  state.item_matrix.cols());
    for (std::uint32_t u = 0; u < train.n_users(); ++u) {
      const mf::UserEmbedding x = mf::update_user_embedding_gram(
          state.item_matrix, gram, train.items_of(u), state.hp);
      sum += client_report_gradient(x, state.item_matrix, train.items_of(u), state.hp);
    }
    grad = sum / static_cast<double>(train.n_users());
    rec.upload_bytes_per_user = static_cast<std::uint64_t>(train.n_items()) *
                                state.hp.n_factors * kBytesPerMatrixEntry;
  }
  finish_epoch(state, train, hooks, grad, std::move(rec));
}

namespace {

TrainingResult run_training_mode(const InteractionDataset& train, const mf::HyperParams& hp,
                                 std::uint64_t seed, const TrainHooks& hooks, Mode mode) {
  ServerState state = init_server(train, hp, seed, mode);
  while (state.epoch < hp.epochs) {
    run_epoch(state, train, hooks);
  }
  TrainingResult result;
  result.item_matrix = std::move(state.item_matrix);
  result.user_embeddings = mf::all_user_embeddings(result.item_matrix, train, hp);
  result.trace = std::move(state.trace);
  return result;
}

}  // namespace

TrainingResult run_training(const InteractionDataset& train, const mf::HyperParams& hp,
                            std::uint64_t seed, const TrainHooks& hooks) {
  return run_training_mode(train, hp, seed, hooks, Mode::kLdp);
}

TrainingResult run_training_nonprivate(const InteractionDataset& train,
                                       const mf::HyperParams& hp, std::uint64_t seed,
                                       const TrainHooks& hooks) {
  return run_training_mode(train, hp, seed, hooks, Mode::kNonPrivate);
}

CommCost comm_cost(const mf::HyperParams& hp, std::size_t n_items) {
  hp.validate();
  if (n_items == 0) {
    throw std::invalid_argument("n_items must be positive");
  }
  CommCost cost;
  cost.download_bytes_per_epoch =
      static_cast<std::uint64_t>(n_items) * hp.n_factors * kBytesPerMatrixEntry;
  cost.upload_bytes_per_epoch =
      static_cast<std::uint64_t>(hp.reports_per_user) * kBytesPerReportModel;
  cost.upload_wire_bytes_per_epoch =
      static_cast<std::uint64_t>(hp.reports_per_user) * ldp::kWireReportBytes;
  cost.download_bytes_total = cost.download_bytes_per_epoch * hp.epochs;
  cost.upload_bytes_total = cost.upload_bytes_per_epoch * hp.epochs;
  cost.upload_wire_bytes_total = cost.upload_wire_bytes_per_epoch * hp.epochs;
  return cost;
}

void save_item_matrix(const std::filesystem::path& path, const mf::ItemMatrix& V) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw std::runtime_error("cannot open checkpoint '" + path.string() + "' for writing");
  }
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  write_u32_le(out, static_cast<std::uint32_t>(V.rows()));
  write_u32_le(out, static_cast<std::uint32_t>(V.cols()));
  for (Eigen::Index i = 0; i < V.rows(); ++i) {
    for (Eigen::Index f = 0; f < V.cols(); ++f) {
      write_f64_le(out, V(i, f));
    }
  }
  if (!out) {
    throw std::runtime_error("failed to write checkpoint '" + path.string() + "'");
  }
}

mf::ItemMatrix load_item_matrix(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot open checkpoint '" + path.string() + "'");
  }
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kCheckpointMagic, 4) != 0) {
    throw std::runtime_error("checkpoint '" + path.string() +
                             "' does not start with the expected magic bytes");
  }
  const std::uint32_t rows = read_u32_le(in, path.string());
  const std::uint32_t cols = read_u32_le(in, path.string());
  if (rows == 0 || cols == 0) {
    throw std::runtime_error("checkpoint '" + path.string() + "' has empty dimensions");
  }
  mf::ItemMatrix V(rows, cols);
  for (Eigen::Index i = 0; i < V.rows(); ++i) {
    for (Eigen::Index f = 0; f < V.cols(); ++f) {
      V(i, f) = read_f64_le(in, path.string());
    }
  }
  char extra;
  if (in.read(&extra, 1)) {
    throw std::runtime_error("checkpoint '" + path.string() + "' has trailing bytes");
  }
  return V;
}

}  // namespace fmfldp::server
