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

#ifndef FMFLDP_SERVER_HPP_
#define FMFLDP_SERVER_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "fmfldp/dataset.hpp"
#include "fmfldp/eval.hpp"
#include "fmfldp/ldp.hpp"
#include "fmfldp/mf.hpp"
#include "fmfldp/proxy.hpp"
#include "fmfldp/rng.hpp"

namespace fmfldp::server {

// Outcome of one completed epoch. Byte counts follow the cost model in
// comm_cost and are per user.
struct EpochRecord {
  std::uint32_t epoch = 0;  // 1-based, counted after the update
  bool evaluated = false;
  eval::Metrics metrics;  // filled only when evaluated
  double loss = std::numeric_limits<double>::quiet_NaN();
  std::uint64_t upload_bytes_per_user = 0;
  std::uint64_t download_bytes_per_user = 0;
  std::size_t n_reports = 0;  // pooled reports this epoch (0 in non-private mode)
};

// Raised when the item matrix stops being finite. `partial_trace` holds the
// records of the epochs that completed before the failure.
class DivergenceError : public std::runtime_error {
 public:
  explicit DivergenceError(const std::string& what) : std::runtime_error(what) {}
  DivergenceError(const std::string& what, std::vector<EpochRecord> partial)
      : std::runtime_error(what), partial_trace(std::move(partial)) {}

  std::vector<EpochRecord> partial_trace;
};

// Exact integer tallies of positive and negative reports per flattened
// gradient cell. Integer arithmetic makes the aggregate independent of
// report order, bit for bit.
struct CellCounts {
  std::vector<std::int64_t> positive;
  std::vector<std::int64_t> negative;

  std::int64_t total_reports() const;
};

CellCounts tally_reports(const proxy::AnonymousReportBatch& batch,
                         const ldp::MechanismParams& params);

// Unbiased mean-gradient estimate from one epoch of anonymous reports:
//   cell value = B * (positive - negative) / (n_users * k).
// The batch must hold exactly n_users * k reports.
mf::ItemGradient aggregate(const proxy::AnonymousReportBatch& batch,
                           std::size_t n_users, const ldp::MechanismParams& params);

// `inner_steps` gradient steps on the item matrix with the aggregated
// gradient held fixed:  V <- V - learning_rate * (grad + 2 * reg * V).
// Throws DivergenceError when the result is not finite.
mf::ItemMatrix apply_update(mf::ItemMatrix V, const mf::ItemGradient& grad,
                            const mf::HyperParams& hp);

// Item matrix with entries uniform in [-0.01, 0.01), filled row by row from
// the stream derive_seed(seed, {stream::kItemMatrixInit}).
mf::ItemMatrix init_item_matrix(std::size_t n_items, std::size_t n_factors,
                                std::uint64_t seed);

// Dense report-space gradient of one client: row i holds
// -2 c_ui (p_ui - x^T v_i) x, the user's share of the derivative of the
// unregularized objective with respect to v_i. This is what clients clip
// and report; subtracting its all-user mean descends the objective.
mf::ItemGradient client_report_gradient(const mf::UserEmbedding& x,
                                        const mf::ItemMatrix& V,
                                        std::span<const std::uint32_t> interacted,
                                        const mf::HyperParams& hp);

// Single cell of client_report_gradient before clipping, bitwise identical
// to the dense version.
double client_report_entry(const mf::UserEmbedding& x, const mf::ItemMatrix& V,
                           bool interacted, std::uint32_t item, std::uint32_t factor,
                           const mf::HyperParams& hp);

// One client's contribution to one epoch: solves the closed-form user
// embedding against the current item matrix, then emits k randomized
// reports of the clipped report-space gradient. The dense gradient is never
// materialized; sampled cells are evaluated on demand.
proxy::ClientMessage simulate_client(std::uint32_t user, const mf::ItemMatrix& V,
                                     const Eigen::MatrixXd& gram,
                                     const InteractionDataset& train,
                                     const mf::HyperParams& hp,
                                     const ldp::MechanismParams& params,
                                     std::uint32_t epoch, Rng& rng);

enum class Mode {
  kLdp,         // randomized reports through the shuffler
  kNonPrivate,  // exact mean gradients, no privacy
};

struct ServerState {
  mf::ItemMatrix item_matrix;
  std::uint32_t epoch = 0;  // epochs completed so far
  mf::HyperParams hp;
  ldp::MechanismParams mech;
  Mode mode = Mode::kLdp;
  std::uint64_t seed = 0;
  std::vector<EpochRecord> trace;
};

ServerState init_server(const InteractionDataset& train, const mf::HyperParams& hp,
                        std::uint64_t seed, Mode mode);

// Ranking-metric callback: fresh user embeddings plus the updated item
// matrix for the epoch that just finished.
using EvalFn =
    std::function<eval::Metrics(const std::vector<mf::UserEmbedding>&, const mf::ItemMatrix&)>;

struct TrainHooks {
  EvalFn evaluate;             // may be empty
  std::size_t eval_every = 1;  // evaluate every n-th epoch (the last always runs)
  bool compute_loss = true;    // record the training objective when evaluating
};

// Executes the next epoch: every client reports against the same item
// matrix, the shuffler anonymizes the pooled reports, the server aggregates
// and applies the update. Appends a trace record on evaluated epochs.
void run_epoch(ServerState& state, const InteractionDataset& train,
               const TrainHooks& hooks = {});

struct TrainingResult {
  mf::ItemMatrix item_matrix;
  std::vector<mf::UserEmbedding> user_embeddings;  // closed form, final item matrix
  std::vector<EpochRecord> trace;
};

// Full training runs. Client randomness, the shuffler and the item-matrix
// initialization all derive from `seed`, so equal inputs reproduce equal
// results exactly.
TrainingResult run_training(const InteractionDataset& train, const mf::HyperParams& hp,
                            std::uint64_t seed, const TrainHooks& hooks = {});

// Same loop without privacy: clients send exact report-space gradients and
// the server averages them. Upper-bounds what the private runs can reach.
TrainingResult run_training_nonprivate(const InteractionDataset& train,
                                       const mf::HyperParams& hp, std::uint64_t seed,
                                       const TrainHooks& hooks = {});

// Per-user traffic under the 4-byte-per-report cost model (each report is
// an (index, sign) tuple packed in 4 bytes; the item matrix downloads as
// 4-byte floats). The wire fields account the implemented 5-byte encoding.
struct CommCost {
  std::uint64_t download_bytes_per_epoch = 0;    // n_items * n_factors * 4
  std::uint64_t upload_bytes_per_epoch = 0;      // 4 * k
  std::uint64_t upload_wire_bytes_per_epoch = 0; // 5 * k
  std::uint64_t download_bytes_total = 0;        // times epochs
  std::uint64_t upload_bytes_total = 0;
  std::uint64_t upload_wire_bytes_total = 0;

  friend bool operator==(const CommCost&, const CommCost&) = default;
};

CommCost comm_cost(const mf::HyperParams& hp, std::size_t n_items);

// Item-matrix checkpoint: magic "FMF1", u32 LE row and column counts, then
// row-major IEEE-754 doubles in little-endian byte order.
void save_item_matrix(const std::filesystem::path& path, const mf::ItemMatrix& V);
mf::ItemMatrix load_item_matrix(const std::filesystem::path& path);

}  // namespace fmfldp::server

#endif  // FMFLDP_SERVER_HPP_
