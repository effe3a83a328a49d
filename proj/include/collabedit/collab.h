/*
 * Copyright 2026 The CollabEdit Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef COLLABEDIT_COLLAB_H_
#define COLLABEDIT_COLLAB_H_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "collabedit/editor.h"
#include "collabedit/knowledge_model.h"
#include "collabedit/numkernel.h"

namespace collabedit {

struct PacketEntry {
  std::uint16_t layer_id = 0;
  Matrix delta;  // d_val x d_key
  Matrix gram;   // d_key x d_key, K Kᵀ

  friend bool operator==(const PacketEntry& a, const PacketEntry& b) {
    return a.layer_id == b.layer_id && a.delta.rows() == b.delta.rows() &&
           a.delta.cols() == b.delta.cols() && a.gram.rows() == b.gram.rows() &&
           a.gram.cols() == b.gram.cols() && a.delta == b.delta && a.gram == b.gram;
  }
};

// Everything a client sends the server for one round. Keys, residuals and
// requests never leave the client.
struct EditPacket {
  std::uint32_t client_id = 0;
  std::uint32_t round = 0;
  std::vector<PacketEntry> entries;

  friend bool operator==(const EditPacket&, const EditPacket&) = default;
};

// Throws InvalidArgument unless every delta is finite and every gram is
// symmetric positive semi-definite within 1e-9 relative.
void validate_packet(const EditPacket& packet);

struct CollabEdit {};
struct SimpleAverage {};
struct TaskArithmetic {
  double lambda = 1.0;
};
struct TiesMerging {
  double keep_frac = 0.2;
  double lambda = 1.0;
};
using MergeStrategy = std::variant<CollabEdit, SimpleAverage, TaskArithmetic, TiesMerging>;

std::string_view strategy_name(const MergeStrategy& strategy);
void validate_strategy(const MergeStrategy& strategy);

// Existing-knowledge covariance C0 per layer, or κ_l·I without statistics.
struct CovariancePrior {};
struct IdentityPrior {
  // One κ per edited layer, or a single value applied to all of them.
  std::vector<double> kappa{1e3};
};
using PriorMode = std::variant<CovariancePrior, IdentityPrior>;

std::vector<Matrix> base_priors(const LayerStack& stack, const PriorMode& mode);

// One client's edits for a round, already turned into feature space.
struct ClientEdits {
  std::uint32_t client_id = 0;
  Matrix inputs;
  Matrix targets;
};

// Edits a private copy of the snapshot and reports (Δ, K Kᵀ) per edited layer.
EditPacket client_get_delta_and_kkt(const LayerStack& snapshot, const Matrix& inputs,
                                    const Matrix& targets, std::span<const Matrix> priors,
                                    std::uint32_t client_id, std::uint32_t round);
EditPacket client_get_delta_and_kkt(const LayerStack& snapshot, const Universe& universe,
                                    std::span<const EditRequest> requests,
                                    std::span<const Matrix> priors, std::uint32_t client_id,
                                    std::uint32_t round);

// Non-destructive merge. Per layer, with A = C + Σ_j G_j:
//   Δ_G = (Σ_i Δ_i (C + G_i)) A⁻¹,
// accumulated in ascending client_id and solved against A. Packets without
// entries are skipped; returns an empty vector if nothing was submitted.
std::vector<Matrix> server_collab_merge(std::span<const EditPacket> packets,
                                        std::span<const Matrix> priors, const EditRange& range);

// Simple-Average, Task-Arithmetic or TIES over the packets' deltas.
std::vector<Matrix> server_baseline_merge(std::span<const EditPacket> packets,
                                          const MergeStrategy& strategy, const EditRange& range);

std::vector<Matrix> merge_packets(std::span<const EditPacket> packets,
                                  const MergeStrategy& strategy, std::span<const Matrix> priors,
                                  const EditRange& range);

// Trim each delta to its top keep_frac entries by magnitude, elect a sign per
// coordinate from the trimmed sum, average the agreeing entries, scale by λ.
Matrix ties_merge(std::span<const Matrix> deltas, double keep_frac, double lambda);

// Σ_i Δ_i [(C + G_i)(C + Σ_j G_j)⁻¹ − λI], term by term.
std::vector<Matrix> gap_formula(std::span<const EditPacket> packets,
                                std::span<const Matrix> priors, const EditRange& range,
                                double lambda);

struct ServerOptions {
  double beta0 = 1.0;
  double beta1 = 1.0;
  bool dynamic_covariance = false;
  PriorMode prior = CovariancePrior{};
};

// Global model plus the covariance the next round edits against. With
// dynamic covariance, C = β0·C0 + β1·Σ(every gram merged so far).
class ServerState {
 public:
  explicit ServerState(LayerStack stack, ServerOptions options = {});

  const LayerStack& stack() const noexcept { return stack_; }
  std::uint32_t round() const noexcept { return round_; }
  const ServerOptions& options() const noexcept { return options_; }
  // Prior before any accumulation, per edited layer.
  const std::vector<Matrix>& base_prior() const noexcept { return base_prior_; }
  // Prior clients must use this round, per edited layer.
  const std::vector<Matrix>& covariance() const noexcept { return covariance_; }

  // Merges one round of packets, applies the update and advances the round.
  // Packets stamped with any other round are rejected as stale.
  std::vector<Matrix> apply_packets(std::span<const EditPacket> packets,
                                    const MergeStrategy& strategy);

 private:
  LayerStack stack_;
  ServerOptions options_;
  std::vector<Matrix> base_prior_;
  std::vector<Matrix> covariance_;
  std::uint32_t round_ = 0;
};

struct LayerRoundStats {
  std::uint16_t layer_id = 0;
  double delta_norm = 0.0;
  std::optional<double> gap_to_global;
};

struct RoundReport {
  std::uint32_t round = 0;
  std::string strategy;
  std::size_t n_clients = 0;
  std::size_t n_edits = 0;
  std::vector<LayerRoundStats> layers;
  double elapsed_ms = 0.0;
  std::vector<EditPacket> packets;  // filled only with RoundOptions::keep_packets
};

struct RoundOptions {
  bool parallel_clients = true;
  // Also runs the joint edit on the snapshot and reports the relative gap.
  bool measure_global_gap = true;
  bool keep_packets = false;
};

RoundReport run_round(ServerState& state, std::span<const ClientEdits> clients,
                      const MergeStrategy& strategy, const RoundOptions& options = {});

// per_client[i] holds client i's requests; each must be stamped with the
// state's current round and client id i.
RoundReport run_round(ServerState& state, const Universe& universe,
                      std::span<const std::vector<EditRequest>> per_client,
                      const MergeStrategy& strategy, const RoundOptions& options = {});

std::vector<ClientEdits> to_client_edits(const Universe& universe,
                                         std::span<const std::vector<EditRequest>> per_client);

}  // namespace collabedit

#endif  // COLLABEDIT_COLLAB_H_
