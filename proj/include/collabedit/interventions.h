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

#ifndef COLLABEDIT_INTERVENTIONS_H_
#define COLLABEDIT_INTERVENTIONS_H_

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "collabedit/collab.h"
#include "collabedit/eval.h"
#include "collabedit/knowledge_model.h"
#include "collabedit/scenario.h"

namespace collabedit {

// ---------------------------------------------------------------- overlap

struct OverlapTrace {
  // ‖R_t‖_F for t = 0 (before any edit) .. repetitions, from the simulated edits.
  std::vector<double> residual_norms;
  // The same sequence from R_{t+1} = R_t − R_t Kᵀ (C + K Kᵀ)⁻¹ K.
  std::vector<double> recurrence_norms;
  // Largest per-step ‖R_sim − R_rec‖_F seen.
  double max_deviation = 0.0;
  double theta = 0.01;
  bool relative = true;
};

// Re-applies the same batch `repetitions` times under a fixed prior. Throws
// NumericalError if simulation and recurrence drift apart by more than
// 1e-10 · max(1, ‖R_0‖_F) at any step.
OverlapTrace overlap_run(const Matrix& w, const Matrix& keys, const Matrix& values,
                         std::size_t repetitions, const Matrix& prior);
OverlapTrace overlap_run(const SyntheticLayer& layer, const Universe& universe,
                         std::span<const EditRequest> requests, std::size_t repetitions,
                         const Matrix& prior);

struct OverlapDetection {
  bool crossed = false;
  std::optional<std::size_t> index;
  double threshold = 0.0;
};

// First index whose norm falls below θ (or θ·norms[0] when relative).
OverlapDetection overlap_detect(std::span<const double> norms, double theta, bool relative);

// ---------------------------------------------------------------- conflict

struct RequestRef {
  std::uint32_t client_id = 0;
  std::size_t index = 0;

  friend bool operator==(const RequestRef&, const RequestRef&) = default;
};

struct InjectedConflict {
  RequestRef original;
  RequestRef rival;
};

struct ConflictInjection {
  std::vector<std::vector<EditRequest>> per_client;
  std::vector<InjectedConflict> conflicts;
};

// For round(fraction · n) requests, adds a rival request with the same
// subject, relation and old object but a fresh new object, held by another
// client in the same round. Needs at least two clients when fraction > 0.
ConflictInjection conflict_inject(std::span<const std::vector<EditRequest>> per_client,
                                  double fraction, std::uint64_t seed,
                                  const FeatureMapConfig& features);

using Fingerprint = std::array<std::uint8_t, 32>;

// Keyed BLAKE2b of (subject, relation); the key is derived from `salt`.
Fingerprint fingerprint(std::int64_t subject, std::int64_t relation, std::uint64_t salt);

struct ReportEntry {
  Fingerprint fingerprint{};
  std::uint32_t round = 0;
  std::size_t index = 0;  // position in the client's own request list
  bool failed = false;
};

struct ClientReport {
  std::uint32_t client_id = 0;
  std::vector<ReportEntry> entries;
};

// Fingerprints every request and flags those whose top-1 object on the
// current global model is not the requested one.
ClientReport make_client_report(const LayerStack& global, const Universe& universe,
                                std::span<const EditRequest> requests, std::uint32_t client_id,
                                std::uint64_t salt);

enum class ArrivalPolicy { kFcfs, kFifo };
std::string_view policy_name(ArrivalPolicy policy);

struct ConflictMember {
  std::uint32_t client_id = 0;
  std::uint32_t round = 0;
  std::size_t index = 0;
  bool failed = false;
};

struct ConflictGroup {
  Fingerprint fingerprint{};
  std::vector<ConflictMember> members;  // one per client, arrival order
  std::optional<ConflictMember> winner;
  ArrivalPolicy policy = ArrivalPolicy::kFcfs;
};

// A client that edited the same fact twice; the later request stands.
struct Overwrite {
  std::uint32_t client_id = 0;
  std::size_t superseded_index = 0;
  std::size_t kept_index = 0;
};

struct ConflictDetection {
  std::vector<ConflictGroup> groups;
  std::vector<Overwrite> overwrites;
};

// Groups reports by fingerprint. A group needs two distinct clients and at
// least one failure. Both policies pick the earliest arrival: lowest round,
// then lowest client id, then lowest request index.
ConflictDetection conflict_detect(std::span<const ClientReport> reports,
                                  ArrivalPolicy policy = ArrivalPolicy::kFcfs);

// Each winning client re-edits its request as `augmentation` keys (the
// original plus augmentation − 1 paraphrases) aimed at the winning value; the
// batches are merged with CollabEdit as one extra round.
RoundReport conflict_resolve(ServerState& state, const Universe& universe,
                             std::span<const ConflictGroup> groups,
                             std::span<const std::vector<EditRequest>> per_client,
                             std::size_t augmentation = 8, std::uint64_t seed = 0);

struct ConflictStudyConfig {
  ScenarioConfig scenario;
  std::size_t rounds = 20;
  std::size_t groups_per_round = 10;
  std::size_t n_clients = 4;
  std::size_t augmentation = 8;
  ArrivalPolicy policy = ArrivalPolicy::kFcfs;
  EvalOptions eval;
  std::uint64_t seed = 0;
};

struct ConflictOutcome {
  std::size_t round = 0;
  std::size_t group = 0;
  std::uint32_t winner_client = 0;
  std::uint32_t loser_client = 0;
  bool detected = false;
  bool pre_winner_top1 = false;
  bool post_winner_top1 = false;
  double pre_margin = 0.0;   // P(winner) − P(loser) before resolution
  double post_margin = 0.0;
  double post_loser_prob = 0.0;
};

struct ConflictStudyResult {
  std::vector<ConflictOutcome> outcomes;
  double pre_winner_rate = 0.0;   // percent
  double post_winner_rate = 0.0;  // percent, margin > 0 and top-1 = winner
  double base_preservation = 0.0; // percent of base facts whose top-1 is unchanged
  std::size_t overwrites = 0;
};

// Each round starts from the same base model: clients edit fresh requests
// with injected rivals, the server merges, clients report, and the server
// detects and resolves. Outcomes pool over rounds.
ConflictStudyResult conflict_study(const ConflictStudyConfig& config);

// ---------------------------------------------------------------- forgetting

struct ForgettingConfig {
  ScenarioConfig scenario;
  std::size_t n_old = 20;
  std::size_t rounds = 50;
  std::size_t edits_per_round = 20;
  std::size_t n_clients = 4;
  bool dynamic_covariance = false;
  double beta0 = 1.0;
  double beta1 = 1.0;
  EvalOptions eval;
  std::uint64_t seed = 0;
};

struct ForgettingResult {
  Metrics before;  // old requests right after they were edited
  Metrics after;   // old requests after every new round
  std::vector<Metrics> per_round;
};

// Edits the old requests in round 0, then `rounds` rounds of unrelated new
// requests, always merging with CollabEdit. Requests depend only on the seed,
// so immutable and dynamic runs see the same stream.
ForgettingResult forgetting_experiment(const ForgettingConfig& config);

}  // namespace collabedit

#endif  // COLLABEDIT_INTERVENTIONS_H_
