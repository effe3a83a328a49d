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

#ifndef COLLABEDIT_EVAL_H_
#define COLLABEDIT_EVAL_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "collabedit/collab.h"
#include "collabedit/editor.h"
#include "collabedit/knowledge_model.h"
#include "collabedit/numkernel.h"
#include "collabedit/scenario.h"

namespace collabedit {

struct EvalOptions {
  double tau = 0.1;
  std::size_t n_paraphrases = 2;
  std::size_t neighbors_per_edit = 4;
  std::uint64_t seed = 0;

  void validate() const;
};

// Softmax over the codebook of −‖out − v(o)‖² / τ, kept in log space.
class ObjectDistribution {
 public:
  explicit ObjectDistribution(Vector log_probs);

  double log_prob(std::int64_t object) const;
  double prob(std::int64_t object) const;
  std::int64_t argmax() const;
  Eigen::Index size() const noexcept { return log_probs_.size(); }
  const Vector& log_probs() const noexcept { return log_probs_; }

 private:
  Vector log_probs_;
};

ObjectDistribution object_distribution(const LayerStack& stack, const ObjectCodebook& codebook,
                                       const Vector& key, double tau);
double prob_of(const LayerStack& stack, const ObjectCodebook& codebook, const Vector& key,
               std::int64_t object, double tau);

// A base fact used to check that an edit left nearby knowledge alone.
struct Neighbor {
  Fact fact;                 // fact.object is the object that should survive
  std::int64_t new_object;   // the competing object from the edit
  bool fallback = false;     // not sharing (relation, old object) with the edit
};

// Base facts sharing relation and old object with each edit, never an edited
// pair. Short lists are topped up with other unedited base facts, flagged.
std::vector<Neighbor> select_neighbors(std::span<const Fact> base_facts,
                                       std::span<const EditRequest> edits,
                                       std::size_t per_edit, std::uint64_t seed);

// Percentages in [0, 100].
double efficacy_score(const LayerStack& stack, const Universe& universe,
                      std::span<const EditRequest> requests);
double paraphrase_score(const LayerStack& stack, const Universe& universe,
                        std::span<const EditRequest> requests, const EvalOptions& options);
double neighborhood_score(const LayerStack& stack, const Universe& universe,
                          std::span<const Neighbor> neighbors);

struct AccuracyMetrics {
  double EA = 0.0;
  double PA = 0.0;
  double NA = 0.0;
};
AccuracyMetrics accuracy_metrics(const LayerStack& stack, const Universe& universe,
                                 std::span<const EditRequest> requests,
                                 std::span<const Neighbor> neighbors, const EvalOptions& options);

struct Metrics {
  double ES = 0.0;
  double PS = 0.0;
  double NS = 0.0;
  double Score = 0.0;
  double EA = 0.0;
  double PA = 0.0;
  double NA = 0.0;
  double AccScore = 0.0;
};

// 3 / (1/a + 1/b + 1/c), or 0 when any component is 0.
double harmonic_score(double a, double b, double c);

Metrics evaluate(const LayerStack& stack, const Universe& universe,
                 std::span<const EditRequest> requests, std::span<const Neighbor> neighbors,
                 const EvalOptions& options);

// Paraphrase keys used by the PS/PA metrics, n_paraphrases per request.
Matrix paraphrase_keys(const Universe& universe, std::span<const EditRequest> requests,
                       const EvalOptions& options);

// Top-1 object for every column of keys.
std::vector<std::int64_t> predicted_objects(const LayerStack& stack, const ObjectCodebook& codebook,
                                            const Matrix& keys);

struct GapCurveConfig {
  ScenarioConfig scenario;
  std::vector<std::size_t> sizes{64, 128, 256, 512, 1024};
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  std::vector<MergeStrategy> strategies{CollabEdit{}, SimpleAverage{}, TaskArithmetic{},
                                        TiesMerging{}};
  std::size_t edits_per_client = 64;
  EvalOptions eval;
};

struct GapCurveRow {
  std::size_t size = 0;
  std::uint64_t seed = 0;
  std::string strategy;
  std::size_t n_clients = 0;
  double weight_gap = 0.0;  // ‖Δ_merged − Δ_G‖ / ‖Δ_G‖
  double score_global = 0.0;
  double score_merged = 0.0;
  double score_gap = 0.0;  // score_global − score_merged
  double acc_global = 0.0;
  double acc_merged = 0.0;
};

struct GapCurveMedian {
  std::size_t size = 0;
  std::string strategy;
  double weight_gap = 0.0;
  double score_gap = 0.0;
};

struct GapCurveResult {
  std::vector<GapCurveRow> rows;
  std::vector<GapCurveMedian> medians;  // size-major, strategies in config order
};

// One-round merge of every strategy against the joint edit, per size and seed.
// Each size is split into size / edits_per_client clients.
GapCurveResult gap_curve(const GapCurveConfig& config);

double median(std::vector<double> values);

}  // namespace collabedit

#endif  // COLLABEDIT_EVAL_H_
