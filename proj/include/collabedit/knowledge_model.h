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

#ifndef COLLABEDIT_KNOWLEDGE_MODEL_H_
#define COLLABEDIT_KNOWLEDGE_MODEL_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "collabedit/numkernel.h"

namespace collabedit {

// (subject, relation, object); (subject, relation) is the lookup key.
struct Fact {
  std::int64_t subject = 0;
  std::int64_t relation = 0;
  std::int64_t object = 0;

  friend bool operator==(const Fact&, const Fact&) = default;
};

// Rewrites fact.subject/fact.relation from old_object to fact.object.
struct EditRequest {
  Fact fact;
  std::int64_t old_object = 0;
  std::uint32_t client_id = 0;
  std::uint32_t round = 0;

  friend bool operator==(const EditRequest&, const EditRequest&) = default;
};

struct FeatureMapConfig {
  Eigen::Index d_key = 64;
  Eigen::Index d_val = 48;
  std::uint64_t universe_seed = 0;
  double paraphrase_sigma = 0.05;
  Eigen::Index codebook_size = 256;
  std::int64_t n_subjects = 100000;
  std::int64_t n_relations = 32;

  void validate() const;
};

// Key-to-value linear memory plus the statistics of what it already stores.
struct SyntheticLayer {
  Matrix W;   // d_val x d_key
  Matrix C0;  // d_key x d_key, mu-scaled uncentered key covariance
  double mu = 1.5e4;
  std::vector<Fact> base_facts;
};

class ObjectCodebook {
 public:
  explicit ObjectCodebook(const FeatureMapConfig& cfg);

  // Columns are unit-norm value vectors, one per object id.
  const Matrix& vectors() const noexcept { return vectors_; }
  Eigen::Index size() const noexcept { return vectors_.cols(); }
  Eigen::Index dim() const noexcept { return vectors_.rows(); }
  bool contains(std::int64_t object) const noexcept {
    return object >= 0 && object < vectors_.cols();
  }

 private:
  Matrix vectors_;
};

// Feature maps and codebook of one synthetic fact universe.
struct Universe {
  explicit Universe(const FeatureMapConfig& cfg);

  FeatureMapConfig config;
  ObjectCodebook codebook;

  // Keys of the requests' (subject, relation), one column per request.
  Matrix inputs(std::span<const EditRequest> requests) const;
  // Values of the requests' new objects, one column per request.
  Matrix targets(std::span<const EditRequest> requests) const;
  Matrix fact_keys(std::span<const Fact> facts) const;
  Matrix fact_values(std::span<const Fact> facts) const;
};

Vector key_of(const FeatureMapConfig& cfg, std::int64_t subject, std::int64_t relation);
Vector value_of(const ObjectCodebook& codebook, std::int64_t object);
Vector perturb_key(const FeatureMapConfig& cfg, const Vector& key, std::uint64_t seed);

struct LayerInitOptions {
  double mu = 1.5e4;
  double init_ridge = 1e-6;
  double covariance_ridge = 1e-8;
};

struct InitializedLayer {
  SyntheticLayer layer;
  Matrix base_keys;
  Matrix base_values;
  // Set when n_init < d_key: C0 is then rank deficient up to the ridge.
  bool underdetermined = false;
};

// Builds mu * (1/n) * K Kᵀ + ridge * I.
Matrix covariance_statistic(const Matrix& keys, double mu, double ridge);

InitializedLayer init_layer(const Universe& universe, std::size_t n_init, std::uint64_t seed,
                            const LayerInitOptions& options = {});

// Draws facts from the universe without ever repeating a (subject, relation)
// pair, and checks the key map stays injective over everything drawn.
class FactSampler {
 public:
  FactSampler(const FeatureMapConfig& config, std::uint64_t seed);

  // Marks pairs as used and remembers their objects as old-object candidates.
  void reserve(std::span<const Fact> facts);

  std::vector<Fact> sample_facts(std::size_t n);

  // n requests split over `clients`; the remainder goes to the last client.
  std::vector<std::vector<EditRequest>> sample_requests(std::size_t n, std::size_t clients,
                                                        std::uint32_t round);

  std::size_t used() const noexcept { return used_.size(); }

 private:
  std::uint64_t pair_id(std::int64_t s, std::int64_t r) const noexcept;
  std::pair<std::int64_t, std::int64_t> draw_fresh_pair();
  std::int64_t draw_object();

  FeatureMapConfig config_;
  Rng rng_;
  std::unordered_set<std::uint64_t> used_;
  std::unordered_map<std::uint64_t, std::uint64_t> key_hashes_;
  std::unordered_map<std::int64_t, std::vector<std::int64_t>> objects_by_relation_;
};

std::vector<std::vector<EditRequest>> sample_edit_requests(const Universe& universe,
                                                           std::size_t n, std::size_t clients,
                                                           std::uint64_t seed,
                                                           std::span<const Fact> disjoint_from,
                                                           std::uint32_t round = 0);

std::vector<EditRequest> flatten(std::span<const std::vector<EditRequest>> per_client);

}  // namespace collabedit

#endif  // COLLABEDIT_KNOWLEDGE_MODEL_H_
