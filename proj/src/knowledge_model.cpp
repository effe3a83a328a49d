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

#include "collabedit/knowledge_model.h"

#include <algorithm>
#include <cstring>
#include <string>

namespace collabedit {
namespace {

std::uint64_t hash_vector(const Vector& v) {
  // FNV-1a over the raw bytes; exact equality is re-checked on a hit.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  const auto* bytes = reinterpret_cast<const unsigned char*>(v.data());
  for (std::size_t i = 0; i < static_cast<std::size_t>(v.size()) * sizeof(double); ++i) {
    h ^= bytes[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

void FeatureMapConfig::validate() const {
  if (d_key < 2 || d_val < 2) throw InvalidArgument("feature map: d_key and d_val must be >= 2");
  if (codebook_size < 2) throw InvalidArgument("feature map: codebook_size must be >= 2");
  if (!(paraphrase_sigma >= 0.0)) throw InvalidArgument("feature map: paraphrase_sigma must be >= 0");
  if (n_subjects < 1 || n_relations < 1) {
    throw InvalidArgument("feature map: universe needs at least one subject and relation");
  }
}

ObjectCodebook::ObjectCodebook(const FeatureMapConfig& cfg) : vectors_(cfg.d_val, cfg.codebook_size) {
  cfg.validate();
  for (Eigen::Index o = 0; o < cfg.codebook_size; ++o) {
    vectors_.col(o) = unit_gaussian_vector(
        cfg.d_val, derive_seed({tag(SeedDomain::kValue), cfg.universe_seed,
                                static_cast<std::uint64_t>(o)}));
  }
}

Universe::Universe(const FeatureMapConfig& cfg) : config(cfg), codebook(cfg) {}

Matrix Universe::inputs(std::span<const EditRequest> requests) const {
  Matrix k(config.d_key, static_cast<Eigen::Index>(requests.size()));
  for (std::size_t i = 0; i < requests.size(); ++i) {
    k.col(static_cast<Eigen::Index>(i)) =
        key_of(config, requests[i].fact.subject, requests[i].fact.relation);
  }
  return k;
}

Matrix Universe::targets(std::span<const EditRequest> requests) const {
  Matrix v(config.d_val, static_cast<Eigen::Index>(requests.size()));
  for (std::size_t i = 0; i < requests.size(); ++i) {
    v.col(static_cast<Eigen::Index>(i)) = value_of(codebook, requests[i].fact.object);
  }
  return v;
}

Matrix Universe::fact_keys(std::span<const Fact> facts) const {
  Matrix k(config.d_key, static_cast<Eigen::Index>(facts.size()));
  for (std::size_t i = 0; i < facts.size(); ++i) {
    k.col(static_cast<Eigen::Index>(i)) = key_of(config, facts[i].subject, facts[i].relation);
  }
  return k;
}

Matrix Universe::fact_values(std::span<const Fact> facts) const {
  Matrix v(config.d_val, static_cast<Eigen::Index>(facts.size()));
  for (std::size_t i = 0; i < facts.size(); ++i) {
    v.col(static_cast<Eigen::Index>(i)) = value_of(codebook, facts[i].object);
  }
  return v;
}

Vector key_of(const FeatureMapConfig& cfg, std::int64_t subject, std::int64_t relation) {
  return unit_gaussian_vector(
      cfg.d_key, derive_seed({tag(SeedDomain::kKey), cfg.universe_seed,
                              static_cast<std::uint64_t>(subject),
                              static_cast<std::uint64_t>(relation)}));
}

Vector value_of(const ObjectCodebook& codebook, std::int64_t object) {
  if (!codebook.contains(object)) {
    throw InvalidArgument("value_of: unknown object id " + std::to_string(object));
  }
  return codebook.vectors().col(static_cast<Eigen::Index>(object));
}

Vector perturb_key(const FeatureMapConfig& cfg, const Vector& key, std::uint64_t seed) {
  if (cfg.paraphrase_sigma == 0.0) return key;
  const Vector direction =
      unit_gaussian_vector(key.size(), derive_seed({tag(SeedDomain::kParaphrase), seed}));
  const Vector moved = key + cfg.paraphrase_sigma * direction;
  return moved / moved.norm();
}

Matrix covariance_statistic(const Matrix& keys, double mu, double ridge) {
  Matrix c = Matrix::Identity(keys.rows(), keys.rows()) * ridge;
  if (keys.cols() > 0) c += (mu / static_cast<double>(keys.cols())) * gram(keys);
  return c;
}

InitializedLayer init_layer(const Universe& universe, std::size_t n_init, std::uint64_t seed,
                            const LayerInitOptions& options) {
  if (!(options.mu > 0.0)) throw InvalidArgument("init_layer: mu must be positive");
  const auto& cfg = universe.config;
  FactSampler sampler(universe.config, derive_seed({tag(SeedDomain::kBaseFacts), seed}));

  InitializedLayer out;
  out.layer.base_facts = sampler.sample_facts(n_init);
  out.layer.mu = options.mu;
  out.base_keys = universe.fact_keys(out.layer.base_facts);
  out.base_values = universe.fact_values(out.layer.base_facts);
  out.underdetermined = static_cast<Eigen::Index>(n_init) < cfg.d_key;

  // W·(K Kᵀ + εI) = V Kᵀ, solved through the transposed system.
  const Matrix a = gram(out.base_keys) +
                   options.init_ridge * Matrix::Identity(cfg.d_key, cfg.d_key);
  out.layer.W = solve_spd(a, out.base_keys * out.base_values.transpose()).transpose();
  out.layer.C0 = covariance_statistic(out.base_keys, options.mu, options.covariance_ridge);
  return out;
}

FactSampler::FactSampler(const FeatureMapConfig& config, std::uint64_t seed)
    : config_(config), rng_(seed) {}

std::uint64_t FactSampler::pair_id(std::int64_t s, std::int64_t r) const noexcept {
  return static_cast<std::uint64_t>(s) * static_cast<std::uint64_t>(config_.n_relations) +
         static_cast<std::uint64_t>(r);
}

void FactSampler::reserve(std::span<const Fact> facts) {
  for (const Fact& f : facts) {
    used_.insert(pair_id(f.subject, f.relation));
    objects_by_relation_[f.relation].push_back(f.object);
  }
}

std::pair<std::int64_t, std::int64_t> FactSampler::draw_fresh_pair() {
  const auto& cfg = config_;
  const std::uint64_t total =
      static_cast<std::uint64_t>(cfg.n_subjects) * static_cast<std::uint64_t>(cfg.n_relations);
  if (used_.size() >= total) {
    throw UniverseExhausted("fact universe exhausted: all " + std::to_string(total) +
                            " (subject, relation) pairs are in use");
  }
  std::uniform_int_distribution<std::uint64_t> pick(0, total - 1);
  std::uint64_t id = pick(rng_);
  if (used_.size() * 2 < total) {
    while (used_.count(id)) id = pick(rng_);
  } else {
    while (used_.count(id)) id = (id + 1) % total;
  }
  used_.insert(id);

  const auto s = static_cast<std::int64_t>(id / static_cast<std::uint64_t>(cfg.n_relations));
  const auto r = static_cast<std::int64_t>(id % static_cast<std::uint64_t>(cfg.n_relations));
  const Vector key = key_of(cfg, s, r);
  const std::uint64_t h = hash_vector(key);
  if (auto it = key_hashes_.find(h); it != key_hashes_.end()) {
    const auto other_s = static_cast<std::int64_t>(it->second / static_cast<std::uint64_t>(cfg.n_relations));
    const auto other_r = static_cast<std::int64_t>(it->second % static_cast<std::uint64_t>(cfg.n_relations));
    if (key_of(cfg, other_s, other_r) == key) {
      throw NumericalError("feature map collision between two (subject, relation) pairs");
    }
  }
  key_hashes_.emplace(h, id);
  return {s, r};
}

std::int64_t FactSampler::draw_object() {
  std::uniform_int_distribution<std::int64_t> pick(0, config_.codebook_size - 1);
  return pick(rng_);
}

std::vector<Fact> FactSampler::sample_facts(std::size_t n) {
  std::vector<Fact> facts;
  facts.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto [s, r] = draw_fresh_pair();
    facts.push_back(Fact{s, r, draw_object()});
  }
  return facts;
}

std::vector<std::vector<EditRequest>> FactSampler::sample_requests(std::size_t n,
                                                                   std::size_t clients,
                                                                   std::uint32_t round) {
  if (clients == 0) {
    if (n == 0) return {};
    throw InvalidArgument("sample_requests: cannot distribute requests over zero clients");
  }
  std::vector<std::vector<EditRequest>> out(clients);
  const std::size_t per_client = n / clients;
  for (std::size_t i = 0; i < n; ++i) {
    const auto [s, r] = draw_fresh_pair();
    std::int64_t old_object;
    if (auto it = objects_by_relation_.find(r); it != objects_by_relation_.end()) {
      std::uniform_int_distribution<std::size_t> pick(0, it->second.size() - 1);
      old_object = it->second[pick(rng_)];
    } else {
      old_object = draw_object();
    }
    std::int64_t new_object = draw_object();
    while (new_object == old_object) new_object = draw_object();

    const std::size_t client = per_client == 0 ? clients - 1 : std::min(i / per_client, clients - 1);
    out[client].push_back(EditRequest{Fact{s, r, new_object}, old_object,
                                      static_cast<std::uint32_t>(client), round});
  }
  return out;
}

std::vector<std::vector<EditRequest>> sample_edit_requests(const Universe& universe,
                                                           std::size_t n, std::size_t clients,
                                                           std::uint64_t seed,
                                                           std::span<const Fact> disjoint_from,
                                                           std::uint32_t round) {
  FactSampler sampler(universe.config, derive_seed({tag(SeedDomain::kRequests), seed}));
  sampler.reserve(disjoint_from);
  return sampler.sample_requests(n, clients, round);
}

std::vector<EditRequest> flatten(std::span<const std::vector<EditRequest>> per_client) {
  std::vector<EditRequest> all;
  for (const auto& group : per_client) all.insert(all.end(), group.begin(), group.end());
  return all;
}

}  // namespace collabedit
