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

#include "collabedit/eval.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <utility>

#include "collabedit/errors.h"
#include "collabedit/random.h"

namespace collabedit {
namespace {

// Everything a metric pass needs, with keys already materialized.
struct EvalSet {
  Matrix keys;
  std::vector<std::int64_t> new_objects;
  std::vector<std::int64_t> old_objects;
  Matrix paraphrases;  // n_paraphrases columns per request, request-major
  std::size_t n_paraphrases = 0;
  Matrix neighbor_keys;
  std::vector<std::int64_t> neighbor_kept;
  std::vector<std::int64_t> neighbor_new;
};

EvalSet make_eval_set(const Universe& universe, std::span<const EditRequest> requests,
                      std::span<const Neighbor> neighbors, const EvalOptions& options) {
  EvalSet set;
  set.keys = universe.inputs(requests);
  for (const auto& r : requests) {
    set.new_objects.push_back(r.fact.object);
    set.old_objects.push_back(r.old_object);
  }
  set.paraphrases = paraphrase_keys(universe, requests, options);
  set.n_paraphrases = options.n_paraphrases;
  std::vector<Fact> neighbor_facts;
  for (const auto& n : neighbors) neighbor_facts.push_back(n.fact);
  set.neighbor_keys = universe.fact_keys(neighbor_facts);
  for (const auto& n : neighbors) {
    set.neighbor_kept.push_back(n.fact.object);
    set.neighbor_new.push_back(n.new_object);
  }
  return set;
}

double squared_distance(const Matrix& outputs, Eigen::Index col, const ObjectCodebook& codebook,
                        std::int64_t object) {
  if (!codebook.contains(object)) {
    throw InvalidArgument("unknown object id " + std::to_string(object));
  }
  return (outputs.col(col) - codebook.vectors().col(static_cast<Eigen::Index>(object)))
      .squaredNorm();
}

std::vector<std::int64_t> nearest_objects(const Matrix& outputs, const ObjectCodebook& codebook) {
  // argmin ‖o − v‖² = argmax (2 vᵀo − ‖v‖²).
  const Matrix& v = codebook.vectors();
  const Vector v_norms = v.colwise().squaredNorm().transpose();
  Matrix score = 2.0 * (v.transpose() * outputs);
  score.colwise() -= v_norms;
  std::vector<std::int64_t> out(static_cast<std::size_t>(outputs.cols()));
  for (Eigen::Index j = 0; j < outputs.cols(); ++j) {
    Eigen::Index best = 0;
    score.col(j).maxCoeff(&best);
    out[static_cast<std::size_t>(j)] = best;
  }
  return out;
}

double percent(std::size_t hits, std::size_t total) {
  return total == 0 ? 100.0 : 100.0 * static_cast<double>(hits) / static_cast<double>(total);
}

// Probability comparisons are done on squared distances: softmax is monotone
// in −distance, so the outcome does not depend on τ.
Metrics evaluate_set(const LayerStack& stack, const ObjectCodebook& codebook, const EvalSet& set) {
  Metrics m;
  const Matrix out = stack.forward(set.keys);
  const Matrix para_out = stack.forward(set.paraphrases);
  const Matrix nb_out = stack.forward(set.neighbor_keys);

  std::size_t es = 0;
  for (Eigen::Index j = 0; j < out.cols(); ++j) {
    const auto idx = static_cast<std::size_t>(j);
    es += squared_distance(out, j, codebook, set.new_objects[idx]) <=
          squared_distance(out, j, codebook, set.old_objects[idx]);
  }
  std::size_t ps = 0;
  for (Eigen::Index j = 0; j < para_out.cols(); ++j) {
    const auto req = static_cast<std::size_t>(j) / set.n_paraphrases;
    ps += squared_distance(para_out, j, codebook, set.new_objects[req]) <
          squared_distance(para_out, j, codebook, set.old_objects[req]);
  }
  std::size_t ns = 0;
  for (Eigen::Index j = 0; j < nb_out.cols(); ++j) {
    const auto idx = static_cast<std::size_t>(j);
    ns += squared_distance(nb_out, j, codebook, set.neighbor_kept[idx]) <
          squared_distance(nb_out, j, codebook, set.neighbor_new[idx]);
  }
  m.ES = percent(es, static_cast<std::size_t>(out.cols()));
  m.PS = percent(ps, static_cast<std::size_t>(para_out.cols()));
  m.NS = percent(ns, static_cast<std::size_t>(nb_out.cols()));
  m.Score = harmonic_score(m.ES, m.PS, m.NS);

  const auto top = nearest_objects(out, codebook);
  const auto para_top = nearest_objects(para_out, codebook);
  const auto nb_top = nearest_objects(nb_out, codebook);
  std::size_t ea = 0, pa = 0, na = 0;
  for (std::size_t i = 0; i < top.size(); ++i) ea += top[i] == set.new_objects[i];
  for (std::size_t i = 0; i < para_top.size(); ++i) {
    pa += para_top[i] == set.new_objects[i / set.n_paraphrases];
  }
  for (std::size_t i = 0; i < nb_top.size(); ++i) na += nb_top[i] == set.neighbor_kept[i];
  m.EA = percent(ea, top.size());
  m.PA = percent(pa, para_top.size());
  m.NA = percent(na, nb_top.size());
  m.AccScore = harmonic_score(m.EA, m.PA, m.NA);
  return m;
}

void require_requests(std::span<const EditRequest> requests, const char* what) {
  if (requests.empty()) throw InvalidArgument(std::string(what) + ": empty request list");
}

}  // namespace

void EvalOptions::validate() const {
  if (!(tau > 0.0) || !std::isfinite(tau)) throw InvalidArgument("eval: tau must be positive");
  if (n_paraphrases == 0) throw InvalidArgument("eval: n_paraphrases must be >= 1");
}

ObjectDistribution::ObjectDistribution(Vector log_probs) : log_probs_(std::move(log_probs)) {}

double ObjectDistribution::log_prob(std::int64_t object) const {
  if (object < 0 || object >= log_probs_.size()) {
    throw InvalidArgument("unknown object id " + std::to_string(object));
  }
  return log_probs_(static_cast<Eigen::Index>(object));
}

double ObjectDistribution::prob(std::int64_t object) const { return std::exp(log_prob(object)); }

std::int64_t ObjectDistribution::argmax() const {
  Eigen::Index best = 0;
  log_probs_.maxCoeff(&best);
  return best;
}

ObjectDistribution object_distribution(const LayerStack& stack, const ObjectCodebook& codebook,
                                       const Vector& key, double tau) {
  if (!(tau > 0.0)) throw InvalidArgument("object_distribution: tau must be positive");
  const Vector out = stack.forward(key);
  const Vector logits =
      -(codebook.vectors().colwise() - out).colwise().squaredNorm().transpose() / tau;
  const double top = logits.maxCoeff();
  const double lse = top + std::log((logits.array() - top).exp().sum());
  return ObjectDistribution(logits.array() - lse);
}

double prob_of(const LayerStack& stack, const ObjectCodebook& codebook, const Vector& key,
               std::int64_t object, double tau) {
  return object_distribution(stack, codebook, key, tau).prob(object);
}

std::vector<Neighbor> select_neighbors(std::span<const Fact> base_facts,
                                       std::span<const EditRequest> edits,
                                       std::size_t per_edit, std::uint64_t seed) {
  std::set<std::pair<std::int64_t, std::int64_t>> edited;
  for (const auto& e : edits) edited.emplace(e.fact.subject, e.fact.relation);
  std::map<std::pair<std::int64_t, std::int64_t>, std::vector<std::size_t>> by_relation_object;
  std::vector<std::size_t> unedited;
  for (std::size_t i = 0; i < base_facts.size(); ++i) {
    const auto& f = base_facts[i];
    if (edited.count({f.subject, f.relation})) continue;
    by_relation_object[{f.relation, f.object}].push_back(i);
    unedited.push_back(i);
  }

  Rng rng(derive_seed({tag(SeedDomain::kNeighbors), seed}));
  std::vector<Neighbor> out;
  if (per_edit == 0) return out;
  for (const auto& e : edits) {
    std::vector<std::size_t> chosen;
    if (auto it = by_relation_object.find({e.fact.relation, e.old_object});
        it != by_relation_object.end()) {
      chosen = it->second;
      std::shuffle(chosen.begin(), chosen.end(), rng);
      if (chosen.size() > per_edit) chosen.resize(per_edit);
    }
    for (std::size_t i : chosen) out.push_back(Neighbor{base_facts[i], e.fact.object, false});

    if (chosen.size() >= per_edit) continue;
    // Fallback neighbors must still be able to lose to the new object.
    std::vector<std::size_t> pool;
    for (std::size_t i : unedited) {
      if (base_facts[i].object != e.fact.object &&
          std::find(chosen.begin(), chosen.end(), i) == chosen.end()) {
        pool.push_back(i);
      }
    }
    std::shuffle(pool.begin(), pool.end(), rng);
    pool.resize(std::min(pool.size(), per_edit - chosen.size()));
    for (std::size_t i : pool) out.push_back(Neighbor{base_facts[i], e.fact.object, true});
  }
  return out;
}

Matrix paraphrase_keys(const Universe& universe, std::span<const EditRequest> requests,
                       const EvalOptions& options) {
  options.validate();
  Matrix keys(universe.config.d_key,
              static_cast<Eigen::Index>(requests.size() * options.n_paraphrases));
  Eigen::Index col = 0;
  for (const auto& r : requests) {
    const Vector k = key_of(universe.config, r.fact.subject, r.fact.relation);
    for (std::size_t j = 0; j < options.n_paraphrases; ++j) {
      keys.col(col++) = perturb_key(
          universe.config, k,
          derive_seed({tag(SeedDomain::kParaphrase), options.seed,
                       static_cast<std::uint64_t>(r.fact.subject),
                       static_cast<std::uint64_t>(r.fact.relation), j}));
    }
  }
  return keys;
}

std::vector<std::int64_t> predicted_objects(const LayerStack& stack, const ObjectCodebook& codebook,
                                            const Matrix& keys) {
  return nearest_objects(stack.forward(keys), codebook);
}

double efficacy_score(const LayerStack& stack, const Universe& universe,
                      std::span<const EditRequest> requests) {
  require_requests(requests, "efficacy_score");
  EvalOptions opts;
  opts.n_paraphrases = 1;
  const EvalSet set = make_eval_set(universe, requests, {}, opts);
  const Matrix out = stack.forward(set.keys);
  std::size_t hits = 0;
  for (Eigen::Index j = 0; j < out.cols(); ++j) {
    const auto i = static_cast<std::size_t>(j);
    hits += squared_distance(out, j, universe.codebook, set.new_objects[i]) <=
            squared_distance(out, j, universe.codebook, set.old_objects[i]);
  }
  return percent(hits, requests.size());
}

double paraphrase_score(const LayerStack& stack, const Universe& universe,
                        std::span<const EditRequest> requests, const EvalOptions& options) {
  require_requests(requests, "paraphrase_score");
  return evaluate_set(stack, universe.codebook, make_eval_set(universe, requests, {}, options)).PS;
}

double neighborhood_score(const LayerStack& stack, const Universe& universe,
                          std::span<const Neighbor> neighbors) {
  std::vector<Fact> facts;
  for (const auto& n : neighbors) facts.push_back(n.fact);
  const Matrix out = stack.forward(universe.fact_keys(facts));
  std::size_t hits = 0;
  for (Eigen::Index j = 0; j < out.cols(); ++j) {
    const auto& n = neighbors[static_cast<std::size_t>(j)];
    hits += squared_distance(out, j, universe.codebook, n.fact.object) <
            squared_distance(out, j, universe.codebook, n.new_object);
  }
  return percent(hits, neighbors.size());
}

AccuracyMetrics accuracy_metrics(const LayerStack& stack, const Universe& universe,
                                 std::span<const EditRequest> requests,
                                 std::span<const Neighbor> neighbors, const EvalOptions& options) {
  require_requests(requests, "accuracy_metrics");
  const Metrics m =
      evaluate_set(stack, universe.codebook, make_eval_set(universe, requests, neighbors, options));
  return AccuracyMetrics{m.EA, m.PA, m.NA};
}

double harmonic_score(double a, double b, double c) {
  if (a <= 0.0 || b <= 0.0 || c <= 0.0) return 0.0;
  return 3.0 / (1.0 / a + 1.0 / b + 1.0 / c);
}

Metrics evaluate(const LayerStack& stack, const Universe& universe,
                 std::span<const EditRequest> requests, std::span<const Neighbor> neighbors,
                 const EvalOptions& options) {
  require_requests(requests, "evaluate");
  return evaluate_set(stack, universe.codebook,
                      make_eval_set(universe, requests, neighbors, options));
}

double median(std::vector<double> values) {
  if (values.empty()) throw InvalidArgument("median of an empty list");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

GapCurveResult gap_curve(const GapCurveConfig& config) {
  config.eval.validate();
  if (config.edits_per_client == 0) throw InvalidArgument("gap_curve: edits_per_client must be >= 1");
  if (config.sizes.empty() || config.seeds.empty() || config.strategies.empty()) {
    throw InvalidArgument("gap_curve: sizes, seeds and strategies must be non-empty");
  }
  for (const auto& s : config.strategies) validate_strategy(s);

  GapCurveResult result;
  for (std::uint64_t seed : config.seeds) {
    ScenarioConfig sc = config.scenario;
    sc.seed = seed;
    const Scenario scenario = make_scenario(sc);
    const std::vector<Matrix> priors = layer_priors(scenario.stack);
    const EditRange range = scenario.stack.edit_range();

    for (std::size_t size : config.sizes) {
      if (size == 0) throw InvalidArgument("gap_curve: sizes must be positive");
      const std::size_t n_clients = std::max<std::size_t>(1, size / config.edits_per_client);
      FactSampler sampler = scenario.request_sampler(derive_seed({seed, size}));
      const auto per_client = sampler.sample_requests(size, n_clients, 0);
      const auto all = flatten(per_client);
      const auto clients = to_client_edits(scenario.universe, per_client);

      std::vector<EditPacket> packets;
      for (const auto& c : clients) {
        packets.push_back(client_get_delta_and_kkt(scenario.stack, c.inputs, c.targets, priors,
                                                   c.client_id, 0));
      }
      const std::vector<Matrix> global = global_stack_edit(
          scenario.stack, scenario.universe.inputs(all), scenario.universe.targets(all), priors);

      const auto neighbors = select_neighbors(scenario.base_facts, all,
                                              config.eval.neighbors_per_edit,
                                              derive_seed({config.eval.seed, seed, size}));
      const EvalSet set = make_eval_set(scenario.universe, all, neighbors, config.eval);
      const auto model_with = [&](const std::vector<Matrix>& deltas) {
        LayerStack s = scenario.stack;
        for (std::size_t i = 0; i < deltas.size(); ++i) s.apply_delta(range.first + i, deltas[i]);
        return s;
      };
      const Metrics global_metrics =
          evaluate_set(model_with(global), scenario.universe.codebook, set);
      double global_norm2 = 0.0;
      for (const auto& g : global) global_norm2 += g.squaredNorm();

      for (const auto& strategy : config.strategies) {
        const auto merged = merge_packets(packets, strategy, priors, range);
        double diff2 = 0.0;
        for (std::size_t i = 0; i < merged.size(); ++i) diff2 += (merged[i] - global[i]).squaredNorm();
        const Metrics m = evaluate_set(model_with(merged), scenario.universe.codebook, set);

        GapCurveRow row;
        row.size = size;
        row.seed = seed;
        row.strategy = std::string(strategy_name(strategy));
        row.n_clients = n_clients;
        row.weight_gap = global_norm2 > 0 ? std::sqrt(diff2 / global_norm2) : std::sqrt(diff2);
        row.score_global = global_metrics.Score;
        row.score_merged = m.Score;
        row.score_gap = global_metrics.Score - m.Score;
        row.acc_global = global_metrics.AccScore;
        row.acc_merged = m.AccScore;
        result.rows.push_back(std::move(row));
      }
    }
  }

  for (std::size_t size : config.sizes) {
    for (const auto& strategy : config.strategies) {
      const std::string name(strategy_name(strategy));
      std::vector<double> w, s;
      for (const auto& row : result.rows) {
        if (row.size == size && row.strategy == name) {
          w.push_back(row.weight_gap);
          s.push_back(row.score_gap);
        }
      }
      result.medians.push_back(GapCurveMedian{size, name, median(w), median(s)});
    }
  }
  return result;
}

}  // namespace collabedit
