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

#include "collabedit/interventions.h"

#include <sodium.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>

#include "collabedit/errors.h"
#include "collabedit/random.h"

namespace collabedit {
namespace {

void ensure_sodium() {
  static const int status = sodium_init();
  if (status < 0) throw Error("libsodium failed to initialize");
}

void put_u64(std::uint8_t* out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out[i] = static_cast<std::uint8_t>(v >> (8 * i));
}

// Arrival order shared by FCFS and FIFO.
bool arrives_before(const ConflictMember& a, const ConflictMember& b) {
  if (a.round != b.round) return a.round < b.round;
  if (a.client_id != b.client_id) return a.client_id < b.client_id;
  return a.index < b.index;
}

}  // namespace

OverlapTrace overlap_run(const Matrix& w, const Matrix& keys, const Matrix& values,
                         std::size_t repetitions, const Matrix& prior) {
  if (repetitions < 1) throw InvalidArgument("overlap_run: repetitions must be >= 1");
  if (keys.cols() != values.cols()) throw DimensionMismatch("overlap_run: keys and values differ in count");
  if (w.rows() != values.rows() || w.cols() != keys.rows()) {
    throw DimensionMismatch("overlap_run: layer is " + shape_string(w.rows(), w.cols()));
  }

  // R_{t+1} = R_t (I − Kᵀ A⁻¹ K) with A = C + K Kᵀ.
  const Matrix a = prior + gram(keys);
  const Matrix contraction =
      Matrix::Identity(keys.cols(), keys.cols()) - keys.transpose() * solve_spd(a, keys);

  OverlapTrace trace;
  Matrix weights = w;
  Matrix r_rec = values - weights * keys;
  const double tolerance = 1e-10 * std::max(1.0, r_rec.norm());
  trace.residual_norms.push_back(r_rec.norm());
  trace.recurrence_norms.push_back(r_rec.norm());
  for (std::size_t t = 0; t < repetitions; ++t) {
    const Matrix r_sim = values - weights * keys;
    weights += edit_delta(keys, r_sim, prior);
    const Matrix after = values - weights * keys;
    r_rec = r_rec * contraction;
    const double deviation = (after - r_rec).norm();
    trace.max_deviation = std::max(trace.max_deviation, deviation);
    if (!(deviation <= tolerance)) {
      throw NumericalError("overlap_run: simulation and recurrence disagree by " +
                           std::to_string(deviation) + " at step " + std::to_string(t + 1));
    }
    trace.residual_norms.push_back(after.norm());
    trace.recurrence_norms.push_back(r_rec.norm());
  }
  return trace;
}

OverlapTrace overlap_run(const SyntheticLayer& layer, const Universe& universe,
                         std::span<const EditRequest> requests, std::size_t repetitions,
                         const Matrix& prior) {
  if (requests.empty()) throw InvalidArgument("overlap_run: empty request list");
  return overlap_run(layer.W, universe.inputs(requests), universe.targets(requests), repetitions,
                     prior);
}

OverlapDetection overlap_detect(std::span<const double> norms, double theta, bool relative) {
  if (!(theta >= 0.0)) throw InvalidArgument("overlap_detect: theta must be >= 0");
  OverlapDetection out;
  if (norms.empty()) return out;
  out.threshold = relative ? theta * norms[0] : theta;
  for (std::size_t i = 0; i < norms.size(); ++i) {
    if (norms[i] < out.threshold || (norms[i] == 0.0 && theta > 0.0)) {
      out.crossed = true;
      out.index = i;
      break;
    }
  }
  return out;
}

ConflictInjection conflict_inject(std::span<const std::vector<EditRequest>> per_client,
                                  double fraction, std::uint64_t seed,
                                  const FeatureMapConfig& features) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) {
    throw InvalidArgument("conflict_inject: fraction must be in [0, 1]");
  }
  ConflictInjection out;
  out.per_client.assign(per_client.begin(), per_client.end());

  std::vector<RequestRef> all;
  for (std::size_t c = 0; c < per_client.size(); ++c) {
    for (std::size_t i = 0; i < per_client[c].size(); ++i) {
      all.push_back(RequestRef{static_cast<std::uint32_t>(c), i});
    }
  }
  const auto n_groups = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(all.size())));
  if (n_groups == 0) return out;
  if (per_client.size() < 2) {
    throw InvalidArgument("conflict_inject: rivals need a second client");
  }
  if (features.codebook_size < 3) {
    throw InvalidArgument("conflict_inject: codebook too small for a distinct rival object");
  }

  Rng rng(derive_seed({tag(SeedDomain::kConflict), seed}));
  std::shuffle(all.begin(), all.end(), rng);
  all.resize(n_groups);
  std::sort(all.begin(), all.end(), [](const RequestRef& a, const RequestRef& b) {
    return a.client_id != b.client_id ? a.client_id < b.client_id : a.index < b.index;
  });

  std::uniform_int_distribution<std::size_t> other(1, per_client.size() - 1);
  std::uniform_int_distribution<std::int64_t> object(0, features.codebook_size - 1);
  for (const RequestRef& ref : all) {
    const EditRequest& original = per_client[ref.client_id][ref.index];
    const auto rival_client =
        static_cast<std::uint32_t>((ref.client_id + other(rng)) % per_client.size());
    std::int64_t rival_object = object(rng);
    while (rival_object == original.fact.object || rival_object == original.old_object) {
      rival_object = object(rng);
    }
    EditRequest rival = original;
    rival.fact.object = rival_object;
    rival.client_id = rival_client;
    auto& target = out.per_client[rival_client];
    target.push_back(rival);
    out.conflicts.push_back(InjectedConflict{ref, RequestRef{rival_client, target.size() - 1}});
  }
  return out;
}

Fingerprint fingerprint(std::int64_t subject, std::int64_t relation, std::uint64_t salt) {
  ensure_sodium();
  std::array<std::uint8_t, crypto_generichash_KEYBYTES> key{};
  for (std::size_t i = 0; i < key.size() / 8; ++i) {
    put_u64(key.data() + 8 * i, derive_seed({salt, static_cast<std::uint64_t>(i)}));
  }
  std::array<std::uint8_t, 16> message{};
  put_u64(message.data(), static_cast<std::uint64_t>(subject));
  put_u64(message.data() + 8, static_cast<std::uint64_t>(relation));
  Fingerprint out{};
  crypto_generichash(out.data(), out.size(), message.data(), message.size(), key.data(), key.size());
  return out;
}

ClientReport make_client_report(const LayerStack& global, const Universe& universe,
                                std::span<const EditRequest> requests, std::uint32_t client_id,
                                std::uint64_t salt) {
  ClientReport report{client_id, {}};
  if (requests.empty()) return report;
  const auto top = predicted_objects(global, universe.codebook, universe.inputs(requests));
  for (std::size_t i = 0; i < requests.size(); ++i) {
    const auto& r = requests[i];
    report.entries.push_back(ReportEntry{fingerprint(r.fact.subject, r.fact.relation, salt),
                                         r.round, i, top[i] != r.fact.object});
  }
  return report;
}

std::string_view policy_name(ArrivalPolicy policy) {
  return policy == ArrivalPolicy::kFcfs ? "fcfs" : "fifo";
}

ConflictDetection conflict_detect(std::span<const ClientReport> reports, ArrivalPolicy policy) {
  std::map<Fingerprint, std::vector<ConflictMember>> by_fact;
  for (const auto& report : reports) {
    for (const auto& e : report.entries) {
      by_fact[e.fingerprint].push_back(ConflictMember{report.client_id, e.round, e.index, e.failed});
    }
  }

  ConflictDetection out;
  for (auto& [fp, members] : by_fact) {
    std::sort(members.begin(), members.end(), arrives_before);
    // Within one client the later request replaces the earlier one.
    std::vector<ConflictMember> latest;
    for (const auto& m : members) {
      auto it = std::find_if(latest.begin(), latest.end(),
                             [&](const ConflictMember& x) { return x.client_id == m.client_id; });
      if (it == latest.end()) {
        latest.push_back(m);
        continue;
      }
      const bool m_later = arrives_before(*it, m);
      const ConflictMember& kept = m_later ? m : *it;
      const ConflictMember& dropped = m_later ? *it : m;
      out.overwrites.push_back(Overwrite{m.client_id, dropped.index, kept.index});
      *it = kept;
    }
    const bool any_failed =
        std::any_of(latest.begin(), latest.end(), [](const ConflictMember& m) { return m.failed; });
    if (latest.size() < 2 || !any_failed) continue;
    std::sort(latest.begin(), latest.end(), arrives_before);
    ConflictGroup group;
    group.fingerprint = fp;
    group.members = std::move(latest);
    group.winner = group.members.front();
    group.policy = policy;
    out.groups.push_back(std::move(group));
  }
  return out;
}

RoundReport conflict_resolve(ServerState& state, const Universe& universe,
                             std::span<const ConflictGroup> groups,
                             std::span<const std::vector<EditRequest>> per_client,
                             std::size_t augmentation, std::uint64_t seed) {
  if (augmentation < 1) throw InvalidArgument("conflict_resolve: augmentation must be >= 1");
  std::map<std::uint32_t, std::vector<std::pair<Vector, Vector>>> batches;
  for (const auto& group : groups) {
    if (group.members.empty()) throw InvalidArgument("conflict_resolve: empty conflict group");
    if (!group.winner) throw InvalidArgument("conflict_resolve: group has no winner");
    const auto& w = *group.winner;
    if (w.client_id >= per_client.size() || w.index >= per_client[w.client_id].size()) {
      throw InvalidArgument("conflict_resolve: winner refers to an unknown request");
    }
    const EditRequest& req = per_client[w.client_id][w.index];
    const Vector key = key_of(universe.config, req.fact.subject, req.fact.relation);
    const Vector value = value_of(universe.codebook, req.fact.object);
    auto& batch = batches[w.client_id];
    batch.emplace_back(key, value);
    for (std::size_t j = 1; j < augmentation; ++j) {
      const Vector variant = perturb_key(
          universe.config, key,
          derive_seed({tag(SeedDomain::kAugmentation), seed, w.client_id,
                       static_cast<std::uint64_t>(w.index), j}));
      batch.emplace_back(variant, value);
    }
  }

  std::vector<ClientEdits> clients;
  for (const auto& [client, pairs] : batches) {
    ClientEdits c;
    c.client_id = client;
    c.inputs.resize(universe.config.d_key, static_cast<Eigen::Index>(pairs.size()));
    c.targets.resize(universe.config.d_val, static_cast<Eigen::Index>(pairs.size()));
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      c.inputs.col(static_cast<Eigen::Index>(i)) = pairs[i].first;
      c.targets.col(static_cast<Eigen::Index>(i)) = pairs[i].second;
    }
    clients.push_back(std::move(c));
  }
  RoundOptions opts;
  opts.measure_global_gap = false;
  return run_round(state, clients, CollabEdit{}, opts);
}

ConflictStudyResult conflict_study(const ConflictStudyConfig& config) {
  config.eval.validate();
  if (config.n_clients < 2) throw InvalidArgument("conflict_study: needs at least two clients");
  const Scenario scenario = make_scenario(config.scenario);
  const auto& universe = scenario.universe;
  const auto base_top = predicted_objects(scenario.stack, universe.codebook, scenario.base_inputs);

  ConflictStudyResult result;
  std::size_t preserved = 0;
  std::size_t base_checked = 0;
  std::size_t pre_hits = 0;
  std::size_t post_hits = 0;

  for (std::size_t round = 0; round < config.rounds; ++round) {
    const std::uint64_t round_seed =
        derive_seed({tag(SeedDomain::kConflict), config.seed, static_cast<std::uint64_t>(round)});
    FactSampler sampler = scenario.request_sampler(round_seed);
    const auto originals = sampler.sample_requests(config.groups_per_round, config.n_clients, 0);
    const auto injected = conflict_inject(originals, 1.0, round_seed, universe.config);

    ServerState state(scenario.stack);
    RoundOptions ropts;
    ropts.measure_global_gap = false;
    run_round(state, universe, injected.per_client, CollabEdit{}, ropts);

    std::vector<ClientReport> reports;
    for (std::size_t c = 0; c < injected.per_client.size(); ++c) {
      reports.push_back(make_client_report(state.stack(), universe, injected.per_client[c],
                                           static_cast<std::uint32_t>(c), round_seed));
    }
    const ConflictDetection detection = conflict_detect(reports, config.policy);
    result.overwrites += detection.overwrites.size();

    // Policy winner of each injected pair, independent of detection.
    struct Pair {
      const EditRequest* winner;
      const EditRequest* loser;
      bool detected;
    };
    std::vector<Pair> pairs;
    for (const auto& c : injected.conflicts) {
      const EditRequest* a = &injected.per_client[c.original.client_id][c.original.index];
      const EditRequest* b = &injected.per_client[c.rival.client_id][c.rival.index];
      if (b->client_id < a->client_id) std::swap(a, b);
      const Fingerprint fp = fingerprint(a->fact.subject, a->fact.relation, round_seed);
      const bool detected = std::any_of(detection.groups.begin(), detection.groups.end(),
                                        [&](const ConflictGroup& g) { return g.fingerprint == fp; });
      pairs.push_back(Pair{a, b, detected});
    }

    const auto measure = [&](const LayerStack& stack, const Pair& p, bool& top1, double& margin,
                             double* loser_prob) {
      const Vector key = key_of(universe.config, p.winner->fact.subject, p.winner->fact.relation);
      const auto dist = object_distribution(stack, universe.codebook, key, config.eval.tau);
      top1 = dist.argmax() == p.winner->fact.object;
      margin = dist.prob(p.winner->fact.object) - dist.prob(p.loser->fact.object);
      if (loser_prob) *loser_prob = dist.prob(p.loser->fact.object);
    };

    std::vector<ConflictOutcome> outcomes(pairs.size());
    for (std::size_t g = 0; g < pairs.size(); ++g) {
      auto& o = outcomes[g];
      o.round = round;
      o.group = g;
      o.winner_client = pairs[g].winner->client_id;
      o.loser_client = pairs[g].loser->client_id;
      o.detected = pairs[g].detected;
      measure(state.stack(), pairs[g], o.pre_winner_top1, o.pre_margin, nullptr);
    }

    conflict_resolve(state, universe, detection.groups, injected.per_client,
                     config.augmentation, round_seed);

    for (std::size_t g = 0; g < pairs.size(); ++g) {
      auto& o = outcomes[g];
      measure(state.stack(), pairs[g], o.post_winner_top1, o.post_margin, &o.post_loser_prob);
      pre_hits += o.pre_winner_top1;
      post_hits += o.post_winner_top1 && o.post_margin > 0.0;
      result.outcomes.push_back(o);
    }

    const auto after_top = predicted_objects(state.stack(), universe.codebook, scenario.base_inputs);
    for (std::size_t i = 0; i < base_top.size(); ++i) preserved += after_top[i] == base_top[i];
    base_checked += base_top.size();
  }

  const auto n = result.outcomes.size();
  result.pre_winner_rate = n ? 100.0 * static_cast<double>(pre_hits) / static_cast<double>(n) : 0.0;
  result.post_winner_rate = n ? 100.0 * static_cast<double>(post_hits) / static_cast<double>(n) : 0.0;
  result.base_preservation =
      base_checked ? 100.0 * static_cast<double>(preserved) / static_cast<double>(base_checked) : 100.0;
  return result;
}

ForgettingResult forgetting_experiment(const ForgettingConfig& config) {
  config.eval.validate();
  if (config.n_old == 0) throw InvalidArgument("forgetting: n_old must be >= 1");
  const Scenario scenario = make_scenario(config.scenario);
  ServerOptions sopts;
  sopts.dynamic_covariance = config.dynamic_covariance;
  sopts.beta0 = config.beta0;
  sopts.beta1 = config.beta1;
  ServerState state(scenario.stack, sopts);
  RoundOptions ropts;
  ropts.measure_global_gap = false;

  FactSampler sampler = scenario.request_sampler(config.seed);
  const auto old_per_client = sampler.sample_requests(config.n_old, config.n_clients, 0);
  const auto old_requests = flatten(old_per_client);
  run_round(state, scenario.universe, old_per_client, CollabEdit{}, ropts);
  const auto neighbors = select_neighbors(scenario.base_facts, old_requests,
                                          config.eval.neighbors_per_edit,
                                          derive_seed({config.eval.seed, config.seed}));

  ForgettingResult result;
  result.before = evaluate(state.stack(), scenario.universe, old_requests, neighbors, config.eval);
  result.after = result.before;
  for (std::size_t r = 1; r <= config.rounds; ++r) {
    const auto fresh = sampler.sample_requests(config.edits_per_round, config.n_clients,
                                               static_cast<std::uint32_t>(r));
    run_round(state, scenario.universe, fresh, CollabEdit{}, ropts);
    result.after = evaluate(state.stack(), scenario.universe, old_requests, neighbors, config.eval);
    result.per_round.push_back(result.after);
  }
  return result;
}

}  // namespace collabedit
