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

#include "collabedit/cli/commands.h"

#include <algorithm>
#include <cmath>
#include <exception>
#include <filesystem>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "collabedit/cli/emit.h"
#include "collabedit/collab.h"
#include "collabedit/editor.h"
#include "collabedit/eval.h"
#include "collabedit/interventions.h"
#include "collabedit/privacy.h"
#include "collabedit/scenario.h"
#include "collabedit/wire.h"

namespace collabedit::cli {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

json summary_of(std::string_view command, const RunConfig& config) {
  return {{"command", command}, {"config", to_json(config)}};
}

void finish(const fs::path& dir, const json& summary) { write_json(dir / "summary.json", summary); }

bool nondecreasing(const std::vector<double>& v) {
  return std::is_sorted(v.begin(), v.end());
}

bool strictly_decreasing(const std::vector<double>& v) {
  return std::adjacent_find(v.begin(), v.end(), std::less_equal<>()) == v.end();
}

json metrics_json(const Metrics& m) {
  return {{"ES", m.ES},       {"PS", m.PS},         {"NS", m.NS}, {"Score", m.Score},
          {"EA", m.EA},       {"PA", m.PA},         {"NA", m.NA}, {"AccScore", m.AccScore}};
}

json optional_index(const std::optional<std::size_t>& i) { return i ? json(*i) : json(); }

}  // namespace

json run_gate(const RunConfig& config, const fs::path& out_dir) {
  GapCurveConfig g;
  g.scenario = config.scenario();
  g.sizes = config.sizes;
  g.seeds = config.seeds;
  g.strategies = config.strategies();
  g.edits_per_client = config.edits_per_client;
  g.eval = config.eval();
  const GapCurveResult result = gap_curve(g);

  const fs::path dir = command_dir(out_dir, "gate");
  CsvWriter csv(dir / "results.csv",
                {"size", "seed", "strategy", "n_clients", "weight_gap", "score_global",
                 "score_merged", "score_gap", "acc_global", "acc_merged"});
  for (const auto& r : result.rows) {
    csv.row({r.size, r.seed, r.strategy, r.n_clients, r.weight_gap, r.score_global, r.score_merged,
             r.score_gap, r.acc_global, r.acc_merged});
  }
  csv.close();

  json medians = json::array();
  for (const auto& m : result.medians) {
    medians.push_back(
        {{"size", m.size}, {"strategy", m.strategy}, {"weight_gap", m.weight_gap}, {"score_gap", m.score_gap}});
  }
  json trends = json::object();
  for (const auto& s : g.strategies) {
    const std::string name(strategy_name(s));
    std::vector<double> w, sg;
    for (const auto& m : result.medians) {
      if (m.strategy != name) continue;
      w.push_back(m.weight_gap);
      sg.push_back(m.score_gap);
    }
    trends[name] = {{"max_weight_gap", *std::max_element(w.begin(), w.end())},
                    {"weight_gap_nondecreasing", nondecreasing(w)},
                    {"score_gap_nondecreasing", nondecreasing(sg)}};
  }

  json summary = summary_of("gate", config);
  summary["results"] = {{"medians", std::move(medians)}, {"trends", std::move(trends)}};
  finish(dir, summary);
  return summary;
}

json run_merge_bench(const RunConfig& config, const fs::path& out_dir) {
  const Scenario scenario = make_scenario(config.scenario());
  const EvalOptions eval = config.eval();
  const std::size_t n_edits = config.n_clients * config.edits_per_client;
  FactSampler sampler = scenario.request_sampler(config.seed);
  const auto per_client = sampler.sample_requests(n_edits, config.n_clients, 0);
  const auto all = flatten(per_client);
  const auto neighbors = select_neighbors(scenario.base_facts, all, eval.neighbors_per_edit,
                                          derive_seed({tag(SeedDomain::kNeighbors), config.seed}));

  ServerOptions options;
  options.prior = config.prior();
  options.beta0 = config.beta0;
  options.beta1 = config.beta1;
  const EditRange range = scenario.stack.edit_range();
  const std::vector<Matrix> priors = base_priors(scenario.stack, options.prior);
  const std::vector<Matrix> global = global_stack_edit(
      scenario.stack, scenario.universe.inputs(all), scenario.universe.targets(all), priors);
  LayerStack global_stack = scenario.stack;
  double global_norm2 = 0.0;
  for (std::size_t i = 0; i < global.size(); ++i) {
    global_stack.apply_delta(range.first + i, global[i]);
    global_norm2 += global[i].squaredNorm();
  }

  const fs::path dir = command_dir(out_dir, "merge-bench");
  CsvWriter csv(dir / "results.csv", {"strategy", "n_clients", "n_edits", "weight_gap", "ES", "PS",
                                      "NS", "Score", "EA", "PA", "NA", "AccScore"});
  JsonLinesWriter rounds(dir / "rounds.jsonl");
  json per_strategy = json::object();

  const auto emit = [&](const std::string& name, double gap, const Metrics& m) {
    csv.row({name, config.n_clients, n_edits, gap, m.ES, m.PS, m.NS, m.Score, m.EA, m.PA, m.NA,
             m.AccScore});
    json entry = metrics_json(m);
    entry["weight_gap"] = gap;
    per_strategy[name] = std::move(entry);
  };

  emit("global", 0.0, evaluate(global_stack, scenario.universe, all, neighbors, eval));
  for (const auto& strategy : config.strategies()) {
    ServerState state(scenario.stack, options);
    const RoundReport report = run_round(state, scenario.universe, per_client, strategy);
    rounds.write(to_json(report));
    double diff2 = 0.0;
    for (std::size_t l = range.first; l <= range.last; ++l) {
      diff2 += (state.stack().layer(l).W - global_stack.layer(l).W).squaredNorm();
    }
    const double gap = global_norm2 > 0 ? std::sqrt(diff2 / global_norm2) : std::sqrt(diff2);
    emit(std::string(strategy_name(strategy)), gap,
         evaluate(state.stack(), scenario.universe, all, neighbors, eval));
  }
  csv.close();

  json summary = summary_of("merge-bench", config);
  summary["results"] = {{"n_edits", n_edits}, {"strategies", std::move(per_strategy)}};
  finish(dir, summary);
  return summary;
}

json run_overlap(const RunConfig& config, const fs::path& out_dir) {
  if (config.stack_depth != 1) {
    throw ConfigError("invalid config: overlap runs on a single-layer model (stack_depth = 1)");
  }
  const Scenario scenario = make_scenario(config.scenario());
  FactSampler sampler = scenario.request_sampler(config.seed);
  const auto requests = sampler.sample_requests(config.edits_per_client, 1, 0).front();
  const SyntheticLayer& layer = scenario.stack.layer(0);
  const Matrix prior = base_priors(scenario.stack, config.prior()).front();

  const OverlapTrace trace = overlap_run(layer, scenario.universe, requests, config.rounds, prior);
  const OverlapDetection detected =
      overlap_detect(trace.residual_norms, config.theta, config.theta_relative);
  const OverlapDetection predicted =
      overlap_detect(trace.recurrence_norms, config.theta, config.theta_relative);

  const fs::path dir = command_dir(out_dir, "overlap");
  CsvWriter csv(dir / "results.csv",
                {"step", "residual_norm", "recurrence_norm", "abs_deviation", "below_threshold"});
  for (std::size_t t = 0; t < trace.residual_norms.size(); ++t) {
    const double r = trace.residual_norms[t];
    csv.row({t, r, trace.recurrence_norms[t], std::abs(r - trace.recurrence_norms[t]),
             r < detected.threshold});
  }
  csv.close();

  json summary = summary_of("overlap", config);
  summary["results"] = {{"repetitions", config.rounds},
                        {"n_edits", requests.size()},
                        {"max_deviation", trace.max_deviation},
                        {"strictly_decreasing", strictly_decreasing(trace.residual_norms)},
                        {"threshold", detected.threshold},
                        {"crossing_index", optional_index(detected.index)},
                        {"predicted_crossing_index", optional_index(predicted.index)},
                        {"crossing_matches_prediction", detected.index == predicted.index}};
  finish(dir, summary);
  return summary;
}

json run_conflict(const RunConfig& config, const fs::path& out_dir) {
  ConflictStudyConfig c;
  c.scenario = config.scenario();
  c.rounds = config.rounds;
  c.groups_per_round = config.groups_per_round;
  c.n_clients = config.n_clients;
  c.augmentation = config.augmentation_factor;
  c.policy = config.policy();
  c.eval = config.eval();
  c.seed = config.seed;
  const ConflictStudyResult result = conflict_study(c);

  const fs::path dir = command_dir(out_dir, "conflict");
  CsvWriter csv(dir / "results.csv",
                {"round", "group", "winner_client", "loser_client", "detected", "pre_winner_top1",
                 "post_winner_top1", "pre_margin", "post_margin", "post_loser_prob"});
  std::size_t detected = 0;
  for (const auto& o : result.outcomes) {
    csv.row({o.round, o.group, o.winner_client, o.loser_client, o.detected, o.pre_winner_top1,
             o.post_winner_top1, o.pre_margin, o.post_margin, o.post_loser_prob});
    detected += o.detected ? 1 : 0;
  }
  csv.close();

  json summary = summary_of("conflict", config);
  summary["results"] = {{"n_groups", result.outcomes.size()},
                        {"n_detected", detected},
                        {"pre_winner_rate", result.pre_winner_rate},
                        {"post_winner_rate", result.post_winner_rate},
                        {"base_preservation", result.base_preservation},
                        {"overwrites", result.overwrites},
                        {"policy", policy_name(c.policy)}};
  finish(dir, summary);
  return summary;
}

json run_forgetting(const RunConfig& config, const fs::path& out_dir) {
  const fs::path dir = command_dir(out_dir, "forgetting");
  CsvWriter csv(dir / "results.csv", {"seed", "covariance", "round", "ES", "PS", "NS", "Score",
                                      "EA", "PA", "NA", "AccScore"});
  const auto row = [&](std::uint64_t seed, const char* mode, std::size_t round, const Metrics& m) {
    csv.row({seed, mode, round, m.ES, m.PS, m.NS, m.Score, m.EA, m.PA, m.NA, m.AccScore});
  };

  json seeds = json::array();
  std::size_t dynamic_not_worse = 0;
  std::size_t immutable_dropped = 0;
  for (std::uint64_t seed : config.seeds) {
    json entry{{"seed", seed}};
    double after[2] = {0.0, 0.0};
    for (int dynamic = 0; dynamic < 2; ++dynamic) {
      ForgettingConfig f;
      f.scenario = config.scenario();
      f.scenario.seed = seed;
      f.n_old = config.n_old;
      f.rounds = config.rounds;
      f.edits_per_round = config.edits_per_round;
      f.n_clients = config.n_clients;
      f.dynamic_covariance = dynamic == 1;
      f.beta0 = config.beta0;
      f.beta1 = config.beta1;
      f.eval = config.eval();
      f.seed = seed;
      const ForgettingResult r = forgetting_experiment(f);

      const char* mode = dynamic ? "dynamic" : "immutable";
      row(seed, mode, 0, r.before);
      for (std::size_t i = 0; i < r.per_round.size(); ++i) row(seed, mode, i + 1, r.per_round[i]);
      after[dynamic] = r.after.AccScore;
      entry["before_acc_score"] = r.before.AccScore;
      entry[std::string(mode) + "_after_acc_score"] = r.after.AccScore;
      if (!dynamic && r.after.AccScore < r.before.AccScore) ++immutable_dropped;
    }
    if (after[1] >= after[0]) ++dynamic_not_worse;
    seeds.push_back(std::move(entry));
  }
  csv.close();

  json summary = summary_of("forgetting", config);
  summary["results"] = {{"seeds", std::move(seeds)},
                        {"n_seeds", config.seeds.size()},
                        {"seeds_dynamic_not_worse", dynamic_not_worse},
                        {"seeds_immutable_dropped", immutable_dropped}};
  finish(dir, summary);
  return summary;
}

json run_privacy(const RunConfig& config, const fs::path& out_dir) {
  const fs::path dir = command_dir(out_dir, "privacy");
  const std::vector<Eigen::Index> dims{8, 32, config.d_key};

  CsvWriter csv(dir / "results.csv", {"case", "d", "E", "gram_relative_error", "key_distance"});
  double max_error = 0.0;
  double min_key_distance = std::numeric_limits<double>::infinity();
  std::size_t refused = 0, attempted_single = 0;
  for (std::size_t i = 0; i < config.privacy_cases; ++i) {
    const Eigen::Index d = dims[i % dims.size()];
    const auto E = static_cast<Eigen::Index>(config.privacy_E[(i / dims.size()) % config.privacy_E.size()]);
    Rng rng(derive_seed({tag(SeedDomain::kPrivacyKeys), config.seed, i}));
    const Matrix keys = gaussian_matrix<double>(d, E, rng);
    if (E < 2) {
      ++attempted_single;
      try {
        orthogonal_confusion(keys, derive_seed({config.seed, i}));
      } catch (const InvalidArgument&) {
        ++refused;
      }
      continue;
    }
    const Confusion c = orthogonal_confusion(keys, derive_seed({config.seed, i}));
    const double rel = c.report.gram_norm > 0 ? c.report.gram_distance / c.report.gram_norm
                                              : c.report.gram_distance;
    max_error = std::max(max_error, rel);
    min_key_distance = std::min(min_key_distance, c.report.key_distance);
    csv.row({i, d, E, rel, c.report.key_distance});
  }
  csv.close();

  bool single_refused = false;
  try {
    orthogonal_confusion(Matrix::Ones(config.d_key, 1), config.seed);
  } catch (const InvalidArgument&) {
    single_refused = true;
  }

  const auto sweep = gram_ambiguity_sweep(config.d_key, config.privacy_E, config.seeds, config.seed);
  CsvWriter sweep_csv(dir / "ambiguity.csv", {"E", "n_seeds", "min_key_distance",
                                              "median_key_distance", "max_gram_error"});
  json sweep_json = json::array();
  for (const auto& r : sweep) {
    sweep_csv.row({r.E, r.n_seeds, r.min_key_distance, r.median_key_distance, r.max_gram_error});
    sweep_json.push_back({{"E", r.E},
                          {"min_key_distance", r.min_key_distance},
                          {"median_key_distance", r.median_key_distance},
                          {"max_gram_error", r.max_gram_error}});
  }
  sweep_csv.close();

  json summary = summary_of("privacy", config);
  summary["results"] = {{"n_cases", config.privacy_cases},
                        {"max_gram_relative_error", max_error},
                        {"min_key_distance", std::isfinite(min_key_distance) ? json(min_key_distance) : json()},
                        {"single_column_refused", single_refused && refused == attempted_single},
                        {"ambiguity", std::move(sweep_json)}};
  finish(dir, summary);
  return summary;
}

json run_packet(const RunConfig& config, const PacketArgs& args, const fs::path& out_dir,
                std::ostream& out) {
  const fs::path dir = command_dir(out_dir, "packet");
  const fs::path file = args.file.empty() ? dir / "packet.cedp" : args.file;

  EditPacket packet;
  std::string action;
  switch (args.action) {
    case PacketAction::kEncode: {
      action = "encode";
      const Scenario scenario = make_scenario(config.scenario());
      FactSampler sampler = scenario.request_sampler(config.seed);
      const auto per_client =
          sampler.sample_requests(config.edits_per_client * (args.client_id + 1ull),
                                  args.client_id + 1ull, 0);
      const auto priors = base_priors(scenario.stack, config.prior());
      packet = client_get_delta_and_kkt(scenario.stack, scenario.universe,
                                        per_client[args.client_id], priors, args.client_id, 0);
      write_packet_file(file, packet);
      break;
    }
    case PacketAction::kDecode:
      action = "decode";
      packet = read_packet_file(file);
      validate_packet(packet);
      break;
    case PacketAction::kInspect:
      action = "inspect";
      packet = read_packet_file(file);
      break;
  }

  out << "CEDP v" << kWireVersion << "  client " << packet.client_id << "  round " << packet.round
      << "  layers " << packet.entries.size() << '\n';
  CsvWriter csv(dir / "results.csv",
                {"layer_id", "d_val", "d_key", "delta_norm", "gram_trace"});
  json layers = json::array();
  for (const auto& e : packet.entries) {
    out << "  layer " << e.layer_id << "  delta " << e.delta.rows() << "x" << e.delta.cols()
        << "  gram " << e.gram.rows() << "x" << e.gram.cols() << '\n';
    csv.row({e.layer_id, e.delta.rows(), e.delta.cols(), e.delta.norm(), e.gram.trace()});
    layers.push_back({{"layer_id", e.layer_id}, {"d_val", e.delta.rows()}, {"d_key", e.delta.cols()}});
  }
  csv.close();

  json summary = summary_of("packet", config);
  summary["results"] = {{"action", action},
                        {"file", file.filename().string()},
                        {"bytes", fs::file_size(file)},
                        {"client_id", packet.client_id},
                        {"round", packet.round},
                        {"layers", std::move(layers)}};
  finish(dir, summary);
  return summary;
}

json run_command(std::string_view command, const RunConfig& config, const fs::path& out_dir,
                 const PacketArgs& packet, std::ostream& out) {
  if (command == "gate") return run_gate(config, out_dir);
  if (command == "merge-bench") return run_merge_bench(config, out_dir);
  if (command == "overlap") return run_overlap(config, out_dir);
  if (command == "conflict") return run_conflict(config, out_dir);
  if (command == "forgetting") return run_forgetting(config, out_dir);
  if (command == "privacy") return run_privacy(config, out_dir);
  if (command == "packet") return run_packet(config, packet, out_dir, out);
  throw ConfigError("unknown command '" + std::string(command) + "'");
}

int exit_code_for_current_exception() noexcept {
  try {
    throw;
  } catch (const NumericalError&) {
    return kExitNumerical;
  } catch (const DecodeError&) {
    return kExitValidation;
  } catch (const InvalidArgument&) {
    return kExitValidation;
  } catch (const nlohmann::json::exception&) {
    return kExitValidation;
  } catch (...) {
    return kExitIo;
  }
}

}  // namespace collabedit::cli
