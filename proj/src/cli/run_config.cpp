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

#include "collabedit/cli/run_config.h"

#include <fstream>
#include <string>
#include <type_traits>

namespace collabedit::cli {
namespace {

using nlohmann::json;

// True if any number in v (recursively) is not an integer, or is negative
// when negatives are disallowed.
bool bad_integer(const json& v, bool allow_negative) {
  if (v.is_array()) {
    for (const auto& x : v)
      if (bad_integer(x, allow_negative)) return true;
    return false;
  }
  if (v.is_number_float()) return true;
  return !allow_negative && v.is_number_integer() && !v.is_number_unsigned() &&
         v.get<std::int64_t>() < 0;
}

template <typename T>
struct element {
  using type = T;
};
template <typename T>
struct element<std::vector<T>> {
  using type = T;
};

template <typename T>
void read(const json& j, const char* key, T& out) {
  using E = typename element<T>::type;
  if constexpr (std::is_integral_v<E> && !std::is_same_v<E, bool>) {
    if (bad_integer(j.at(key), std::is_signed_v<E>)) {
      throw ConfigError(std::string("config key '") + key + "' must be a" +
                        (std::is_signed_v<E> ? "n integer" : " non-negative integer"));
    }
  }
  try {
    j.at(key).get_to(out);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config key '") + key + "': " + e.what());
  }
}

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError("invalid config: " + message);
}

template <typename T>
bool all_positive(const std::vector<T>& v) {
  for (const auto& x : v)
    if (!(x > T(0))) return false;
  return true;
}

}  // namespace

void RunConfig::validate() const {
  require(d_key >= 1 && d_val >= 1, "d_key and d_val must be >= 1");
  require(codebook_size >= 2, "codebook_size must be >= 2");
  require(n_subjects >= 1 && n_relations >= 1, "n_subjects and n_relations must be >= 1");
  require(paraphrase_sigma >= 0.0, "paraphrase_sigma must be >= 0");
  require(n_init >= 1, "n_init must be >= 1");
  require(mu > 0.0, "mu must be positive");
  require(init_ridge > 0.0 && covariance_ridge >= 0.0, "init_ridge must be positive");
  require(stack_depth >= 1, "stack_depth must be >= 1");
  require(edit_range.size() == 2, "edit_range must be [first, last]");
  require(edit_range[0] <= edit_range[1] && edit_range[1] < stack_depth,
          "edit_range must satisfy first <= last < stack_depth");
  require(n_clients >= 1, "n_clients must be >= 1");
  require(edits_per_client >= 1, "edits_per_client must be >= 1");
  require(rounds >= 1, "rounds must be >= 1");
  require(beta0 > 0.0 && beta1 > 0.0, "beta0 and beta1 must be positive");
  require(tau > 0.0, "tau must be positive");
  require(n_paraphrases >= 1, "n_paraphrases must be >= 1");
  require(!sizes.empty() && all_positive(sizes), "sizes must be non-empty and positive");
  require(!seeds.empty(), "seeds must be non-empty");
  require(theta > 0.0, "theta must be positive");
  require(augmentation_factor >= 1, "augmentation_factor must be >= 1");
  require(groups_per_round >= 1, "groups_per_round must be >= 1");
  require(n_old >= 1 && edits_per_round >= 1, "n_old and edits_per_round must be >= 1");
  require(!privacy_E.empty() && all_positive(privacy_E), "privacy_E must be non-empty and positive");
  require(privacy_cases >= 1, "privacy_cases must be >= 1");
  require(!kappa.empty() && all_positive(kappa), "kappa must be non-empty and positive");

  try {
    scenario().features.validate();
    eval().validate();
    for (const auto& s : strategies()) validate_strategy(s);
    (void)prior();
    (void)policy();
  } catch (const ConfigError&) {
    throw;
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("invalid config: ") + e.what());
  }
}

ScenarioConfig RunConfig::scenario() const {
  ScenarioConfig s;
  s.features.d_key = d_key;
  s.features.d_val = d_val;
  s.features.universe_seed = seed;
  s.features.paraphrase_sigma = paraphrase_sigma;
  s.features.codebook_size = codebook_size;
  s.features.n_subjects = n_subjects;
  s.features.n_relations = n_relations;
  s.n_init = n_init;
  s.init.mu = mu;
  s.init.init_ridge = init_ridge;
  s.init.covariance_ridge = covariance_ridge;
  s.stack_depth = stack_depth;
  if (edit_range.size() == 2) s.edit_range = EditRange{edit_range[0], edit_range[1]};
  s.seed = seed;
  return s;
}

EvalOptions RunConfig::eval() const {
  EvalOptions e;
  e.tau = tau;
  e.n_paraphrases = n_paraphrases;
  e.neighbors_per_edit = neighbors_per_edit;
  e.seed = seed;
  return e;
}

std::vector<MergeStrategy> RunConfig::strategies() const {
  const MergeStrategy ta = TaskArithmetic{lambda};
  const MergeStrategy ties = TiesMerging{keep_frac, lambda};
  if (strategy == "all") return {CollabEdit{}, SimpleAverage{}, ta, ties};
  if (strategy == "collabedit") return {CollabEdit{}};
  if (strategy == "sa") return {SimpleAverage{}};
  if (strategy == "ta") return {ta};
  if (strategy == "ties") return {ties};
  throw ConfigError("invalid config: unknown strategy '" + strategy +
                    "' (expected collabedit, sa, ta, ties or all)");
}

PriorMode RunConfig::prior() const {
  if (prior_mode == "covariance") return CovariancePrior{};
  if (prior_mode == "identity") return IdentityPrior{kappa};
  throw ConfigError("invalid config: unknown prior_mode '" + prior_mode +
                    "' (expected covariance or identity)");
}

ArrivalPolicy RunConfig::policy() const {
  if (arrival_policy == "fcfs") return ArrivalPolicy::kFcfs;
  if (arrival_policy == "fifo") return ArrivalPolicy::kFifo;
  throw ConfigError("invalid config: unknown arrival_policy '" + arrival_policy +
                    "' (expected fcfs or fifo)");
}

nlohmann::json to_json(const RunConfig& c) {
  return json{
      {"seed", c.seed},
      {"d_key", c.d_key},
      {"d_val", c.d_val},
      {"codebook_size", c.codebook_size},
      {"n_subjects", c.n_subjects},
      {"n_relations", c.n_relations},
      {"paraphrase_sigma", c.paraphrase_sigma},
      {"n_init", c.n_init},
      {"mu", c.mu},
      {"init_ridge", c.init_ridge},
      {"covariance_ridge", c.covariance_ridge},
      {"stack_depth", c.stack_depth},
      {"edit_range", c.edit_range},
      {"n_clients", c.n_clients},
      {"edits_per_client", c.edits_per_client},
      {"rounds", c.rounds},
      {"strategy", c.strategy},
      {"lambda", c.lambda},
      {"keep_frac", c.keep_frac},
      {"prior_mode", c.prior_mode},
      {"kappa", c.kappa},
      {"beta0", c.beta0},
      {"beta1", c.beta1},
      {"tau", c.tau},
      {"n_paraphrases", c.n_paraphrases},
      {"neighbors_per_edit", c.neighbors_per_edit},
      {"sizes", c.sizes},
      {"seeds", c.seeds},
      {"theta", c.theta},
      {"theta_relative", c.theta_relative},
      {"augmentation_factor", c.augmentation_factor},
      {"groups_per_round", c.groups_per_round},
      {"arrival_policy", c.arrival_policy},
      {"n_old", c.n_old},
      {"edits_per_round", c.edits_per_round},
      {"privacy_E", c.privacy_E},
      {"privacy_cases", c.privacy_cases},
  };
}

RunConfig config_from_json(const nlohmann::json& input) {
  if (!input.is_object()) throw ConfigError("invalid config: top level must be a JSON object");
  json j = to_json(RunConfig{});
  for (const auto& [key, value] : input.items()) {
    if (!j.contains(key)) throw ConfigError("invalid config: unknown key '" + key + "'");
    j[key] = value;
  }

  RunConfig c;
  read(j, "seed", c.seed);
  read(j, "d_key", c.d_key);
  read(j, "d_val", c.d_val);
  read(j, "codebook_size", c.codebook_size);
  read(j, "n_subjects", c.n_subjects);
  read(j, "n_relations", c.n_relations);
  read(j, "paraphrase_sigma", c.paraphrase_sigma);
  read(j, "n_init", c.n_init);
  read(j, "mu", c.mu);
  read(j, "init_ridge", c.init_ridge);
  read(j, "covariance_ridge", c.covariance_ridge);
  read(j, "stack_depth", c.stack_depth);
  read(j, "edit_range", c.edit_range);
  read(j, "n_clients", c.n_clients);
  read(j, "edits_per_client", c.edits_per_client);
  read(j, "rounds", c.rounds);
  read(j, "strategy", c.strategy);
  read(j, "lambda", c.lambda);
  read(j, "keep_frac", c.keep_frac);
  read(j, "prior_mode", c.prior_mode);
  read(j, "kappa", c.kappa);
  read(j, "beta0", c.beta0);
  read(j, "beta1", c.beta1);
  read(j, "tau", c.tau);
  read(j, "n_paraphrases", c.n_paraphrases);
  read(j, "neighbors_per_edit", c.neighbors_per_edit);
  read(j, "sizes", c.sizes);
  read(j, "seeds", c.seeds);
  read(j, "theta", c.theta);
  read(j, "theta_relative", c.theta_relative);
  read(j, "augmentation_factor", c.augmentation_factor);
  read(j, "groups_per_round", c.groups_per_round);
  read(j, "arrival_policy", c.arrival_policy);
  read(j, "n_old", c.n_old);
  read(j, "edits_per_round", c.edits_per_round);
  read(j, "privacy_E", c.privacy_E);
  read(j, "privacy_cases", c.privacy_cases);
  c.validate();
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

void apply_override(nlohmann::json& j, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw ConfigError("override '" + std::string(assignment) + "' is not of the form key=value");
  }
  const std::string key(assignment.substr(0, eq));
  const std::string text(assignment.substr(eq + 1));
  json value = json::parse(text, nullptr, /*allow_exceptions=*/false);
  if (value.is_discarded()) value = text;
  j[key] = std::move(value);
}

}  // namespace collabedit::cli
