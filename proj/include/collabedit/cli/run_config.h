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

#ifndef COLLABEDIT_CLI_RUN_CONFIG_H_
#define COLLABEDIT_CLI_RUN_CONFIG_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "collabedit/collab.h"
#include "collabedit/errors.h"
#include "collabedit/eval.h"
#include "collabedit/interventions.h"
#include "collabedit/scenario.h"

namespace collabedit::cli {

// Invalid configuration file, key or value.
class ConfigError : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

// Every knob of every command. Serialized as one flat JSON object whose keys
// are the field names below.
struct RunConfig {
  std::uint64_t seed = 0;

  // Universe and model.
  std::int64_t d_key = 256;
  std::int64_t d_val = 256;
  std::int64_t codebook_size = 256;
  std::int64_t n_subjects = 100000;
  std::int64_t n_relations = 32;
  double paraphrase_sigma = 0.05;
  std::size_t n_init = 512;
  double mu = 234.375;
  double init_ridge = 1e-6;
  double covariance_ridge = 1e-8;
  std::size_t stack_depth = 1;
  std::vector<std::size_t> edit_range{0, 0};

  // Clients and merging.
  std::size_t n_clients = 4;
  std::size_t edits_per_client = 64;
  std::size_t rounds = 20;
  std::string strategy = "all";  // collabedit | sa | ta | ties | all
  double lambda = 1.0;
  double keep_frac = 0.2;
  std::string prior_mode = "covariance";  // covariance | identity
  std::vector<double> kappa{1e3};
  double beta0 = 1.0;
  double beta1 = 1.0;

  // Evaluation.
  double tau = 0.1;
  std::size_t n_paraphrases = 2;
  std::size_t neighbors_per_edit = 4;

  // Sweeps.
  std::vector<std::size_t> sizes{64, 128, 256, 512, 1024};
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};

  // Interventions.
  double theta = 0.01;
  bool theta_relative = true;
  std::size_t augmentation_factor = 8;
  std::size_t groups_per_round = 10;
  std::string arrival_policy = "fcfs";  // fcfs | fifo
  std::size_t n_old = 20;
  std::size_t edits_per_round = 20;

  // Privacy.
  std::vector<std::size_t> privacy_E{2, 4, 8, 16, 32, 64};
  std::size_t privacy_cases = 1000;

  // Throws ConfigError on the first violated constraint.
  void validate() const;

  ScenarioConfig scenario() const;
  EvalOptions eval() const;
  // The configured strategies; "all" expands to every strategy in a fixed order.
  std::vector<MergeStrategy> strategies() const;
  PriorMode prior() const;
  ArrivalPolicy policy() const;
};

nlohmann::json to_json(const RunConfig& config);

// Keys absent from `j` keep their defaults; unknown keys are rejected.
RunConfig config_from_json(const nlohmann::json& j);
RunConfig load_config(const std::filesystem::path& path);

// Applies "key=value". The value is parsed as JSON when possible and taken as a
// string otherwise, so both `strategy=ta` and `sizes=[64,128]` work.
void apply_override(nlohmann::json& j, std::string_view assignment);

}  // namespace collabedit::cli

#endif  // COLLABEDIT_CLI_RUN_CONFIG_H_
