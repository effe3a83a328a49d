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

#include "collabedit/scenario.h"

#include <string>
#include <utility>

namespace collabedit {

FactSampler Scenario::request_sampler(std::uint64_t seed) const {
  FactSampler sampler(universe.config, derive_seed({tag(SeedDomain::kRequests), seed}));
  sampler.reserve(base_facts);
  return sampler;
}

Scenario make_scenario(const ScenarioConfig& cfg) {
  Universe universe(cfg.features);
  if (cfg.stack_depth == 0) throw InvalidArgument("scenario: stack_depth must be >= 1");

  if (cfg.stack_depth == 1) {
    if (cfg.edit_range.first != 0 || cfg.edit_range.last != 0) {
      throw InvalidArgument("scenario: a single-layer model can only edit layer 0");
    }
    InitializedLayer init = init_layer(universe, cfg.n_init, cfg.seed, cfg.init);
    std::vector<Fact> facts = init.layer.base_facts;
    Matrix inputs = std::move(init.base_keys);
    return Scenario{std::move(universe), LayerStack::memory(std::move(init.layer)),
                    std::move(facts), std::move(inputs)};
  }

  const auto& f = cfg.features;
  if (f.d_key != f.d_val) {
    throw InvalidArgument("scenario: residual stacks need d_key == d_val (got " +
                          std::to_string(f.d_key) + " and " + std::to_string(f.d_val) + ")");
  }
  if (!(cfg.init.mu > 0.0)) throw InvalidArgument("scenario: mu must be positive");

  FactSampler sampler(f, derive_seed({tag(SeedDomain::kBaseFacts), cfg.seed}));
  std::vector<Fact> facts = sampler.sample_facts(cfg.n_init);
  const Matrix inputs = universe.fact_keys(facts);
  const Matrix values = universe.fact_values(facts);

  const Eigen::Index d = f.d_key;
  std::vector<SyntheticLayer> layers(cfg.stack_depth);
  for (auto& layer : layers) {
    layer.W = Matrix::Zero(d, d);
    layer.C0 = Matrix::Identity(d, d);
    layer.mu = cfg.init.mu;
    layer.base_facts = facts;
  }
  LayerStack full = LayerStack::residual(std::move(layers), EditRange{0, cfg.stack_depth - 1});
  const std::vector<Matrix> ridge(cfg.stack_depth,
                                  cfg.init.init_ridge * Matrix::Identity(d, d));
  edit_stack_in_place(full, inputs, values, ridge);

  std::vector<SyntheticLayer> trained = full.layers();
  for (std::size_t l = 0; l < trained.size(); ++l) {
    trained[l].C0 = covariance_statistic(full.keys_at(l, inputs), cfg.init.mu,
                                         cfg.init.covariance_ridge);
  }
  return Scenario{std::move(universe), LayerStack::residual(std::move(trained), cfg.edit_range),
                  std::move(facts), inputs};
}

}  // namespace collabedit
