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

#ifndef COLLABEDIT_SCENARIO_H_
#define COLLABEDIT_SCENARIO_H_

#include <cstddef>
#include <cstdint>
#include <vector>

#include "collabedit/editor.h"
#include "collabedit/knowledge_model.h"

namespace collabedit {

struct ScenarioConfig {
  FeatureMapConfig features;
  std::size_t n_init = 512;
  LayerInitOptions init;
  std::size_t stack_depth = 1;
  EditRange edit_range{0, 0};
  std::uint64_t seed = 0;
};

// A universe plus a model that already stores its base facts.
struct Scenario {
  Universe universe;
  LayerStack stack;
  std::vector<Fact> base_facts;
  Matrix base_inputs;

  // A sampler that will never hand out a base-fact (subject, relation).
  FactSampler request_sampler(std::uint64_t seed) const;
};

// Depth 1 builds a plain key→value memory via init_layer. Deeper stacks are
// residual (d_key must equal d_val): weights start at zero, the base facts are
// written in with the spreading editor under a ridge prior, and every layer's
// C0 is then taken from the keys it sees for those facts.
Scenario make_scenario(const ScenarioConfig& cfg);

}  // namespace collabedit

#endif  // COLLABEDIT_SCENARIO_H_
