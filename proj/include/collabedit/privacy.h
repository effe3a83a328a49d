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

#ifndef COLLABEDIT_PRIVACY_H_
#define COLLABEDIT_PRIVACY_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "collabedit/numkernel.h"

namespace collabedit {

struct GramReport {
  double gram_distance = 0.0;  // ‖K′K′ᵀ − K Kᵀ‖_F
  double gram_norm = 0.0;      // ‖K Kᵀ‖_F
  double key_distance = 0.0;   // ‖K′ − K‖_F
  std::size_t E = 0;
};

struct Confusion {
  Matrix keys;  // K′ = K Q
  GramReport report;
};

// Rotates the key columns by a seeded orthogonal Q: K′ has the same Gram as K
// but different keys. Refuses a single column, where only sign flips exist.
Confusion orthogonal_confusion(const Matrix& keys, std::uint64_t seed);

struct AmbiguityRow {
  std::size_t E = 0;
  std::size_t n_seeds = 0;
  double min_key_distance = 0.0;     // relative to ‖K‖_F
  double median_key_distance = 0.0;  // relative to ‖K‖_F
  double max_gram_error = 0.0;       // relative to ‖K Kᵀ‖_F
};

// For every E, draws one unit-column key matrix (d x E) and confuses it once
// per seed. A geometric proxy for how far a Gram leaves the keys undetermined.
std::vector<AmbiguityRow> gram_ambiguity_sweep(Eigen::Index d, std::span<const std::size_t> E_values,
                                               std::span<const std::uint64_t> seeds,
                                               std::uint64_t key_seed = 0);

}  // namespace collabedit

#endif  // COLLABEDIT_PRIVACY_H_
