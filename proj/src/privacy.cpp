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

#include "collabedit/privacy.h"

#include <algorithm>
#include <string>

#include "collabedit/errors.h"
#include "collabedit/random.h"

namespace collabedit {

Confusion orthogonal_confusion(const Matrix& keys, std::uint64_t seed) {
  if (keys.cols() < 2) {
    throw InvalidArgument(
        "orthogonal_confusion: need at least 2 key columns; with one key the only orthogonal "
        "maps are ±1, so the Gram pins the key down up to sign");
  }
  const Matrix q = random_orthogonal(keys.cols(), seed);
  Confusion out;
  out.keys = keys * q;
  const Matrix g = gram(keys);
  out.report.gram_distance = (gram(out.keys) - g).norm();
  out.report.gram_norm = g.norm();
  out.report.key_distance = (out.keys - keys).norm();
  out.report.E = static_cast<std::size_t>(keys.cols());
  return out;
}

std::vector<AmbiguityRow> gram_ambiguity_sweep(Eigen::Index d, std::span<const std::size_t> E_values,
                                               std::span<const std::uint64_t> seeds,
                                               std::uint64_t key_seed) {
  if (d < 1) throw InvalidArgument("gram_ambiguity_sweep: d must be positive");
  if (seeds.empty()) throw InvalidArgument("gram_ambiguity_sweep: no seeds");
  std::vector<AmbiguityRow> rows;
  for (std::size_t e : E_values) {
    Matrix keys(d, static_cast<Eigen::Index>(e));
    for (std::size_t j = 0; j < e; ++j) {
      keys.col(static_cast<Eigen::Index>(j)) =
          unit_gaussian_vector(d, derive_seed({tag(SeedDomain::kPrivacyKeys), key_seed, e, j}));
    }
    const double key_norm = keys.norm();
    std::vector<double> distances;
    AmbiguityRow row;
    row.E = e;
    row.n_seeds = seeds.size();
    for (std::uint64_t seed : seeds) {
      const Confusion c = orthogonal_confusion(keys, seed);
      distances.push_back(c.report.key_distance / key_norm);
      row.max_gram_error = std::max(row.max_gram_error, c.report.gram_distance / c.report.gram_norm);
    }
    std::sort(distances.begin(), distances.end());
    row.min_key_distance = distances.front();
    const std::size_t n = distances.size();
    row.median_key_distance =
        n % 2 ? distances[n / 2] : 0.5 * (distances[n / 2 - 1] + distances[n / 2]);
    rows.push_back(row);
  }
  return rows;
}

}  // namespace collabedit
