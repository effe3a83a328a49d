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

#ifndef COLLABEDIT_RANDOM_H_
#define COLLABEDIT_RANDOM_H_

#include <cstdint>
#include <initializer_list>
#include <random>

#include <Eigen/Core>

namespace collabedit {

// splitmix64 finalizer; used to derive independent stream seeds.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Folds a list of integers (domain tag first, by convention) into one seed.
constexpr std::uint64_t derive_seed(std::initializer_list<std::uint64_t> parts) noexcept {
  std::uint64_t h = 0x243f6a8885a308d3ULL;
  for (std::uint64_t p : parts) h = mix64(h ^ mix64(p));
  return h;
}

// Domain tags keep the different random streams of the library apart.
enum class SeedDomain : std::uint64_t {
  kKey = 1,
  kValue = 2,
  kParaphrase = 3,
  kAugmentation = 4,
  kBaseFacts = 5,
  kRequests = 6,
  kOrthogonal = 7,
  kPrivacyKeys = 8,
  kNeighbors = 9,
  kConflict = 10,
};

constexpr std::uint64_t tag(SeedDomain d) noexcept { return static_cast<std::uint64_t>(d); }

using Rng = std::mt19937_64;

template <typename Scalar = double>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> gaussian_matrix(Eigen::Index rows,
                                                                      Eigen::Index cols,
                                                                      Rng& rng) {
  std::normal_distribution<Scalar> normal(Scalar(0), Scalar(1));
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> m(rows, cols);
  // Fill column by column so the stream order does not depend on storage order.
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = normal(rng);
  return m;
}

// A Gaussian direction scaled to unit Euclidean norm.
template <typename Scalar = double>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> unit_gaussian_vector(Eigen::Index n, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<Scalar> normal(Scalar(0), Scalar(1));
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = normal(rng);
  const Scalar norm = v.norm();
  if (norm == Scalar(0)) {
    v.setZero();
    v(0) = Scalar(1);
    return v;
  }
  return v / norm;
}

}  // namespace collabedit

#endif  // COLLABEDIT_RANDOM_H_
