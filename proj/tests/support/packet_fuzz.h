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

#ifndef COLLABEDIT_TESTS_SUPPORT_PACKET_FUZZ_H_
#define COLLABEDIT_TESTS_SUPPORT_PACKET_FUZZ_H_

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>
#include <random>
#include <vector>

#include "collabedit/collab.h"
#include "collabedit/random.h"

namespace collabedit::testing {

// Raw bit patterns mixed into fuzz matrices alongside ordinary Gaussians.
inline double special_double(Rng& rng) {
  static constexpr double kSpecial[] = {0.0,
                                        -0.0,
                                        1.0,
                                        -1.0,
                                        std::numeric_limits<double>::min(),
                                        std::numeric_limits<double>::denorm_min(),
                                        -std::numeric_limits<double>::denorm_min(),
                                        std::numeric_limits<double>::max(),
                                        std::numeric_limits<double>::lowest(),
                                        std::numeric_limits<double>::epsilon()};
  std::uniform_int_distribution<int> pick(0, 2);
  if (pick(rng) == 0) {
    std::uniform_int_distribution<std::size_t> idx(0, std::size(kSpecial) - 1);
    return kSpecial[idx(rng)];
  }
  // Any finite bit pattern.
  for (;;) {
    const double v = std::bit_cast<double>(rng());
    if (std::isfinite(v)) return v;
  }
}

inline Matrix fuzz_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  Matrix m = gaussian_matrix<double>(rows, cols, rng);
  std::bernoulli_distribution special(0.1);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i)
      if (special(rng)) m(i, j) = special_double(rng);
  return m;
}

// Random well-formed packet: up to 4 layers of up to 12x12 blocks, including
// empty and zero-dimension entries.
inline EditPacket random_packet(std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_int_distribution<std::uint32_t> u32;
  std::uniform_int_distribution<int> n_layers(0, 4);
  std::uniform_int_distribution<int> dim(0, 12);
  std::uniform_int_distribution<int> layer(0, 65535);
  EditPacket p;
  p.client_id = u32(rng);
  p.round = u32(rng);
  const int n = n_layers(rng);
  for (int l = 0; l < n; ++l) {
    PacketEntry e;
    e.layer_id = static_cast<std::uint16_t>(layer(rng));
    const int d_val = dim(rng);
    const int d_key = dim(rng);
    e.delta = fuzz_matrix(d_val, d_key, rng);
    e.gram = fuzz_matrix(d_key, d_key, rng);
    p.entries.push_back(std::move(e));
  }
  return p;
}

inline bool same_bits(const Matrix& a, const Matrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         (a.size() == 0 ||
          std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0);
}

inline bool same_bits(const EditPacket& a, const EditPacket& b) {
  if (a.client_id != b.client_id || a.round != b.round || a.entries.size() != b.entries.size()) {
    return false;
  }
  for (std::size_t i = 0; i < a.entries.size(); ++i) {
    const auto& x = a.entries[i];
    const auto& y = b.entries[i];
    if (x.layer_id != y.layer_id || !same_bits(x.delta, y.delta) || !same_bits(x.gram, y.gram)) {
      return false;
    }
  }
  return true;
}

}  // namespace collabedit::testing

#endif  // COLLABEDIT_TESTS_SUPPORT_PACKET_FUZZ_H_
