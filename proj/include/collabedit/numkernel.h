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

#ifndef COLLABEDIT_NUMKERNEL_H_
#define COLLABEDIT_NUMKERNEL_H_

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/LU>
#include <Eigen/QR>

#include "collabedit/errors.h"
#include "collabedit/random.h"

namespace collabedit {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Matrix = MatrixX<double>;
using Vector = VectorX<double>;

// Relative asymmetry tolerated by solve_spd.
inline constexpr double kSymmetryTolerance = 1e-9;
// A pivot below this fraction of max|diag| is treated as zero.
inline constexpr double kSingularityThreshold = 1e-12;

inline std::string shape_string(Eigen::Index rows, Eigen::Index cols) {
  return std::to_string(rows) + "x" + std::to_string(cols);
}

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& a) {
  return a.allFinite();
}

template <typename DerivedA, typename DerivedB>
MatrixX<typename DerivedA::Scalar> matmul(const Eigen::MatrixBase<DerivedA>& a,
                                          const Eigen::MatrixBase<DerivedB>& b) {
  if (a.cols() != b.rows()) {
    throw DimensionMismatch("matmul: cannot multiply " + shape_string(a.rows(), a.cols()) +
                            " by " + shape_string(b.rows(), b.cols()));
  }
  return a * b;
}

template <typename Derived>
typename Derived::RealScalar frobenius_norm(const Eigen::MatrixBase<Derived>& a) {
  return a.norm();
}

// ‖a − b‖_F / ‖b‖_F, or the absolute distance when b is zero.
template <typename DerivedA, typename DerivedB>
typename DerivedA::RealScalar relative_error(const Eigen::MatrixBase<DerivedA>& a,
                                             const Eigen::MatrixBase<DerivedB>& b) {
  const auto denom = b.norm();
  const auto diff = (a - b).norm();
  return denom > 0 ? diff / denom : diff;
}

// K·Kᵀ, assembled from one triangle so the result is exactly symmetric.
template <typename Derived>
MatrixX<typename Derived::Scalar> gram(const Eigen::MatrixBase<Derived>& k) {
  using Scalar = typename Derived::Scalar;
  MatrixX<Scalar> g = MatrixX<Scalar>::Zero(k.rows(), k.rows());
  if (k.cols() == 0) return g;
  g.template selfadjointView<Eigen::Lower>().rankUpdate(k.derived().eval());
  return g.template selfadjointView<Eigen::Lower>();
}

template <typename Derived>
bool is_symmetric(const Eigen::MatrixBase<Derived>& a,
                  typename Derived::RealScalar rel_tol = kSymmetryTolerance) {
  if (a.rows() != a.cols()) return false;
  const auto scale = a.norm();
  return (a - a.transpose()).norm() <= rel_tol * (scale > 0 ? scale : 1);
}

// Solves a·X = b for symmetric positive-definite a. Tries a Cholesky
// factorization first and falls back to full-pivoting LU; no inverse is ever
// formed.
template <typename DerivedA, typename DerivedB>
MatrixX<typename DerivedA::Scalar> solve_spd(const Eigen::MatrixBase<DerivedA>& a,
                                             const Eigen::MatrixBase<DerivedB>& b) {
  using Scalar = typename DerivedA::Scalar;
  using RealScalar = typename DerivedA::RealScalar;
  if (a.rows() != a.cols()) {
    throw DimensionMismatch("solve_spd: matrix is not square (" + shape_string(a.rows(), a.cols()) +
                            ")");
  }
  if (b.rows() != a.rows()) {
    throw DimensionMismatch("solve_spd: right-hand side has " + std::to_string(b.rows()) +
                            " rows, expected " + std::to_string(a.rows()));
  }
  if (!a.allFinite() || !b.allFinite()) {
    throw InvalidArgument("solve_spd: non-finite input");
  }
  if (a.rows() == 0) return MatrixX<Scalar>(b);
  if (!is_symmetric(a)) {
    throw InvalidArgument("solve_spd: matrix is not symmetric within relative tolerance 1e-9");
  }

  const MatrixX<Scalar> dense = a;
  const RealScalar threshold =
      RealScalar(kSingularityThreshold) * dense.diagonal().cwiseAbs().maxCoeff();

  Eigen::LLT<MatrixX<Scalar>> llt(dense);
  if (llt.info() == Eigen::Success) {
    const auto pivots = llt.matrixLLT().diagonal().cwiseAbs2();
    if (threshold > 0 && (pivots.array() >= threshold).all()) return llt.solve(b);
  }

  Eigen::FullPivLU<MatrixX<Scalar>> lu(dense);
  const auto u_diag = lu.matrixLU().diagonal().cwiseAbs();
  for (Eigen::Index i = 0; i < u_diag.size(); ++i) {
    if (!(u_diag(i) >= threshold) || u_diag(i) == RealScalar(0)) {
      throw SingularMatrix(static_cast<std::size_t>(i),
                           "solve_spd: matrix is singular to working precision at pivot " +
                               std::to_string(i));
    }
  }
  return lu.solve(b);
}

// Haar-distributed orthogonal matrix: QR of a seeded Gaussian matrix with the
// signs of R's diagonal folded into Q.
template <typename Scalar = double>
MatrixX<Scalar> random_orthogonal(Eigen::Index n, std::uint64_t seed) {
  if (n < 1) throw InvalidArgument("random_orthogonal: n must be at least 1");
  Rng rng(derive_seed({tag(SeedDomain::kOrthogonal), seed}));
  const MatrixX<Scalar> g = gaussian_matrix<Scalar>(n, n, rng);
  Eigen::HouseholderQR<MatrixX<Scalar>> qr(g);
  MatrixX<Scalar> q = qr.householderQ();
  const auto r_diag = qr.matrixQR().diagonal();
  for (Eigen::Index j = 0; j < n; ++j) {
    if (r_diag(j) < Scalar(0)) q.col(j) *= Scalar(-1);
  }
  return q;
}

}  // namespace collabedit

#endif  // COLLABEDIT_NUMKERNEL_H_
