/*
 Copyright 2026 The jdmpc Authors

 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      https://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/

#pragma once

#include "jdmpc/common.hpp"

#include <iosfwd>
#include <memory>
#include <optional>

namespace jdmpc
{

/**
 * @brief Convex quadratic program
 *
 *   min  1/2 z' H z + g' z + constant
 *   s.t. E z = e,  G z <= h
 *
 * H must be positive definite on the null space of E.
 */
struct QpProblem
{
  Matrix H;
  Vector g;
  Matrix E;
  Vector e;
  Matrix G;
  Vector h;
  double constant = 0.0;

  int dim() const { return static_cast<int>(H.rows()); }
  double objective(const Vector &z) const { return 0.5 * z.dot(H * z) + g.dot(z) + constant; }
  /// Throws DimensionError on inconsistent shapes or a non-symmetric H.
  void validate() const;
};

enum class QpStatus
{
  optimal,
  infeasible,
  degenerate_feasible_point, ///< null(E) = {0}: the unique equality solution is returned
};

enum class Infeasibility
{
  none,
  equalities,
  inequalities,
};

/// Infinity-norm KKT residuals. Stationarity and complementarity are scaled by the problem data.
struct KktResiduals
{
  double stationarity = 0.0;
  double primal_equality = 0.0;
  double primal_inequality = 0.0; ///< max(G z - h, 0)
  double complementarity = 0.0;
  double dual_sign = 0.0; ///< max(-mu, 0)

  double max() const;
};

struct QpSolution
{
  QpStatus status = QpStatus::infeasible;
  Infeasibility infeasibility = Infeasibility::none;
  Vector z;
  double objective = 0.0;
  Vector multipliers_eq;   ///< nu in H z + g + E' nu + G' mu = 0
  Vector multipliers_ineq; ///< mu >= 0
  KktResiduals kkt;
  int iterations = 0;
  int active_constraints = 0;
  std::string detail;

  bool ok() const { return status != QpStatus::infeasible; }
};

struct QpOptions
{
  double tol = 1e-8;                   ///< KKT certification tolerance
  double rank_threshold = 1e-10;       ///< relative pivot threshold for rank decisions on E
  double equality_consistency = 1e-6;  ///< E z = e residual above this is inconsistent
  double feasibility_tol = 1e-11;      ///< inner active-set violation tolerance (row-normalized)
  int max_iterations = 0;              ///< 0: automatic
};

/// Thrown when H is not positive definite on null(E).
class NonConvexError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

/**
 * @brief A QP family with fixed (H, E, G) and per-solve (g, e, h).
 *
 * Equalities are eliminated once: z = z_p + Z y with Z an orthonormal basis of
 * null(E) from a column-pivoted QR of E'. The reduced inequality problem is
 * solved with the Goldfarb-Idnani dual active-set method, which needs no
 * feasible starting point and certifies infeasibility.
 *
 * Solving is const and thread-safe.
 */
class ParametricQp
{
public:
  ParametricQp(Matrix H, Matrix E, Matrix G, QpOptions options = {});

  /// @p start, when given and consistent with E z = e, is used as the particular solution z_p.
  QpSolution solve(const Vector &g, const Vector &e, const Vector &h, const Vector *start = nullptr,
                   double constant = 0.0) const;

  int dim() const { return static_cast<int>(H_.rows()); }
  int null_space_dim() const { return static_cast<int>(Z_.cols()); }
  int equality_rank() const { return rank_; }
  const Matrix &null_basis() const { return Z_; }
  const QpOptions &options() const { return options_; }

  /// Recompute residuals of (z, nu, mu) from the original data.
  KktResiduals residuals(const Vector &z, const Vector &g, const Vector &e, const Vector &h, const Vector &nu,
                         const Vector &mu) const;

private:
  Vector particular(const Vector &e) const;
  Vector equality_multipliers(const Vector &rhs) const;

  Matrix H_;
  Matrix E_;
  Matrix G_;
  QpOptions options_;

  // E' P = Q R
  Matrix Qfull_;
  Matrix Rtop_; // rank x rank
  Eigen::VectorXi perm_;
  int rank_ = 0;

  Matrix Z_;
  Matrix Gr_;           // G Z
  Eigen::VectorXd row_norms_;
  Matrix L_;            // chol(Z' H Z)
  Matrix J0_;           // L^{-T}
};

QpSolution solve_qp(const QpProblem &p, const QpOptions &options = {});

/// Plain-text matrix dump of a problem for offline inspection.
void dump_qp(std::ostream &os, const QpProblem &p);

const char *to_string(QpStatus s);

} // namespace jdmpc
