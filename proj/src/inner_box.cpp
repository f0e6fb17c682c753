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

#include "jdmpc/inner_box.hpp"

#include "jdmpc/qp.hpp"

#include <cmath>
#include <functional>
#include <limits>

namespace jdmpc
{

Matrix positive_part(const Matrix &A) { return A.cwiseMax(0.0); }

double box_certificate(const Polytope &poly, const Box &box)
{
  if (poly.A.rows() == 0)
    return -std::numeric_limits<double>::infinity();
  return (poly.A * box.lower + positive_part(poly.A) * box.widths - poly.b).maxCoeff();
}

bool box_contains(const Polytope &poly, const Box &box, double tol)
{
  if (box.lower.size() != poly.dim() || box.widths.size() != poly.dim())
    throw DimensionError("box_contains: box and polytope dimensions differ");
  return box_certificate(poly, box) <= tol;
}

UnboundedBoxError::UnboundedBoxError(int coordinate, int direction)
    : std::runtime_error("inner box: polytope is unbounded along coordinate " + std::to_string(coordinate) +
                         (direction > 0 ? " (+)" : " (-)")),
      coordinate_(coordinate), direction_(direction)
{
}

void check_coordinate_bounded(const Polytope &poly)
{
  const int d = poly.dim();
  const int m = static_cast<int>(poly.A.rows());
  // A recession direction r with A r <= 0 and +-r_j >= 1 exists iff coordinate j is unbounded.
  Matrix G(m + 1, d);
  G.topRows(m) = poly.A;
  Vector h = Vector::Zero(m + 1);
  h(m) = -1.0;
  for (int j = 0; j < d; ++j)
  {
    for (int sign : {+1, -1})
    {
      G.row(m).setZero();
      G(m, j) = -static_cast<double>(sign);
      ParametricQp qp(Matrix::Identity(d, d), Matrix(0, d), G);
      const auto sol = qp.solve(Vector::Zero(d), Vector(0), h);
      if (sol.ok())
        throw UnboundedBoxError(j, sign);
    }
  }
}

namespace
{

using ValueFn = std::function<double(const Vector &)>; // +inf outside the domain
using DerivFn = std::function<void(const Vector &, Vector &, Matrix &)>;

/// Damped Newton centering. Returns false if the iteration budget ran out.
bool newton_center(Vector &w, const ValueFn &value, const DerivFn &deriv, double tol, int max_iter,
                   const std::function<bool(const Vector &)> &early_exit = {})
{
  Vector grad;
  Matrix hess;
  for (int it = 0; it < max_iter; ++it)
  {
    deriv(w, grad, hess);
    Eigen::LDLT<Matrix> ldlt(hess);
    Vector step = -ldlt.solve(grad);
    if (!step.allFinite())
    {
      hess.diagonal().array() += 1e-12 * std::max(1.0, hess.diagonal().cwiseAbs().maxCoeff());
      step = -Eigen::LDLT<Matrix>(hess).solve(grad);
    }
    const double decrement = -grad.dot(step);
    if (decrement / 2.0 <= tol)
      return true;
    const double f0 = value(w);
    double s = 1.0;
    Vector trial = w + step;
    double f1 = value(trial);
    while (!(f1 <= f0 - 0.25 * s * decrement))
    {
      s *= 0.5;
      if (s < 1e-16)
        return true; // no further progress possible at machine precision
      trial = w + s * step;
      f1 = value(trial);
    }
    w = trial;
    if (early_exit && early_exit(w))
      return true;
  }
  return false;
}

double log_barrier(const Vector &slack)
{
  if (slack.size() > 0 && slack.minCoeff() <= 0.0)
    return std::numeric_limits<double>::infinity();
  return -slack.array().log().sum();
}

} // namespace

Box max_volume_inner_box(const Polytope &poly, const InnerBoxOptions &options)
{
  const int d = poly.dim();
  const int m = static_cast<int>(poly.A.rows());
  if (poly.b.size() != m)
    throw DimensionError("max_volume_inner_box: b has wrong length");
  if (!poly.A.allFinite() || !poly.b.allFinite())
    throw std::invalid_argument("max_volume_inner_box: polytope has non-finite entries");
  if (d == 0)
    return Box{Vector(0), Vector(0)};
  check_coordinate_bounded(poly);

  const Matrix Ap = positive_part(poly.A);
  Matrix K(m, 2 * d); // [A, A^+] acting on (lower, widths)
  K << poly.A, Ap;

  // Phase I over (lower, widths, tau): min tau s.t. K w - b <= tau, -widths <= tau.
  Vector w1(2 * d + 1);
  w1.setZero();
  w1.segment(d, d).setOnes();
  {
    const Vector c = K * w1.head(2 * d) - poly.b;
    w1(2 * d) = std::max(c.maxCoeff(), -1.0) + 1.0;
  }
  auto phase1_slacks = [&](const Vector &w) {
    Vector s(m + d);
    s.head(m) = poly.b - K * w.head(2 * d) + Vector::Constant(m, w(2 * d));
    s.tail(d) = w.segment(d, d) + Vector::Constant(d, w(2 * d));
    return s;
  };
  bool strictly_feasible = false;
  {
    double t = 1.0;
    const double n_con = static_cast<double>(m + d);
    auto done = [&](const Vector &w) { return w(2 * d) < 0.0; };
    for (int outer = 0; outer < 100 && !strictly_feasible; ++outer)
    {
      auto value = [&](const Vector &w) { return t * w(2 * d) + log_barrier(phase1_slacks(w)); };
      auto deriv = [&](const Vector &w, Vector &grad, Matrix &hess) {
        const Vector s = phase1_slacks(w);
        const Vector inv = s.cwiseInverse();
        // d(slack)/dw: first m rows [-K, 1], last d rows [0, I, 1]
        Matrix Ds = Matrix::Zero(m + d, 2 * d + 1);
        Ds.topLeftCorner(m, 2 * d) = -K;
        Ds.col(2 * d).setOnes();
        Ds.block(m, d, d, d).setIdentity();
        grad = -Ds.transpose() * inv;
        grad(2 * d) += t;
        hess = Ds.transpose() * inv.cwiseAbs2().asDiagonal() * Ds;
      };
      newton_center(w1, value, deriv, options.newton_tol, options.max_newton, done);
      if (done(w1))
      {
        strictly_feasible = true;
        break;
      }
      if (n_con / t < options.gap_tol * 1e-3)
        break;
      t *= options.barrier_growth;
    }
  }
  if (!strictly_feasible)
    throw EmptyInteriorError("inner box: polytope has an empty interior (no box with positive widths fits)");

  // Phase II: min -t sum ln v - sum ln(b - K w).
  Vector w = w1.head(2 * d);
  double t = 1.0;
  while (true)
  {
    auto value = [&](const Vector &x) {
      const Vector v = x.tail(d);
      if (v.minCoeff() <= 0.0)
        return std::numeric_limits<double>::infinity();
      return -t * v.array().log().sum() + log_barrier(poly.b - K * x);
    };
    auto deriv = [&](const Vector &x, Vector &grad, Matrix &hess) {
      const Vector inv = (poly.b - K * x).cwiseInverse();
      const Vector vinv = x.tail(d).cwiseInverse();
      grad = K.transpose() * inv;
      grad.tail(d) -= t * vinv;
      hess = K.transpose() * inv.cwiseAbs2().asDiagonal() * K;
      hess.diagonal().tail(d) += t * vinv.cwiseAbs2();
    };
    newton_center(w, value, deriv, options.newton_tol, options.max_newton);
    if (static_cast<double>(m) / t < options.gap_tol)
      break;
    t *= options.barrier_growth;
  }
  return Box{w.head(d), w.tail(d)};
}

} // namespace jdmpc
