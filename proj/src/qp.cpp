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

#include "jdmpc/qp.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>

namespace jdmpc
{

namespace
{

constexpr double kInf = std::numeric_limits<double>::infinity();

double max_positive(const Vector &v)
{
  return v.size() == 0 ? 0.0 : std::max(0.0, v.maxCoeff());
}

/// Givens pair (c, s) with [c s; -s c] [a; b] = [hyp; 0].
struct Givens
{
  double c = 1.0;
  double s = 0.0;
  double hyp = 0.0;
};

Givens make_givens(double a, double b)
{
  Givens g;
  g.hyp = std::hypot(a, b);
  if (g.hyp > 0.0)
  {
    g.c = a / g.hyp;
    g.s = b / g.hyp;
  }
  return g;
}

void rotate_columns(Matrix &J, int i, int j, const Givens &g)
{
  for (Eigen::Index r = 0; r < J.rows(); ++r)
  {
    const double a = J(r, i);
    const double b = J(r, j);
    J(r, i) = g.c * a + g.s * b;
    J(r, j) = -g.s * a + g.c * b;
  }
}

struct DualActiveSetResult
{
  bool feasible = true;
  Vector x;
  std::vector<int> active;
  Vector multipliers; // aligned with active
  int iterations = 0;
};

/**
 * Goldfarb-Idnani dual active set for  min 1/2 x'Hx + g'x  s.t.  G x <= h,
 * with H = L L' given through J0 = L^{-T}.
 */
DualActiveSetResult dual_active_set(const Matrix &L, const Matrix &J0, const Vector &g, const Matrix &G,
                                    const Vector &h, const Vector &row_norms, double feas_tol, int max_iter)
{
  const int n = static_cast<int>(J0.rows());
  const int m = static_cast<int>(G.rows());

  DualActiveSetResult out;
  Matrix J = J0;
  Matrix R = Matrix::Zero(n, n);
  Vector u = Vector::Zero(n + 1);
  std::vector<int> active;
  active.reserve(n);
  std::vector<char> is_active(m, 0);
  int q = 0;

  // unconstrained minimum
  Vector x = -g;
  L.triangularView<Eigen::Lower>().solveInPlace(x);
  L.transpose().triangularView<Eigen::Upper>().solveInPlace(x);

  auto drop = [&](int l) {
    is_active[active[l]] = 0;
    for (int k = l; k < q - 1; ++k)
    {
      R.col(k) = R.col(k + 1);
      u(k) = u(k + 1);
      active[k] = active[k + 1];
    }
    R.col(q - 1).setZero();
    active.pop_back();
    for (int j = l; j < q - 1; ++j)
    {
      const Givens gv = make_givens(R(j, j), R(j + 1, j));
      if (gv.hyp == 0.0 || R(j + 1, j) == 0.0)
        continue;
      R(j, j) = gv.hyp;
      R(j + 1, j) = 0.0;
      for (int k = j + 1; k < q - 1; ++k)
      {
        const double a = R(j, k);
        const double b = R(j + 1, k);
        R(j, k) = gv.c * a + gv.s * b;
        R(j + 1, k) = -gv.s * a + gv.c * b;
      }
      rotate_columns(J, j, j + 1, gv);
    }
    --q;
    R.row(q).setZero();
  };

  Vector slack(m);
  int iter = 0;
  while (true)
  {
    if (++iter > max_iter)
      throw std::runtime_error("qp: active-set iteration limit reached");

    slack.noalias() = h - G * x;
    int p = -1;
    double worst = 0.0;
    for (int i = 0; i < m; ++i)
    {
      if (is_active[i])
        continue;
      if (row_norms(i) == 0.0)
      {
        if (h(i) < -feas_tol * std::max(1.0, std::abs(h(i))))
        {
          out.feasible = false;
          out.iterations = iter;
          return out;
        }
        continue;
      }
      const double v = -slack(i) / row_norms(i);
      if (v > feas_tol * (1.0 + std::abs(h(i)) / row_norms(i)) && v > worst)
      {
        worst = v;
        p = i;
      }
    }
    if (p < 0)
      break;

    const Vector np = -G.row(p).transpose();
    double up = 0.0;
    double sp = slack(p);
    while (true)
    {
      if (++iter > max_iter)
        throw std::runtime_error("qp: active-set iteration limit reached");

      const Vector d = J.transpose() * np;
      const double d2sq = d.tail(n - q).squaredNorm();
      Vector r(q);
      if (q > 0)
      {
        r = d.head(q);
        R.topLeftCorner(q, q).triangularView<Eigen::Upper>().solveInPlace(r);
      }

      double t1 = kInf;
      int l = -1;
      const double r_eps = 1e-14 * std::max(1.0, q > 0 ? r.cwiseAbs().maxCoeff() : 0.0);
      for (int k = 0; k < q; ++k)
      {
        if (r(k) > r_eps)
        {
          const double ratio = u(k) / r(k);
          if (ratio < t1)
          {
            t1 = ratio;
            l = k;
          }
        }
      }
      double t2 = kInf;
      if (d2sq > 1e-24 * d.squaredNorm())
        t2 = -sp / d2sq;

      const double t = std::min(t1, t2);
      if (t == kInf)
      {
        out.feasible = false;
        out.iterations = iter;
        return out;
      }

      if (t2 == kInf)
      {
        if (q > 0)
          u.head(q) -= t * r;
        up += t;
        drop(l);
        continue;
      }

      x += t * (J.rightCols(n - q) * d.tail(n - q));
      if (q > 0)
        u.head(q) -= t * r;
      up += t;

      if (t2 <= t1)
      {
        // add p: zero d[q+1..n-1] by rotating columns of J
        Vector dd = d;
        for (int j = n - 1; j > q; --j)
        {
          if (dd(j) == 0.0)
            continue;
          const Givens gv = make_givens(dd(j - 1), dd(j));
          dd(j - 1) = gv.hyp;
          dd(j) = 0.0;
          rotate_columns(J, j - 1, j, gv);
        }
        R.col(q).head(q + 1) = dd.head(q + 1);
        u(q) = up;
        active.push_back(p);
        is_active[p] = 1;
        ++q;
        break;
      }

      drop(l);
      sp = h(p) - G.row(p).dot(x);
    }
  }

  out.x = std::move(x);
  out.active = std::move(active);
  out.multipliers = u.head(q);
  out.iterations = iter;
  return out;
}

} // namespace

double KktResiduals::max() const
{
  return std::max({stationarity, primal_equality, primal_inequality, complementarity, dual_sign});
}

void QpProblem::validate() const
{
  const auto d = H.rows();
  if (H.cols() != d)
    throw DimensionError("QpProblem: H must be square");
  if (g.size() != d)
    throw DimensionError("QpProblem: g has wrong length");
  if (E.cols() != d && E.rows() > 0)
    throw DimensionError("QpProblem: E has wrong column count");
  if (e.size() != E.rows())
    throw DimensionError("QpProblem: e has wrong length");
  if (G.cols() != d && G.rows() > 0)
    throw DimensionError("QpProblem: G has wrong column count");
  if (h.size() != G.rows())
    throw DimensionError("QpProblem: h has wrong length");
  const double scale = std::max(1.0, H.cwiseAbs().maxCoeff());
  if (d > 0 && (H - H.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw DimensionError("QpProblem: H is not symmetric");
}

ParametricQp::ParametricQp(Matrix H, Matrix E, Matrix G, QpOptions options)
    : H_(std::move(H)), E_(std::move(E)), G_(std::move(G)), options_(options)
{
  const int d = static_cast<int>(H_.rows());
  if (E_.rows() == 0)
    E_.resize(0, d);
  if (G_.rows() == 0)
    G_.resize(0, d);
  if (H_.cols() != d || E_.cols() != d || G_.cols() != d)
    throw DimensionError("ParametricQp: inconsistent dimensions");

  if (E_.rows() == 0)
  {
    rank_ = 0;
    Z_ = Matrix::Identity(d, d);
  }
  else
  {
    Eigen::ColPivHouseholderQR<Matrix> qr(E_.transpose());
    qr.setThreshold(options_.rank_threshold);
    rank_ = static_cast<int>(qr.rank());
    Qfull_ = qr.householderQ();
    const Matrix R = qr.matrixR().template triangularView<Eigen::Upper>();
    Rtop_ = R.topRows(rank_);
    perm_ = qr.colsPermutation().indices();
    Z_ = Qfull_.rightCols(d - rank_);
  }

  Gr_ = G_ * Z_;
  row_norms_ = Gr_.rowwise().norm();

  const int n = static_cast<int>(Z_.cols());
  if (n > 0)
  {
    Matrix Hr = Z_.transpose() * H_ * Z_;
    Hr = 0.5 * (Hr + Hr.transpose());
    Eigen::LLT<Matrix> llt(Hr);
    if (llt.info() != Eigen::Success)
      throw NonConvexError("qp: Hessian is not positive definite on the equality null space");
    L_ = llt.matrixL();
    const double max_diag = Hr.diagonal().cwiseAbs().maxCoeff();
    if (L_.diagonal().cwiseAbs2().minCoeff() <= 1e-14 * std::max(1.0, max_diag))
      throw NonConvexError("qp: Hessian is singular on the equality null space");
    J0_ = L_.triangularView<Eigen::Lower>().solve(Matrix::Identity(n, n)).transpose();
  }
}

Vector ParametricQp::particular(const Vector &e) const
{
  const int d = dim();
  if (rank_ == 0)
    return Vector::Zero(d);
  Vector w(rank_);
  for (int c = 0; c < rank_; ++c)
    w(c) = e(perm_(c));
  Rtop_.leftCols(rank_).transpose().triangularView<Eigen::Lower>().solveInPlace(w);
  return Qfull_.leftCols(rank_) * w;
}

Vector ParametricQp::equality_multipliers(const Vector &rhs) const
{
  const int rE = static_cast<int>(E_.rows());
  Vector nu = Vector::Zero(rE);
  if (rank_ == 0)
    return nu;
  Vector w = (Qfull_.leftCols(rank_).transpose() * rhs).eval();
  Rtop_.leftCols(rank_).triangularView<Eigen::Upper>().solveInPlace(w);
  for (int c = 0; c < rank_; ++c)
    nu(perm_(c)) = w(c);
  return nu;
}

KktResiduals ParametricQp::residuals(const Vector &z, const Vector &g, const Vector &e, const Vector &h,
                                     const Vector &nu, const Vector &mu) const
{
  KktResiduals k;
  const Vector Hz = H_ * z;
  Vector grad = Hz + g;
  if (E_.rows() > 0)
    grad += E_.transpose() * nu;
  if (G_.rows() > 0)
    grad += G_.transpose() * mu;
  k.stationarity = inf_norm(grad) / (1.0 + inf_norm(Hz) + inf_norm(g));
  if (E_.rows() > 0)
    k.primal_equality = inf_norm(E_ * z - e) / (1.0 + inf_norm(e));
  if (G_.rows() > 0)
  {
    const Vector viol = G_ * z - h;
    k.primal_inequality = max_positive(viol) / (1.0 + inf_norm(h));
    k.complementarity =
        (mu.cwiseProduct(viol)).cwiseAbs().maxCoeff() / ((1.0 + inf_norm(mu)) * (1.0 + inf_norm(h)));
    k.dual_sign = max_positive(-mu);
  }
  return k;
}

QpSolution ParametricQp::solve(const Vector &g, const Vector &e, const Vector &h, const Vector *start,
                               double constant) const
{
  const int d = dim();
  if (g.size() != d || e.size() != E_.rows() || h.size() != G_.rows())
    throw DimensionError("ParametricQp::solve: data dimensions do not match the problem");

  QpSolution sol;
  const double eq_tol = options_.equality_consistency * (1.0 + inf_norm(e));

  Vector zp;
  if (start != nullptr && start->size() == d && (E_.rows() == 0 || inf_norm(E_ * *start - e) <= eq_tol))
    zp = *start;
  else
    zp = particular(e);

  if (E_.rows() > 0 && inf_norm(E_ * zp - e) > eq_tol)
  {
    sol.status = QpStatus::infeasible;
    sol.infeasibility = Infeasibility::equalities;
    sol.z = zp;
    sol.detail = "equality constraints are inconsistent";
    return sol;
  }

  const int n = null_space_dim();
  const int m = static_cast<int>(G_.rows());
  Vector mu = Vector::Zero(m);

  if (n == 0)
  {
    sol.z = zp;
    const Vector viol = m > 0 ? Vector(G_ * zp - h) : Vector();
    if (m > 0 && max_positive(viol) > options_.tol * (1.0 + inf_norm(h)))
    {
      sol.status = QpStatus::infeasible;
      sol.infeasibility = Infeasibility::inequalities;
      sol.detail = "unique equality solution violates the inequalities";
      return sol;
    }
    sol.status = QpStatus::degenerate_feasible_point;
  }
  else
  {
    const Vector gr = Z_.transpose() * (H_ * zp + g);
    const Vector hr = h - G_ * zp;
    const int max_iter = options_.max_iterations > 0 ? options_.max_iterations : 20 * (n + m) + 100;
    auto res = dual_active_set(L_, J0_, gr, Gr_, hr, row_norms_, options_.feasibility_tol, max_iter);
    sol.iterations = res.iterations;
    if (!res.feasible)
    {
      sol.status = QpStatus::infeasible;
      sol.infeasibility = Infeasibility::inequalities;
      sol.z = zp;
      sol.detail = "inequality constraints are infeasible on the equality slice";
      return sol;
    }
    sol.z = zp + Z_ * res.x;
    for (std::size_t k = 0; k < res.active.size(); ++k)
      mu(res.active[k]) = res.multipliers(static_cast<Eigen::Index>(k));
    sol.active_constraints = static_cast<int>(res.active.size());
    sol.status = QpStatus::optimal;
  }

  Vector rhs = -(H_ * sol.z + g);
  if (m > 0)
    rhs -= G_.transpose() * mu;
  sol.multipliers_eq = equality_multipliers(rhs);
  sol.multipliers_ineq = std::move(mu);
  sol.objective = 0.5 * sol.z.dot(H_ * sol.z) + g.dot(sol.z) + constant;
  sol.kkt = residuals(sol.z, g, e, h, sol.multipliers_eq, sol.multipliers_ineq);
  return sol;
}

QpSolution solve_qp(const QpProblem &p, const QpOptions &options)
{
  p.validate();
  ParametricQp qp(p.H, p.E, p.G, options);
  return qp.solve(p.g, p.e, p.h, nullptr, p.constant);
}

void dump_qp(std::ostream &os, const QpProblem &p)
{
  const auto put = [&os](const char *name, const Matrix &A) {
    os << name << ' ' << A.rows() << ' ' << A.cols() << '\n';
    for (Eigen::Index r = 0; r < A.rows(); ++r)
    {
      for (Eigen::Index c = 0; c < A.cols(); ++c)
        os << (c ? " " : "") << std::setprecision(17) << A(r, c);
      os << '\n';
    }
  };
  put("H", p.H);
  put("g", p.g);
  put("E", p.E);
  put("e", p.e);
  put("G", p.G);
  put("h", p.h);
  os << "constant " << std::setprecision(17) << p.constant << '\n';
}

const char *to_string(QpStatus s)
{
  switch (s)
  {
  case QpStatus::optimal:
    return "optimal";
  case QpStatus::infeasible:
    return "infeasible";
  case QpStatus::degenerate_feasible_point:
    return "degenerate-feasible-point";
  }
  return "unknown";
}

} // namespace jdmpc
