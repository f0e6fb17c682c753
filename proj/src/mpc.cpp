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

#include "jdmpc/mpc.hpp"

#include <Eigen/Eigenvalues>

#include <chrono>
#include <functional>
#include <cmath>
#include <numeric>
#include <set>

namespace jdmpc
{

namespace
{

void check_symmetric(const Matrix &W, const std::string &name)
{
  const double scale = std::max(1.0, W.cwiseAbs().maxCoeff());
  if ((W - W.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw ConfigError(name + " is not symmetric");
}

double min_eigenvalue(const Matrix &W)
{
  if (W.size() == 0)
    return 0.0;
  Eigen::SelfAdjointEigenSolver<Matrix> es(W, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

IndexSet row_support(const Matrix &rows, int r, int M, const std::function<int(int)> &offset,
                     const std::function<int(int)> &width)
{
  IndexSet out;
  for (int j = 0; j < M; ++j)
    if (width(j) > 0 && (rows.row(r).segment(offset(j), width(j)).array() != 0.0).any())
      out.push_back(j);
  return out;
}

void append_row(Matrix &rows, Vector &rhs, const Vector &row, double value)
{
  const auto n = rows.rows();
  Matrix grown(n + 1, row.size());
  if (n > 0)
    grown.topRows(n) = rows;
  grown.row(n) = row.transpose();
  rows = std::move(grown);
  rhs.conservativeResize(n + 1);
  rhs(n) = value;
}

double max_violation(const Vector &v) { return v.size() == 0 ? 0.0 : std::max(0.0, v.maxCoeff()); }

} // namespace

void MpcConfig::validate(const PlantModel &plant) const
{
  const int M = plant.size();
  if (horizon < 1)
    throw ConfigError("horizon N must be >= 1");
  if (static_cast<int>(Q.size()) != M || static_cast<int>(R.size()) != M)
    throw ConfigError("one Q and one R weight per subsystem are required");
  for (int i = 0; i < M; ++i)
  {
    const std::string tag = "subsystem " + std::to_string(i);
    if (Q[i].rows() != plant.n(i) || Q[i].cols() != plant.n(i))
      throw ConfigError("Q of " + tag + " must be " + std::to_string(plant.n(i)) + "x" + std::to_string(plant.n(i)));
    if (R[i].rows() != plant.m(i) || R[i].cols() != plant.m(i))
      throw ConfigError("R of " + tag + " must be " + std::to_string(plant.m(i)) + "x" + std::to_string(plant.m(i)));
    check_symmetric(Q[i], "Q of " + tag);
    check_symmetric(R[i], "R of " + tag);
    const double qs = std::max(1.0, Q[i].cwiseAbs().maxCoeff());
    if (min_eigenvalue(Q[i]) < -1e-12 * qs)
      throw ConfigError("Q of " + tag + " is not positive semidefinite");
    if (R[i].size() > 0 && min_eigenvalue(R[i]) <= 1e-12 * std::max(1.0, R[i].cwiseAbs().maxCoeff()))
      throw ConfigError("R of " + tag + " is not positive definite");
  }
  if (p_max < 1)
    throw ConfigError("p_max must be >= 1");
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon))
    throw ConfigError("epsilon must be a finite nonnegative number");
  if (r_opt < 1)
    throw ConfigError("r_opt must be >= 1");
  if (!lambda.empty())
  {
    if (static_cast<int>(lambda.size()) != M)
      throw ConfigError("lambda needs one weight per subsystem");
    for (double l : lambda)
      if (!(l > 0.0) || l > 1.0 || (l == 1.0 && M > 1))
        throw ConfigError("each lambda must lie in (0, 1)");
    const double sum = std::accumulate(lambda.begin(), lambda.end(), 0.0);
    if (std::abs(sum - 1.0) > 1e-12)
      throw ConfigError("lambda weights must sum to 1");
  }
}

std::vector<double> MpcConfig::weights(int M) const
{
  if (!lambda.empty())
    return lambda;
  return std::vector<double>(M, 1.0 / M);
}

Matrix block_diagonal(const std::vector<Matrix> &blocks)
{
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  for (const auto &b : blocks)
  {
    rows += b.rows();
    cols += b.cols();
  }
  Matrix out = Matrix::Zero(rows, cols);
  Eigen::Index r = 0;
  Eigen::Index c = 0;
  for (const auto &b : blocks)
  {
    out.block(r, c, b.rows(), b.cols()) = b;
    r += b.rows();
    c += b.cols();
  }
  return out;
}

StageConstraints StageConstraints::none(const PlantModel &plant)
{
  StageConstraints c;
  c.state_rows = Matrix(0, plant.state_dim());
  c.state_rhs = Vector(0);
  c.input_rows = Matrix(0, plant.input_dim());
  c.input_rhs = Vector(0);
  return c;
}

void StageConstraints::add_state_row(const PlantModel &plant, const std::vector<std::pair<int, Vector>> &terms,
                                     double rhs, int owner)
{
  if (owner >= plant.size())
    throw DimensionError("state constraint owner " + std::to_string(owner) + " is not a subsystem");
  state_owner.resize(num_state_rows(), -1);
  if (state_rows.cols() != plant.state_dim())
    state_rows.resize(0, plant.state_dim());
  Vector row = Vector::Zero(plant.state_dim());
  for (const auto &[j, coeffs] : terms)
  {
    if (j < 0 || j >= plant.size() || coeffs.size() != plant.n(j))
      throw DimensionError("state constraint term for subsystem " + std::to_string(j) + " has wrong size");
    row.segment(plant.state_offset(j), plant.n(j)) += coeffs;
  }
  append_row(state_rows, state_rhs, row, rhs);
  state_owner.push_back(owner < 0 ? -1 : owner);
}

void StageConstraints::add_input_row(const PlantModel &plant, const std::vector<std::pair<int, Vector>> &terms,
                                     double rhs, int owner)
{
  if (owner >= plant.size())
    throw DimensionError("input constraint owner " + std::to_string(owner) + " is not a subsystem");
  input_owner.resize(num_input_rows(), -1);
  if (input_rows.cols() != plant.input_dim())
    input_rows.resize(0, plant.input_dim());
  Vector row = Vector::Zero(plant.input_dim());
  for (const auto &[j, coeffs] : terms)
  {
    if (j < 0 || j >= plant.size() || coeffs.size() != plant.m(j))
      throw DimensionError("input constraint term for subsystem " + std::to_string(j) + " has wrong size");
    row.segment(plant.input_offset(j), plant.m(j)) += coeffs;
  }
  append_row(input_rows, input_rhs, row, rhs);
  input_owner.push_back(owner < 0 ? -1 : owner);
}

void StageConstraints::add_input_bounds(const PlantModel &plant, int i, const Vector &lo, const Vector &hi)
{
  const int m = plant.m(i);
  if (lo.size() != m || hi.size() != m)
    throw DimensionError("input bounds of subsystem " + std::to_string(i) + " have wrong size");
  for (int c = 0; c < m; ++c)
  {
    Vector e = Vector::Zero(m);
    e(c) = 1.0;
    add_input_row(plant, {{i, e}}, hi(c), i);
    add_input_row(plant, {{i, -e}}, -lo(c), i);
  }
}

IndexSet StageConstraints::state_row_support(const PlantModel &plant, int row) const
{
  return row_support(
      state_rows, row, plant.size(), [&](int j) { return plant.state_offset(j); }, [&](int j) { return plant.n(j); });
}

IndexSet StageConstraints::input_row_support(const PlantModel &plant, int row) const
{
  return row_support(
      input_rows, row, plant.size(), [&](int j) { return plant.input_offset(j); }, [&](int j) { return plant.m(j); });
}

int StageConstraints::state_row_owner(int row) const
{
  return row < static_cast<int>(state_owner.size()) ? state_owner[row] : -1;
}

int StageConstraints::input_row_owner(int row) const
{
  return row < static_cast<int>(input_owner.size()) ? input_owner[row] : -1;
}

std::vector<IndexSet> StageConstraints::couplings(const PlantModel &plant) const
{
  std::set<IndexSet> unique;
  auto add = [&unique](IndexSet support, int owner) {
    if (support.size() < 2)
      return;
    if (owner < 0)
    {
      unique.insert(std::move(support));
      return;
    }
    for (int j : support)
      if (j != owner)
        unique.insert(IndexSet{std::min(owner, j), std::max(owner, j)});
  };
  for (int r = 0; r < num_state_rows(); ++r)
    add(state_row_support(plant, r), state_row_owner(r));
  for (int r = 0; r < num_input_rows(); ++r)
    add(input_row_support(plant, r), input_row_owner(r));
  return {unique.begin(), unique.end()};
}

void StageConstraints::validate(const PlantModel &plant) const
{
  if (state_rows.rows() > 0 && state_rows.cols() != plant.state_dim())
    throw DimensionError("state constraint rows must have " + std::to_string(plant.state_dim()) + " columns");
  if (input_rows.rows() > 0 && input_rows.cols() != plant.input_dim())
    throw DimensionError("input constraint rows must have " + std::to_string(plant.input_dim()) + " columns");
  if (state_rhs.size() != state_rows.rows() || input_rhs.size() != input_rows.rows())
    throw DimensionError("constraint right-hand sides do not match the number of rows");
  if (!state_rows.allFinite() || !input_rows.allFinite() || !state_rhs.allFinite() || !input_rhs.allFinite())
    throw ConfigError("constraints contain non-finite entries");
  if ((state_rhs.array() < 0.0).any())
    throw ConfigError("state constraints exclude the origin (a right-hand side is negative)");
  if ((input_rhs.array() < 0.0).any())
    throw ConfigError("input constraints exclude the origin (a right-hand side is negative)");
  if (static_cast<int>(state_owner.size()) > num_state_rows() ||
      static_cast<int>(input_owner.size()) > num_input_rows())
    throw DimensionError("more constraint owners than constraint rows");
  for (int r = 0; r < num_state_rows(); ++r)
    if (const int o = state_row_owner(r); o >= 0)
    {
      const auto s = state_row_support(plant, r);
      if (!s.empty() && !std::binary_search(s.begin(), s.end(), o))
        throw ConfigError("state constraint row " + std::to_string(r) + " is owned by subsystem " +
                          std::to_string(o) + " but does not involve it");
    }
  for (int r = 0; r < num_input_rows(); ++r)
    if (const int o = input_row_owner(r); o >= 0)
    {
      const auto s = input_row_support(plant, r);
      if (!s.empty() && !std::binary_search(s.begin(), s.end(), o))
        throw ConfigError("input constraint row " + std::to_string(r) + " is owned by subsystem " +
                          std::to_string(o) + " but does not involve it");
    }
}

MpcSetup make_setup(PlantModel plant, StageConstraints constraints, MpcConfig config)
{
  if (constraints.state_rows.rows() == 0)
  {
    constraints.state_rows.resize(0, plant.state_dim());
    constraints.state_rhs.resize(0);
  }
  if (constraints.input_rows.rows() == 0)
  {
    constraints.input_rows.resize(0, plant.input_dim());
    constraints.input_rhs.resize(0);
  }
  constraints.validate(plant);
  config.validate(plant);
  MpcSetup s;
  s.graph = build_interaction_graph(plant.subsystems(), constraints.couplings(plant));
  s.plant = std::move(plant);
  s.constraints = std::move(constraints);
  s.config = std::move(config);
  return s;
}

FeasibilityReport check_feasibility(const MpcSetup &setup, const Vector &x, const Vector &inputs)
{
  const int N = setup.config.horizon;
  const int nu = setup.plant.input_dim();
  if (inputs.size() != N * nu)
    throw DimensionError("check_feasibility: input sequence has wrong length");
  const Matrix traj = simulate(setup.plant, x, inputs);
  const auto &c = setup.constraints;
  FeasibilityReport rep;
  for (int k = 0; k < N; ++k)
  {
    if (c.num_input_rows() > 0)
      rep.input_violation =
          std::max(rep.input_violation, max_violation(c.input_rows * inputs.segment(k * nu, nu) - c.input_rhs));
    if (k >= 1 && c.num_state_rows() > 0)
      rep.state_violation = std::max(rep.state_violation, max_violation(c.state_rows * traj.col(k) - c.state_rhs));
  }
  rep.terminal_residual = inf_norm(traj.col(N));
  return rep;
}

double trajectory_cost(const MpcSetup &setup, const Vector &x, const Vector &inputs)
{
  const int N = setup.config.horizon;
  const int nu = setup.plant.input_dim();
  const Matrix traj = simulate(setup.plant, x, inputs);
  const Matrix Q = block_diagonal(setup.config.Q);
  const Matrix R = block_diagonal(setup.config.R);
  double v = 0.0;
  for (int k = 0; k < N; ++k)
  {
    const Vector xk = traj.col(k);
    const Vector uk = inputs.segment(k * nu, nu);
    v += xk.dot(Q * xk) + uk.dot(R * uk);
  }
  return v;
}

CondensedMpc::CondensedMpc(MpcSetup setup) : setup_(std::move(setup))
{
  const auto &plant = setup_.plant;
  const int N = setup_.config.horizon;
  const int nx = plant.state_dim();
  const int nu = plant.input_dim();
  pred_ = build_prediction(plant, N);
  Q_ = block_diagonal(setup_.config.Q);
  R_ = block_diagonal(setup_.config.R);

  // Qt alpha and Qt powers, with the x_N block left at zero
  Matrix Qa = Matrix::Zero(N * nx, N * nu);
  Matrix Qp = Matrix::Zero(N * nx, nx);
  for (int k = 0; k + 1 < N; ++k)
  {
    Qa.middleRows(k * nx, nx) = Q_ * pred_.alpha.middleRows(k * nx, nx);
    Qp.middleRows(k * nx, nx) = Q_ * pred_.powers.middleRows(k * nx, nx);
  }
  H_ = 2.0 * (pred_.alpha.transpose() * Qa);
  for (int k = 0; k < N; ++k)
    H_.block(k * nu, k * nu, nu, nu) += 2.0 * R_;
  H_ = 0.5 * (H_ + H_.transpose());
  Lx_ = 2.0 * (pred_.alpha.transpose() * Qp);
  P_ = Q_ + pred_.powers.transpose() * Qp;
  P_ = 0.5 * (P_ + P_.transpose());

  const auto &c = setup_.constraints;
  const int qu = c.num_input_rows();
  const int qx = c.num_state_rows();
  const int total = N * qu + (N - 1) * qx;
  G_ = Matrix::Zero(total, N * nu);
  Gx_ = Matrix::Zero(total, nx);
  rows_.reserve(total);
  int r = 0;
  for (int k = 0; k < N; ++k)
  {
    for (int q = 0; q < qu; ++q, ++r)
    {
      G_.block(r, k * nu, 1, nu) = c.input_rows.row(q);
      rows_.push_back(RowInfo{false, k, q});
    }
    if (k == 0)
      continue;
    if (qx > 0)
    {
      G_.middleRows(r, qx) = c.state_rows * pred_.alpha.middleRows((k - 1) * nx, nx);
      Gx_.middleRows(r, qx) = c.state_rows * pred_.powers.middleRows((k - 1) * nx, nx);
    }
    for (int q = 0; q < qx; ++q, ++r)
      rows_.push_back(RowInfo{true, k, q});
  }

  qp_ = std::make_unique<ParametricQp>(H_, pred_.F, G_);
}

Vector CondensedMpc::linear_term(const Vector &x) const { return Lx_ * x; }

Vector CondensedMpc::equality_rhs(const Vector &x) const { return -(pred_.A_pow_N * x); }

Vector CondensedMpc::inequality_rhs(const Vector &x) const
{
  Vector h(G_.rows());
  const auto &c = setup_.constraints;
  for (std::size_t r = 0; r < rows_.size(); ++r)
    h(r) = rows_[r].state ? c.state_rhs(rows_[r].row) : c.input_rhs(rows_[r].row);
  return h - Gx_ * x;
}

double CondensedMpc::constant_term(const Vector &x) const { return x.dot(P_ * x); }

QpProblem CondensedMpc::build(const Vector &x) const
{
  if (x.size() != plant().state_dim())
    throw DimensionError("state has " + std::to_string(x.size()) + " entries, expected " +
                         std::to_string(plant().state_dim()));
  QpProblem p;
  p.H = H_;
  p.g = linear_term(x);
  p.E = pred_.F;
  p.e = equality_rhs(x);
  p.G = G_;
  p.h = inequality_rhs(x);
  p.constant = constant_term(x);
  return p;
}

double CondensedMpc::cost(const Vector &inputs, const Vector &x) const
{
  const int N = horizon();
  const int nx = plant().state_dim();
  const int nu = plant().input_dim();
  const Vector xs = pred_.predict(inputs, x);
  double v = x.dot(Q_ * x);
  for (int k = 0; k < N; ++k)
  {
    const auto uk = inputs.segment(k * nu, nu);
    v += uk.dot(R_ * uk);
    if (k + 1 < N)
    {
      const auto xk = xs.segment(k * nx, nx);
      v += xk.dot(Q_ * xk);
    }
  }
  return v;
}

QpProblem build_centralized_qp(const CondensedMpc &mpc, const Vector &x) { return mpc.build(x); }

CentralizedSolution solve_centralized_step(const CondensedMpc &mpc, const Vector &x, const Vector *start)
{
  if (x.size() != mpc.plant().state_dim())
    throw DimensionError("solve_centralized_step: state has wrong length");
  const Vector *warm = (start != nullptr && start->size() == mpc.dim()) ? start : nullptr;
  CentralizedSolution out;
  out.qp = mpc.solver().solve(mpc.linear_term(x), mpc.equality_rhs(x), mpc.inequality_rhs(x), warm,
                              mpc.constant_term(x));
  if (!out.qp.ok())
    throw TerminalReachabilityError("centralized MPC is infeasible: the terminal point x_N = 0 is not reachable "
                                    "within the horizon N = " +
                                    std::to_string(mpc.horizon()) + " under the constraints (" + out.qp.detail +
                                    "); try a larger N");
  out.sequence = out.qp.z;
  out.u0 = out.sequence.head(mpc.plant().input_dim());
  out.value = out.qp.objective;
  return out;
}

CentralizedController::CentralizedController(std::shared_ptr<const CondensedMpc> mpc) : mpc_(std::move(mpc)) {}

ControlStep CentralizedController::step(const Vector &x, int)
{
  const auto t0 = std::chrono::steady_clock::now();
  const auto sol = solve_centralized_step(*mpc_, x, previous_.size() ? &previous_ : nullptr);
  ControlStep s;
  s.u = sol.u0;
  s.plan = sol.sequence;
  s.value = sol.value;
  s.p_used = 1;
  s.solve_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  previous_ = shift_and_pad(sol.sequence, mpc_->plant().input_dim());
  return s;
}

ZeroController::ZeroController(std::shared_ptr<const CondensedMpc> mpc) : mpc_(std::move(mpc)) {}

ControlStep ZeroController::step(const Vector &x, int)
{
  ControlStep s;
  s.u = Vector::Zero(mpc_->plant().input_dim());
  s.plan = Vector::Zero(mpc_->dim());
  s.value = mpc_->cost(s.plan, x);
  return s;
}

double ClosedLoopTrace::total_cost() const
{
  double v = 0.0;
  for (const auto &s : steps)
    v += s.value;
  return v;
}

ClosedLoopError::ClosedLoopError(int step, const std::string &what, bool infeasible)
    : std::runtime_error("closed loop aborted at step " + std::to_string(step) + ": " + what), step_(step),
      infeasible_(infeasible)
{
}

ClosedLoopTrace run_closed_loop(const PlantModel &plant, Controller &controller, const Vector &x0, int steps,
                                Controller *oracle)
{
  if (x0.size() != plant.state_dim())
    throw DimensionError("run_closed_loop: x0 has wrong length");
  if (steps < 0)
    throw std::invalid_argument("run_closed_loop: negative step count");
  ClosedLoopTrace trace;
  trace.controller = controller.name();
  trace.nx = plant.state_dim();
  trace.nu = plant.input_dim();
  trace.x0 = x0;
  Vector x = x0;
  for (int t = 0; t < steps; ++t)
  {
    ControlStep cs;
    std::optional<double> oracle_value;
    try
    {
      cs = controller.step(x, t);
      if (oracle != nullptr)
        oracle_value = oracle->step(x, t).value;
    }
    catch (const InfeasibleError &e)
    {
      throw ClosedLoopError(t, e.what(), true);
    }
    catch (const ClosedLoopError &)
    {
      throw;
    }
    catch (const std::exception &e)
    {
      throw ClosedLoopError(t, e.what(), false);
    }
    if (cs.u.size() != plant.input_dim())
      throw ClosedLoopError(t, "controller returned an input of wrong length", false);
    TraceStep ts;
    ts.t = t;
    ts.x = x;
    ts.u = cs.u;
    ts.value = cs.value;
    ts.p_used = cs.p_used;
    ts.messages = cs.messages;
    ts.solve_seconds = cs.solve_seconds;
    ts.plan = std::move(cs.plan);
    ts.oracle_value = oracle_value;
    trace.steps.push_back(std::move(ts));
    trace.iterations.insert(trace.iterations.end(), cs.iterations.begin(), cs.iterations.end());
    x = plant.A() * x + plant.B() * cs.u;
  }
  trace.final_state = x;
  return trace;
}

Vector shift_and_pad(const Vector &sequence, int input_dim)
{
  if (input_dim <= 0 || sequence.size() % input_dim != 0)
    throw DimensionError("shift_and_pad: sequence length is not a multiple of the input dimension");
  Vector out = Vector::Zero(sequence.size());
  const auto n = sequence.size() - input_dim;
  if (n > 0)
    out.head(n) = sequence.tail(n);
  return out;
}

} // namespace jdmpc
