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

#include "jdmpc/model.hpp"
#include "jdmpc/qp.hpp"

#include <memory>
#include <optional>
#include <utility>

namespace jdmpc
{

/// Horizon, weights and iteration parameters shared by the centralized and distributed controllers.
struct MpcConfig
{
  int horizon = 10;
  std::vector<Matrix> Q; ///< per subsystem, n_i x n_i, symmetric PSD
  std::vector<Matrix> R; ///< per subsystem, m_i x m_i, symmetric PD
  int p_max = 20;
  double epsilon = 1e-6;
  std::vector<double> lambda; ///< empty means 1/M each
  int r_opt = 1;

  /// Throws ConfigError describing the first violated requirement.
  void validate(const PlantModel &plant) const;
  std::vector<double> weights(int M) const;
};

Matrix block_diagonal(const std::vector<Matrix> &blocks);

/**
 * @brief Polyhedral stage constraints C_x x_k <= d_x and C_u u_k <= d_u.
 *
 * Rows are written against the aggregated state and input vectors. The set of
 * subsystems a row touches (its support) becomes a constraint coupling of the
 * interaction graph. Right-hand sides must be nonnegative so that the origin
 * is admissible, which the shifted warm start relies on.
 */
struct StageConstraints
{
  Matrix state_rows;
  Vector state_rhs;
  Matrix input_rows;
  Vector input_rhs;
  /// Subsystem a row belongs to, or -1. An owned row couples its owner with each other
  /// subsystem it touches; an unowned row couples all of them pairwise.
  std::vector<int> state_owner;
  std::vector<int> input_owner;

  static StageConstraints none(const PlantModel &plant);

  /// Append a row sum_j coeffs_j' x^j <= rhs from per-subsystem coefficient vectors.
  void add_state_row(const PlantModel &plant, const std::vector<std::pair<int, Vector>> &terms, double rhs,
                     int owner = -1);
  void add_input_row(const PlantModel &plant, const std::vector<std::pair<int, Vector>> &terms, double rhs,
                     int owner = -1);
  /// lo <= u^i <= hi componentwise.
  void add_input_bounds(const PlantModel &plant, int i, const Vector &lo, const Vector &hi);

  int num_state_rows() const { return static_cast<int>(state_rows.rows()); }
  int num_input_rows() const { return static_cast<int>(input_rows.rows()); }

  IndexSet state_row_support(const PlantModel &plant, int row) const;
  IndexSet input_row_support(const PlantModel &plant, int row) const;
  int state_row_owner(int row) const;
  int input_row_owner(int row) const;
  /// Subsystem groups that constraints couple (cliques for unowned rows, owner pairs otherwise).
  std::vector<IndexSet> couplings(const PlantModel &plant) const;

  void validate(const PlantModel &plant) const;
};

/// Everything that defines one control problem; validated on construction.
struct MpcSetup
{
  PlantModel plant;
  StageConstraints constraints;
  MpcConfig config;
  InteractionGraph graph;
};

MpcSetup make_setup(PlantModel plant, StageConstraints constraints, MpcConfig config);

/// Terminal state cannot be reached from the current state within the horizon.
class TerminalReachabilityError : public InfeasibleError
{
public:
  using InfeasibleError::InfeasibleError;
};

/// Constraint residuals of an input sequence, recomputed by simulation.
struct FeasibilityReport
{
  double input_violation = 0.0; ///< max(C_u u_k - d_u, 0)
  double state_violation = 0.0; ///< max(C_x x_k - d_x, 0), k = 1..N-1
  double terminal_residual = 0.0; ///< ||x_N||_inf

  double worst() const { return std::max({input_violation, state_violation, terminal_residual}); }
  bool ok(double tol = 1e-7) const { return worst() <= tol; }
};

/// Rollout-based checks that do not use the condensed matrices.
FeasibilityReport check_feasibility(const MpcSetup &setup, const Vector &x, const Vector &inputs);
double trajectory_cost(const MpcSetup &setup, const Vector &x, const Vector &inputs);

/**
 * @brief Condensed centralized problem
 *
 *   min 1/2 u'Hu + g(x)'u + c(x)  s.t.  F u = -A^N x,  G u <= h(x)
 *
 * with H = 2(alpha' Qt alpha + Rt) and g = 2 alpha' Qt beta(x). Qt weights
 * x_1..x_{N-1} and leaves x_N unweighted, so the objective with its constant
 * c(x) = x'Qx + beta'Qt beta is exactly the stage-cost sum over k = 0..N-1.
 * Input rows cover k = 0..N-1 and state rows k = 1..N-1, ordered by stage.
 */
class CondensedMpc
{
public:
  struct RowInfo
  {
    bool state = false;
    int stage = 0;
    int row = 0; ///< row of the stage constraint matrix
  };

  explicit CondensedMpc(MpcSetup setup);

  const MpcSetup &setup() const { return setup_; }
  const PlantModel &plant() const { return setup_.plant; }
  const MpcConfig &config() const { return setup_.config; }
  const PredictionOperator &prediction() const { return pred_; }
  int horizon() const { return pred_.horizon; }
  int dim() const { return static_cast<int>(H_.rows()); }

  const Matrix &hessian() const { return H_; }
  const Matrix &inequality_matrix() const { return G_; }
  const std::vector<RowInfo> &rows() const { return rows_; }
  const Matrix &stage_Q() const { return Q_; }
  const Matrix &stage_R() const { return R_; }

  Vector linear_term(const Vector &x) const;
  Vector equality_rhs(const Vector &x) const;
  Vector inequality_rhs(const Vector &x) const;
  double constant_term(const Vector &x) const;
  QpProblem build(const Vector &x) const;

  /// Stage-cost sum V(u, x) from the condensed prediction.
  double cost(const Vector &inputs, const Vector &x) const;

  /// Cached factorization of the centralized problem, shared by all solves.
  const ParametricQp &solver() const { return *qp_; }

private:
  MpcSetup setup_;
  PredictionOperator pred_;
  Matrix Q_;
  Matrix R_;
  Matrix H_;
  Matrix G_;
  Matrix Gx_; // h(x) = d - Gx_ x
  Matrix Lx_; // g(x) = Lx_ x
  Matrix P_;  // c(x) = x' P_ x
  std::vector<RowInfo> rows_;
  std::unique_ptr<ParametricQp> qp_;
};

/// QpProblem for the centralized step at state x.
QpProblem build_centralized_qp(const CondensedMpc &mpc, const Vector &x);

struct CentralizedSolution
{
  Vector u0;
  Vector sequence;
  double value = 0.0;
  QpSolution qp;
};

/// Throws TerminalReachabilityError when the step is infeasible.
CentralizedSolution solve_centralized_step(const CondensedMpc &mpc, const Vector &x,
                                           const Vector *start = nullptr);

/// One record per Jacobi iteration.
struct IterationRecord
{
  int t = 0;
  int p = 0;
  double phi = 0.0;
  double rho_max = 0.0;
  long messages = 0;
  double wall_time = 0.0;
};

/// What a controller returns at each time step.
struct ControlStep
{
  Vector u;
  Vector plan;        ///< full input sequence whose first block is u
  double value = 0.0; ///< V_t of the plan
  int p_used = 0;
  long messages = 0;
  double solve_seconds = 0.0;
  std::vector<IterationRecord> iterations;
};

class Controller
{
public:
  virtual ~Controller() = default;
  virtual ControlStep step(const Vector &x, int t) = 0;
  virtual std::string name() const = 0;
};

class CentralizedController : public Controller
{
public:
  explicit CentralizedController(std::shared_ptr<const CondensedMpc> mpc);
  ControlStep step(const Vector &x, int t) override;
  std::string name() const override { return "centralized"; }

private:
  std::shared_ptr<const CondensedMpc> mpc_;
  Vector previous_;
};

/// Applies u = 0; the logged value is the cost of the all-zero plan.
class ZeroController : public Controller
{
public:
  explicit ZeroController(std::shared_ptr<const CondensedMpc> mpc);
  ControlStep step(const Vector &x, int t) override;
  std::string name() const override { return "zero"; }

private:
  std::shared_ptr<const CondensedMpc> mpc_;
};

struct TraceStep
{
  int t = 0;
  Vector x;
  Vector u;
  double value = 0.0;
  int p_used = 0;
  long messages = 0;
  double solve_seconds = 0.0;
  Vector plan;
  std::optional<double> oracle_value; ///< centralized V*_t at the same state
};

struct ClosedLoopTrace
{
  std::string controller;
  int nx = 0;
  int nu = 0;
  Vector x0;
  Vector final_state;
  std::vector<TraceStep> steps;
  std::vector<IterationRecord> iterations;

  /// Sum of the logged values V_t.
  double total_cost() const;
};

/// Raised when a controller fails inside a closed loop; carries the step index.
class ClosedLoopError : public std::runtime_error
{
public:
  ClosedLoopError(int step, const std::string &what, bool infeasible);
  int step() const { return step_; }
  bool infeasible() const { return infeasible_; }

private:
  int step_;
  bool infeasible_;
};

/**
 * @brief Receding-horizon loop x_{t+1} = A x_t + B u_t.
 *
 * When @p oracle is given, its value at every visited state is logged next to
 * the controller's own value.
 */
ClosedLoopTrace run_closed_loop(const PlantModel &plant, Controller &controller, const Vector &x0, int steps,
                                Controller *oracle = nullptr);

/// [u_1, ..., u_{N-1}, 0]
Vector shift_and_pad(const Vector &sequence, int input_dim);

} // namespace jdmpc
