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

#include "jdmpc/inner_box.hpp"
#include "jdmpc/mpc.hpp"
#include "jdmpc/netsim.hpp"

#include <functional>
#include <map>
#include <set>

namespace jdmpc
{

/**
 * @brief What one subsystem publishes about the current iterate.
 *
 * inputs holds u^j_0..u^j_{N-1} (length N m_j) and states the predicted
 * x^j_1..x^j_N (length N n_j) under the current global input sequence.
 */
struct SubsystemRecord
{
  Vector inputs;
  Vector states;
};

/// Read access to subsystem records. Local problems only ever see the iterate through this.
class IterateView
{
public:
  virtual ~IterateView() = default;
  virtual const SubsystemRecord &record(int j) const = 0;
};

/// Records of every subsystem.
class RecordSet : public IterateView
{
public:
  RecordSet() = default;
  explicit RecordSet(std::vector<SubsystemRecord> records) : records_(std::move(records)) {}
  const SubsystemRecord &record(int j) const override { return records_.at(j); }
  SubsystemRecord &mutable_record(int j) { return records_.at(j); }
  int size() const { return static_cast<int>(records_.size()); }

private:
  std::vector<SubsystemRecord> records_;
};

/// Records a node has received; asking for anything else is a locality violation.
class ScopedStore : public IterateView
{
public:
  const SubsystemRecord &record(int j) const override;
  void put(int j, SubsystemRecord r) { records_[j] = std::move(r); }
  bool has(int j) const { return records_.count(j) > 0; }
  const std::map<int, SubsystemRecord> &records() const { return records_; }

private:
  std::map<int, SubsystemRecord> records_;
};

/// Forwards to another view and remembers which subsystems were read.
class TrackingView : public IterateView
{
public:
  explicit TrackingView(const IterateView &inner) : inner_(inner) {}
  const SubsystemRecord &record(int j) const override
  {
    touched_.insert(j);
    return inner_.record(j);
  }
  const std::set<int> &touched() const { return touched_; }

private:
  const IterateView &inner_;
  mutable std::set<int> touched_;
};

/// Split a global input sequence into per-subsystem records with predicted states from x.
std::vector<SubsystemRecord> make_records(const CondensedMpc &mpc, const Vector &inputs, const Vector &x);
/// Global stacked input sequence from the records of all subsystems.
Vector assemble_inputs(const CondensedMpc &mpc, const IterateView &view);

/**
 * @brief Iteration-independent data of subsystem i's local problem.
 *
 * The optimized set is S = N^i_{r_opt}. The local decision z stacks the inputs
 * of S time-major with ascending subsystem index. Everything that varies
 * between iterations enters through subsystem records; the terminal equality
 * is pinned to the incumbent's terminal state, and each kept inequality row
 * keeps the incumbent's slack contribution from outside S.
 */
struct LocalStructure
{
  struct Row
  {
    bool state = false;
    int stage = 0;
    int row = 0;
    double rhs = 0.0;
    std::vector<std::pair<int, Vector>> terms; ///< per-subsystem coefficients of the stage row
  };

  int owner = 0;
  IndexSet members;
  IndexSet columns;                    ///< global stacked column of each local coordinate
  std::map<int, IndexSet> member_slots; ///< local coordinates of each member, time-major
  IndexSet footprint;                  ///< subsystems whose records are read
  IndexSet scope;                      ///< N^i_{N + r_opt}

  Matrix H;                  ///< H(S, S) of the centralized problem
  Matrix R2;                 ///< 2 R~ restricted to S
  std::map<int, Matrix> state_maps;   ///< q -> d x~^q / d z, for q whose predictions depend on z
  std::map<int, Matrix> cost_weights; ///< q -> 2 alpha_{q,S}' Q~_q
  Matrix E;
  std::vector<Row> rows;
  Matrix G;
  std::shared_ptr<const ParametricQp> qp;

  int dim() const { return static_cast<int>(columns.size()); }
};

LocalStructure build_local_structure(const CondensedMpc &mpc, int i);

/// Subsystem i's problem at one iterate: min V over z with everything outside S frozen.
struct LocalProblem
{
  int owner = 0;
  const LocalStructure *structure = nullptr;
  Vector current; ///< incumbent z
  Vector gradient; ///< gradient of V at the incumbent
  Vector g;       ///< linear term of 1/2 z'Hz + g'z
  Vector e;
  Vector h;

  QpProblem to_qp() const;
};

LocalProblem build_local_problem(const LocalStructure &structure, const IterateView &view);

struct LocalSolution
{
  Vector z;
  Vector delta;          ///< z - incumbent
  double decrease = 0.0; ///< V(incumbent) - V(z) >= 0
  QpStatus status = QpStatus::optimal;
  bool kept_incumbent = false;
};

/// Never returns a point worse than the incumbent.
LocalSolution solve_local(const LocalProblem &lp);

enum class Algorithm
{
  global, ///< merged global iterate (convex combination of full candidate sequences)
  local,  ///< per-subsystem updates over the simulated network
};

const char *to_string(Algorithm a);

/// Shared static data: condensed problem, local structures and communication scopes.
class DmpcEngine
{
public:
  explicit DmpcEngine(std::shared_ptr<const CondensedMpc> mpc);

  const CondensedMpc &mpc() const { return *mpc_; }
  std::shared_ptr<const CondensedMpc> mpc_ptr() const { return mpc_; }
  int size() const { return static_cast<int>(locals_.size()); }
  const LocalStructure &local(int i) const { return locals_.at(i); }
  const IndexSet &scope(int i) const { return locals_.at(i).scope; }
  std::vector<IndexSet> scopes() const;
  const std::vector<double> &lambda() const { return lambda_; }

private:
  std::shared_ptr<const CondensedMpc> mpc_;
  std::vector<LocalStructure> locals_;
  std::vector<double> lambda_;
};

struct JacobiResult
{
  Vector inputs;
  std::vector<double> rho;
  std::vector<LocalSolution> solutions;
};

/// One synchronous iteration with the merged update u_(p) = sum_i lambda_i u^{s|i}.
JacobiResult jacobi_step_global(const DmpcEngine &engine, const Vector &inputs, const Vector &x);

/**
 * @brief Per-node state of the local-update algorithm.
 *
 * Node j keeps the records of its scope. One iteration has two exchanges:
 * every node sends its local optimum and increment to its scope, then every
 * node merges what it received into its own record and broadcasts the record.
 */
class LocalAlgorithm
{
public:
  LocalAlgorithm(const DmpcEngine &engine, Network &network);

  /// Each node publishes @p own[j] to its scope (setup traffic).
  void initialize(const std::vector<SubsystemRecord> &own);
  /// Runs one iteration; returns rho^j per node.
  std::vector<double> iterate();
  /// Shift every node's own record one step ahead and republish it.
  void shift_and_publish();

  const SubsystemRecord &own(int j) const { return own_.at(j); }
  const ScopedStore &store(int j) const { return stores_.at(j); }
  Vector assemble() const;

private:
  void publish(MessageKind kind);

  const DmpcEngine &engine_;
  Network &network_;
  std::vector<SubsystemRecord> own_;
  std::vector<ScopedStore> stores_;
};

using IterationObserver = std::function<void(int p, const Vector &inputs)>;

struct DmpcStepResult
{
  Vector u;
  Vector sequence;
  double initial_value = 0.0; ///< Phi_(0), cost of the warm start
  double value = 0.0;         ///< Phi at the final iterate
  int p_used = 0;
  long messages = 0;
  std::vector<IterationRecord> trace;
};

/// Iterate until every rho^i <= epsilon or p_max iterations ran. The warm start must be feasible.
DmpcStepResult run_dmpc_timestep(const DmpcEngine &engine, const Vector &x, const Vector &warm, Algorithm algorithm,
                                 int t = 0, const IterationObserver &observer = {});

enum class InitStrategy
{
  inner_box,
  bootstrap,
};

const char *to_string(InitStrategy s);

struct InitialFeasible
{
  Vector sequence;
  InitStrategy strategy = InitStrategy::bootstrap;
  FeasibilityReport report;
  double value = 0.0;
  // inner-box details (null-space coordinates)
  std::optional<Box> box;
  double certificate = 0.0; ///< max(A lower + A^+ widths - b), <= 0 for a certified box
  bool decoupled = false;
  std::vector<std::pair<int, Box>> subsystem_boxes; ///< only when the null-space basis is block-decoupled
  std::string warning;
};

/// Throws InfeasibleError for an empty feasible set and ConfigError when the inner box is unavailable.
InitialFeasible initial_feasible(const CondensedMpc &mpc, const Vector &x0, InitStrategy strategy);

/// Receding-horizon DMPC controller; the first step starts from @p initial.
class DistributedController : public Controller
{
public:
  DistributedController(std::shared_ptr<const DmpcEngine> engine, Algorithm algorithm, Vector initial);
  ControlStep step(const Vector &x, int t) override;
  std::string name() const override;

  /// Null for the global algorithm.
  const Network *network() const { return network_.get(); }
  Network *network() { return network_.get(); }

private:
  std::shared_ptr<const DmpcEngine> engine_;
  Algorithm algorithm_;
  Vector warm_;
  std::unique_ptr<Network> network_;
  std::unique_ptr<LocalAlgorithm> local_;
};

} // namespace jdmpc
