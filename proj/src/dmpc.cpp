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

#include "jdmpc/dmpc.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

namespace jdmpc
{

namespace
{

bool any_nonzero(const Matrix &M) { return M.size() > 0 && (M.array() != 0.0).any(); }

IndexSet rows_of(const PlantModel &plant, int N, int q)
{
  IndexSet rows;
  const int nx = plant.state_dim();
  for (int k = 0; k < N; ++k)
    for (int a = 0; a < plant.n(q); ++a)
      rows.push_back(k * nx + plant.state_offset(q) + a);
  return rows;
}

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

} // namespace

const SubsystemRecord &ScopedStore::record(int j) const
{
  const auto it = records_.find(j);
  if (it == records_.end())
    throw std::logic_error("locality violation: record of subsystem " + std::to_string(j) +
                           " is not available at this node");
  return it->second;
}

std::vector<SubsystemRecord> make_records(const CondensedMpc &mpc, const Vector &inputs, const Vector &x)
{
  const auto &plant = mpc.plant();
  const int N = mpc.horizon();
  if (inputs.size() != mpc.dim())
    throw DimensionError("make_records: input sequence has wrong length");
  const Vector xs = mpc.prediction().predict(inputs, x);
  std::vector<SubsystemRecord> out(plant.size());
  for (int j = 0; j < plant.size(); ++j)
  {
    out[j].inputs = inputs(stacked_input_columns(plant, N, {j}));
    out[j].states = xs(rows_of(plant, N, j));
  }
  return out;
}

Vector assemble_inputs(const CondensedMpc &mpc, const IterateView &view)
{
  const auto &plant = mpc.plant();
  Vector u(mpc.dim());
  for (int j = 0; j < plant.size(); ++j)
    u(stacked_input_columns(plant, mpc.horizon(), {j})) = view.record(j).inputs;
  return u;
}

LocalStructure build_local_structure(const CondensedMpc &mpc, int i)
{
  const auto &setup = mpc.setup();
  const auto &plant = setup.plant;
  const auto &cons = setup.constraints;
  const int M = plant.size();
  const int N = mpc.horizon();
  const int nu = plant.input_dim();
  const int r = setup.config.r_opt;

  LocalStructure ls;
  ls.owner = i;
  ls.members = extended_neighborhood(setup.graph, i, r);
  ls.scope = extended_neighborhood(setup.graph, i, N + r);
  ls.columns = stacked_input_columns(plant, N, ls.members);
  {
    int slot = 0;
    for (int k = 0; k < N; ++k)
      for (int j : ls.members)
        for (int c = 0; c < plant.m(j); ++c)
          ls.member_slots[j].push_back(slot++);
  }
  const int d = ls.dim();

  ls.H = mpc.hessian()(ls.columns, ls.columns);
  ls.R2 = Matrix::Zero(d, d);
  for (int a = 0; a < d; ++a)
    for (int b = 0; b < d; ++b)
      if (ls.columns[a] / nu == ls.columns[b] / nu)
        ls.R2(a, b) = 2.0 * mpc.stage_R()(ls.columns[a] % nu, ls.columns[b] % nu);

  const Matrix alpha_S = mpc.prediction().alpha(Eigen::all, ls.columns);
  std::set<int> footprint(ls.members.begin(), ls.members.end());
  for (int q = 0; q < M; ++q)
  {
    const int nq = plant.n(q);
    Matrix map = alpha_S(rows_of(plant, N, q), Eigen::all);
    if (!any_nonzero(map))
      continue;
    const Matrix &Qq = setup.config.Q[q];
    if (any_nonzero(Qq))
    {
      Matrix QtA = Matrix::Zero(N * nq, d);
      for (int k = 0; k + 1 < N; ++k)
        QtA.middleRows(k * nq, nq) = Qq * map.middleRows(k * nq, nq);
      ls.cost_weights[q] = 2.0 * QtA.transpose();
    }
    ls.state_maps[q] = std::move(map);
    footprint.insert(q);
  }

  const Matrix F_S = mpc.prediction().F(Eigen::all, ls.columns);
  IndexSet eq_rows;
  for (int row = 0; row < F_S.rows(); ++row)
    if (any_nonzero(F_S.row(row)))
      eq_rows.push_back(row);
  ls.E = F_S(eq_rows, Eigen::all);

  IndexSet kept;
  const Matrix &G = mpc.inequality_matrix();
  for (int row = 0; row < G.rows(); ++row)
  {
    const Matrix coeffs = G(row, ls.columns);
    if (!any_nonzero(coeffs))
      continue;
    const auto &info = mpc.rows()[row];
    LocalStructure::Row lr;
    lr.state = info.state;
    lr.stage = info.stage;
    lr.row = info.row;
    const IndexSet support =
        info.state ? cons.state_row_support(plant, info.row) : cons.input_row_support(plant, info.row);
    for (int j : support)
    {
      if (info.state)
        lr.terms.emplace_back(j, cons.state_rows.row(info.row).segment(plant.state_offset(j), plant.n(j)).transpose());
      else
        lr.terms.emplace_back(j, cons.input_rows.row(info.row).segment(plant.input_offset(j), plant.m(j)).transpose());
      footprint.insert(j);
    }
    lr.rhs = info.state ? cons.state_rhs(info.row) : cons.input_rhs(info.row);
    ls.rows.push_back(std::move(lr));
    kept.push_back(row);
  }
  ls.G = G(kept, ls.columns);

  ls.footprint.assign(footprint.begin(), footprint.end());
  for (int q : ls.footprint)
    if (!std::binary_search(ls.scope.begin(), ls.scope.end(), q))
      throw std::logic_error("local problem of subsystem " + std::to_string(i) + " depends on subsystem " +
                             std::to_string(q) + " outside its communication scope");

  ls.qp = std::make_shared<ParametricQp>(ls.H, ls.E, ls.G);
  return ls;
}

QpProblem LocalProblem::to_qp() const
{
  QpProblem p;
  p.H = structure->H;
  p.g = g;
  p.E = structure->E;
  p.e = e;
  p.G = structure->G;
  p.h = h;
  return p;
}

LocalProblem build_local_problem(const LocalStructure &ls, const IterateView &view)
{
  LocalProblem lp;
  lp.owner = ls.owner;
  lp.structure = &ls;
  const int d = ls.dim();

  lp.current.resize(d);
  for (const auto &[j, slots] : ls.member_slots)
  {
    const Vector &u = view.record(j).inputs;
    if (u.size() != static_cast<Eigen::Index>(slots.size()))
      throw DimensionError("record of subsystem " + std::to_string(j) + " has wrong input length");
    for (std::size_t s = 0; s < slots.size(); ++s)
      lp.current(slots[s]) = u(static_cast<Eigen::Index>(s));
  }

  lp.gradient = ls.R2 * lp.current;
  for (const auto &[q, W] : ls.cost_weights)
    lp.gradient.noalias() += W * view.record(q).states;
  lp.g = lp.gradient - ls.H * lp.current;
  lp.e = ls.E * lp.current;

  Vector slack(ls.rows.size());
  for (std::size_t r = 0; r < ls.rows.size(); ++r)
  {
    const auto &row = ls.rows[r];
    double value = 0.0;
    for (const auto &[j, coeffs] : row.terms)
    {
      const auto w = coeffs.size();
      if (row.state)
        value += coeffs.dot(view.record(j).states.segment((row.stage - 1) * w, w));
      else
        value += coeffs.dot(view.record(j).inputs.segment(row.stage * w, w));
    }
    slack(static_cast<Eigen::Index>(r)) = row.rhs - value;
  }
  lp.h = ls.G * lp.current + slack;
  return lp;
}

LocalSolution solve_local(const LocalProblem &lp)
{
  const auto &ls = *lp.structure;
  LocalSolution out;
  const auto sol = ls.qp->solve(lp.g, lp.e, lp.h, &lp.current);
  out.status = sol.status;
  if (sol.ok() && sol.z.allFinite())
  {
    const Vector d = sol.z - lp.current;
    const double change = 0.5 * d.dot(ls.H * d) + lp.gradient.dot(d);
    if (change <= 0.0)
    {
      out.z = sol.z;
      out.delta = d;
      out.decrease = -change;
      return out;
    }
  }
  out.z = lp.current;
  out.delta = Vector::Zero(lp.current.size());
  out.kept_incumbent = true;
  return out;
}

const char *to_string(Algorithm a) { return a == Algorithm::global ? "global" : "local"; }

const char *to_string(InitStrategy s) { return s == InitStrategy::inner_box ? "box" : "bootstrap"; }

DmpcEngine::DmpcEngine(std::shared_ptr<const CondensedMpc> mpc) : mpc_(std::move(mpc))
{
  const int M = mpc_->plant().size();
  locals_.reserve(M);
  for (int i = 0; i < M; ++i)
    locals_.push_back(build_local_structure(*mpc_, i));
  lambda_ = mpc_->config().weights(M);
}

std::vector<IndexSet> DmpcEngine::scopes() const
{
  std::vector<IndexSet> out;
  for (const auto &l : locals_)
    out.push_back(l.scope);
  return out;
}

JacobiResult jacobi_step_global(const DmpcEngine &engine, const Vector &inputs, const Vector &x)
{
  const auto &mpc = engine.mpc();
  const RecordSet view(make_records(mpc, inputs, x));
  JacobiResult res;
  res.inputs = Vector::Zero(inputs.size());
  for (int i = 0; i < engine.size(); ++i)
  {
    const auto &ls = engine.local(i);
    res.solutions.push_back(solve_local(build_local_problem(ls, view)));
    Vector candidate = inputs;
    candidate(ls.columns) = res.solutions.back().z;
    res.inputs += engine.lambda()[i] * candidate;
  }
  const double rho = inf_norm(res.inputs - inputs);
  res.rho.assign(engine.size(), rho);
  return res;
}

LocalAlgorithm::LocalAlgorithm(const DmpcEngine &engine, Network &network)
    : engine_(engine), network_(network), own_(engine.size()), stores_(engine.size())
{
  if (network.size() != engine.size())
    throw std::invalid_argument("LocalAlgorithm: network size does not match the plant");
}

void LocalAlgorithm::publish(MessageKind kind)
{
  const int round = network_.current_round();
  for (int j = 0; j < engine_.size(); ++j)
    for (int k : engine_.scope(j))
      network_.send(Message{j, k, round, kind, own_[j].inputs, own_[j].states, 0});
  for (auto &m : network_.deliver_round(round))
    stores_[m.recipient].put(m.sender, SubsystemRecord{std::move(m.payload), std::move(m.aux)});
}

void LocalAlgorithm::initialize(const std::vector<SubsystemRecord> &own)
{
  if (static_cast<int>(own.size()) != engine_.size())
    throw DimensionError("LocalAlgorithm::initialize: one record per subsystem is required");
  own_ = own;
  stores_.assign(engine_.size(), ScopedStore{});
  publish(MessageKind::setup);
}

std::vector<double> LocalAlgorithm::iterate()
{
  const int M = engine_.size();
  const auto &lambda = engine_.lambda();

  // a) local solves against the stored records, solutions out to the scope
  const int round = network_.current_round();
  for (int i = 0; i < M; ++i)
  {
    const auto sol = solve_local(build_local_problem(engine_.local(i), stores_[i]));
    for (int k : engine_.scope(i))
      network_.send(Message{i, k, round, MessageKind::local_solution, sol.z, sol.delta, 0});
  }
  const auto received = network_.deliver_round(round);

  // b) merge at every node
  std::vector<Vector> acc(M);
  std::vector<double> weight(M, 0.0);
  std::vector<Vector> states(M);
  for (int j = 0; j < M; ++j)
  {
    acc[j] = Vector::Zero(own_[j].inputs.size());
    states[j] = own_[j].states;
  }
  for (const auto &m : received)
  {
    const int i = m.sender;
    const int j = m.recipient;
    const auto &ls = engine_.local(i);
    if (const auto it = ls.member_slots.find(j); it != ls.member_slots.end())
    {
      acc[j] += lambda[i] * m.payload(it->second);
      weight[j] += lambda[i];
    }
    if (const auto it = ls.state_maps.find(j); it != ls.state_maps.end())
      states[j].noalias() += lambda[i] * (it->second * m.aux);
  }

  // c) progress
  std::vector<double> rho(M);
  for (int j = 0; j < M; ++j)
  {
    Vector next = acc[j] + (1.0 - weight[j]) * own_[j].inputs;
    rho[j] = inf_norm(next - own_[j].inputs);
    own_[j].inputs = std::move(next);
    own_[j].states = std::move(states[j]);
  }

  // d) records out to the scope
  publish(MessageKind::feasible_input);
  return rho;
}

void LocalAlgorithm::shift_and_publish()
{
  const auto &plant = engine_.mpc().plant();
  const int N = engine_.mpc().horizon();
  std::vector<SubsystemRecord> next(engine_.size());
  for (int j = 0; j < engine_.size(); ++j)
  {
    const int nj = plant.n(j);
    const int mj = plant.m(j);
    const auto &rec = own_[j];
    next[j].inputs = Vector::Zero(rec.inputs.size());
    if (N > 1 && mj > 0)
      next[j].inputs.head((N - 1) * mj) = rec.inputs.tail((N - 1) * mj);
    next[j].states.resize(rec.states.size());
    if (N > 1)
      next[j].states.head((N - 1) * nj) = rec.states.tail((N - 1) * nj);
    // x^j_{N+1} under a zero input, from the neighbors' terminal predictions
    Vector terminal = Vector::Zero(nj);
    for (int q : engine_.mpc().setup().graph.neighborhood(j))
      terminal += plant.A().block(plant.state_offset(j), plant.state_offset(q), nj, plant.n(q)) *
                  stores_[j].record(q).states.tail(plant.n(q));
    next[j].states.tail(nj) = terminal;
  }
  own_ = std::move(next);
  publish(MessageKind::setup);
}

Vector LocalAlgorithm::assemble() const { return assemble_inputs(engine_.mpc(), RecordSet(own_)); }

namespace
{

struct StepFunction
{
  std::function<std::pair<Vector, double>()> next; // inputs and rho_max after one iteration
  std::function<long()> messages;
};

DmpcStepResult iterate_to_convergence(const DmpcEngine &engine, const Vector &x, const Vector &warm, int t,
                                      const StepFunction &fn, const IterationObserver &observer)
{
  const auto &mpc = engine.mpc();
  const auto &cfg = mpc.config();
  const auto t0 = Clock::now();
  const long messages0 = fn.messages();

  DmpcStepResult res;
  res.sequence = warm;
  res.initial_value = mpc.cost(warm, x);
  res.value = res.initial_value;
  double rho_max = std::numeric_limits<double>::infinity();
  int p = 0;
  while (p < cfg.p_max && rho_max > cfg.epsilon)
  {
    ++p;
    auto [u, rho] = fn.next();
    rho_max = rho;
    res.sequence = std::move(u);
    res.value = mpc.cost(res.sequence, x);
    IterationRecord rec;
    rec.t = t;
    rec.p = p;
    rec.phi = res.value;
    rec.rho_max = rho_max;
    rec.messages = fn.messages() - messages0;
    rec.wall_time = seconds_since(t0);
    res.trace.push_back(rec);
    if (observer)
      observer(p, res.sequence);
  }
  res.p_used = p;
  res.messages = fn.messages() - messages0;
  res.u = res.sequence.head(mpc.plant().input_dim());
  return res;
}

void require_feasible_warm_start(const CondensedMpc &mpc, const Vector &x, const Vector &warm)
{
  if (warm.size() != mpc.dim())
    throw DimensionError("warm start has " + std::to_string(warm.size()) + " entries, expected " +
                         std::to_string(mpc.dim()));
  const auto rep = check_feasibility(mpc.setup(), x, warm);
  if (!rep.ok(1e-6))
    throw ConfigError("warm start is infeasible (worst constraint residual " + std::to_string(rep.worst()) + ")");
}

StepFunction global_steps(const DmpcEngine &engine, const Vector &x, Vector &current)
{
  StepFunction fn;
  fn.next = [&engine, &x, &current]() {
    auto r = jacobi_step_global(engine, current, x);
    current = r.inputs;
    return std::make_pair(current, r.rho.empty() ? 0.0 : *std::max_element(r.rho.begin(), r.rho.end()));
  };
  fn.messages = [] { return 0L; };
  return fn;
}

StepFunction local_steps(LocalAlgorithm &la, const Network &net)
{
  StepFunction fn;
  fn.next = [&la]() {
    const auto rho = la.iterate();
    return std::make_pair(la.assemble(), rho.empty() ? 0.0 : *std::max_element(rho.begin(), rho.end()));
  };
  fn.messages = [&net] { return net.stats().cumulative; };
  return fn;
}

} // namespace

DmpcStepResult run_dmpc_timestep(const DmpcEngine &engine, const Vector &x, const Vector &warm, Algorithm algorithm,
                                 int t, const IterationObserver &observer)
{
  const auto &mpc = engine.mpc();
  require_feasible_warm_start(mpc, x, warm);
  if (algorithm == Algorithm::global)
  {
    Vector current = warm;
    return iterate_to_convergence(engine, x, warm, t, global_steps(engine, x, current), observer);
  }
  Network net(engine.scopes());
  LocalAlgorithm la(engine, net);
  la.initialize(make_records(mpc, warm, x));
  return iterate_to_convergence(engine, x, warm, t, local_steps(la, net), observer);
}

InitialFeasible initial_feasible(const CondensedMpc &mpc, const Vector &x0, InitStrategy strategy)
{
  InitialFeasible out;
  out.strategy = strategy;
  if (strategy == InitStrategy::bootstrap)
  {
    const auto sol = solve_centralized_step(mpc, x0);
    out.sequence = sol.sequence;
  }
  else
  {
    const auto &plant = mpc.plant();
    const Matrix &F = mpc.prediction().F;
    const Vector e = mpc.equality_rhs(x0);
    Eigen::ColPivHouseholderQR<Matrix> qr(F.transpose());
    qr.setThreshold(1e-10);
    const int rank = static_cast<int>(qr.rank());
    const int d = mpc.dim();
    const Matrix Qf = qr.householderQ();
    const Matrix Z = Qf.rightCols(d - rank);
    const Vector up = F.completeOrthogonalDecomposition().solve(e);
    if (inf_norm(F * up - e) > 1e-8 * (1.0 + inf_norm(e)))
      throw TerminalReachabilityError("inner box: the terminal point is not reachable within the horizon");

    const Matrix &G = mpc.inequality_matrix();
    const Vector h = mpc.inequality_rhs(x0);
    Matrix Ar = G * Z;
    Vector br = h - G * up;
    // rows that do not depend on the null-space coordinates are constant checks
    IndexSet live;
    const double scale = Ar.size() ? std::max(1.0, Ar.cwiseAbs().maxCoeff()) : 1.0;
    for (int r = 0; r < Ar.rows(); ++r)
    {
      if (Ar.cols() > 0 && Ar.row(r).cwiseAbs().maxCoeff() > 1e-12 * scale)
        live.push_back(r);
      else if (br(r) < 0.0)
        throw InfeasibleError("inner box: the feasible set is empty at this state");
    }
    Polytope poly{Ar(live, Eigen::all), br(live)};

    if (Z.cols() == 0)
    {
      out.sequence = up;
    }
    else
    {
      Box box;
      try
      {
        box = max_volume_inner_box(poly);
      }
      catch (const UnboundedBoxError &err)
      {
        throw ConfigError(std::string("inner box unavailable: ") + err.what() +
                          "; the constraints do not bound every input direction, use the bootstrap strategy");
      }
      catch (const EmptyInteriorError &err)
      {
        throw InfeasibleError(std::string("inner box: ") + err.what());
      }
      out.certificate = box_certificate(poly, box);
      out.sequence = up + Z * box.center();

      // per-subsystem boxes exist when every basis vector moves a single subsystem
      std::vector<int> owner(Z.cols(), -1);
      out.decoupled = true;
      for (int c = 0; c < Z.cols() && out.decoupled; ++c)
      {
        for (int j = 0; j < plant.size(); ++j)
        {
          const Vector part = Z.col(c)(stacked_input_columns(plant, mpc.horizon(), {j}));
          if (part.size() && part.cwiseAbs().maxCoeff() > 1e-12)
          {
            if (owner[c] >= 0)
            {
              out.decoupled = false;
              break;
            }
            owner[c] = j;
          }
        }
      }
      if (out.decoupled)
      {
        for (int j = 0; j < plant.size(); ++j)
        {
          IndexSet coords;
          for (int c = 0; c < Z.cols(); ++c)
            if (owner[c] == j)
              coords.push_back(c);
          if (!coords.empty())
            out.subsystem_boxes.emplace_back(j, Box{box.lower(coords), box.widths(coords)});
        }
      }
      else
      {
        out.warning = "the null-space basis of the terminal constraint couples subsystems, so the box does not "
                      "factor into per-subsystem boxes; the centralized box (computable offline) was used";
      }
      out.box = std::move(box);
    }
  }
  out.report = check_feasibility(mpc.setup(), x0, out.sequence);
  out.value = mpc.cost(out.sequence, x0);
  return out;
}

DistributedController::DistributedController(std::shared_ptr<const DmpcEngine> engine, Algorithm algorithm,
                                             Vector initial)
    : engine_(std::move(engine)), algorithm_(algorithm), warm_(std::move(initial))
{
  if (warm_.size() != engine_->mpc().dim())
    throw DimensionError("DistributedController: initial sequence has wrong length");
  if (algorithm_ == Algorithm::local)
    network_ = std::make_unique<Network>(engine_->scopes());
}

std::string DistributedController::name() const { return std::string("dmpc-") + to_string(algorithm_); }

ControlStep DistributedController::step(const Vector &x, int t)
{
  const auto &mpc = engine_->mpc();
  const auto t0 = Clock::now();
  DmpcStepResult res;
  if (algorithm_ == Algorithm::global)
  {
    res = run_dmpc_timestep(*engine_, x, warm_, Algorithm::global, t);
  }
  else
  {
    if (!local_)
    {
      local_ = std::make_unique<LocalAlgorithm>(*engine_, *network_);
      local_->initialize(make_records(mpc, warm_, x));
    }
    else
    {
      local_->shift_and_publish();
    }
    const Vector warm = local_->assemble();
    require_feasible_warm_start(mpc, x, warm);
    res = iterate_to_convergence(*engine_, x, warm, t, local_steps(*local_, *network_), {});
  }
  warm_ = shift_and_pad(res.sequence, mpc.plant().input_dim());

  ControlStep cs;
  cs.u = res.u;
  cs.plan = res.sequence;
  cs.value = res.value;
  cs.p_used = res.p_used;
  cs.messages = res.messages;
  cs.iterations = std::move(res.trace);
  cs.solve_seconds = seconds_since(t0);
  return cs;
}

} // namespace jdmpc
