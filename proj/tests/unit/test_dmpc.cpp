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


#include <doctest.h>

#include "fixtures.hpp"
#include "jdmpc/dmpc.hpp"
#include "jdmpc/oscillators.hpp"
#include "oracles.hpp"

#include <random>

using namespace jdmpc;

namespace
{

// Two decoupled scalar states with two inputs each and N = 1: x1 = x0 + u_a + u_b = 0.
MpcSetup decoupled_pair(int p_max = 20)
{
  std::vector<SubsystemModel> subs(2);
  for (int i = 0; i < 2; ++i)
  {
    subs[i].index = i;
    subs[i].n = 1;
    subs[i].m = 2;
    subs[i].blocks[i] = CouplingBlock{Matrix::Ones(1, 1), Matrix::Ones(1, 2)};
  }
  auto plant = aggregate(subs);
  MpcConfig cfg;
  cfg.horizon = 1;
  cfg.p_max = p_max;
  cfg.Q.assign(2, Matrix::Ones(1, 1));
  cfg.R.assign(2, Matrix::Identity(2, 2));
  return make_setup(plant, StageConstraints::none(plant), cfg);
}

std::shared_ptr<const CondensedMpc> condensed(const MpcSetup &s) { return std::make_shared<const CondensedMpc>(s); }

OscillatorParams chain(int M, int N)
{
  OscillatorParams p;
  p.M = M;
  p.horizon = N;
  return p;
}

Vector global_from_local(const LocalStructure &ls, const Vector &z, const Vector &u)
{
  Vector out = u;
  out(ls.columns) = z;
  return out;
}

} // namespace

TEST_CASE("one Jacobi step on the decoupled pair by hand")
{
  auto mpc = condensed(decoupled_pair());
  const DmpcEngine engine(mpc);
  const Vector x0 = (Vector(2) << 1.0, 2.0).finished();
  // time-major stacking: [u^0_a, u^0_b, u^1_a, u^1_b]
  const Vector warm = (Vector(4) << -1.0, 0.0, -2.0, 0.0).finished();
  const auto r = jacobi_step_global(engine, warm, x0);
  const Vector expected = (Vector(4) << -0.75, -0.25, -1.5, -0.5).finished();
  CHECK(inf_norm(r.inputs - expected) < 1e-12);
  REQUIRE(r.rho.size() == 2);
  CHECK(r.rho[0] == doctest::Approx(0.5));
  CHECK(r.rho[1] == doctest::Approx(0.5));

  // with N^i = {i} the local update is lambda_i z_i + (1 - lambda_i) u_i
  Network net(engine.scopes());
  LocalAlgorithm la(engine, net);
  la.initialize(make_records(*mpc, warm, x0));
  const auto rho = la.iterate();
  CHECK(inf_norm(la.assemble() - expected) < 1e-12);
  CHECK(rho[0] == doctest::Approx(0.25));
  CHECK(rho[1] == doctest::Approx(0.5));
}

TEST_CASE("local structure of an interior oscillator")
{
  auto mpc = condensed(build_benchmark(OscillatorParams{}));
  const auto ls = build_local_structure(*mpc, 10);
  CHECK(ls.members == IndexSet{9, 10, 11});
  CHECK(ls.dim() == 60);
  CHECK(ls.scope == extended_neighborhood(mpc->setup().graph, 10, 21));
  for (int q : ls.footprint)
    CHECK(std::binary_search(ls.scope.begin(), ls.scope.end(), q));
  const auto end = build_local_structure(*mpc, 0);
  CHECK(end.dim() == 40);
}

TEST_CASE("full neighborhood reproduces the centralized problem")
{
  const auto params = chain(3, 6);
  auto setup = build_benchmark(params);
  setup.config.r_opt = 2;
  auto mpc = condensed(setup);
  const auto ls = build_local_structure(*mpc, 1);
  REQUIRE(ls.dim() == mpc->dim());
  const Vector x0 = oscillator_initial_state(params);
  const Vector start = fixture::min_energy_start(setup, x0);
  const RecordSet view(make_records(*mpc, start, x0));
  const auto lp = build_local_problem(ls, view);
  const auto central = build_centralized_qp(*mpc, x0);
  CHECK(lp.structure->H.isApprox(central.H(ls.columns, ls.columns)));
  // same minimizer
  const auto sol = solve_local(lp);
  const auto opt = solve_centralized_step(*mpc, x0);
  CHECK(inf_norm(global_from_local(ls, sol.z, start) - opt.sequence) < 1e-8);
}

TEST_CASE("local solutions match the restricted centralized KKT oracle")
{
  std::mt19937 rng(3);
  for (int k = 0; k < 6; ++k)
  {
    fixture::InstanceOptions o;
    o.M = 2 + k % 2;
    o.N = 3 + k % 2;
    const auto inst = fixture::random_instance(rng, o);
    auto mpc = condensed(inst.setup);
    const DmpcEngine engine(mpc);
    const RecordSet view(make_records(*mpc, inst.start, inst.x0));
    const auto qp = build_centralized_qp(*mpc, inst.x0);
    for (int i = 0; i < engine.size(); ++i)
    {
      const auto &ls = engine.local(i);
      IndexSet rest;
      for (int c = 0; c < mpc->dim(); ++c)
        if (std::find(ls.columns.begin(), ls.columns.end(), c) == ls.columns.end())
          rest.push_back(c);
      const Vector fixed = inst.start(rest);
      QpProblem sub;
      sub.H = qp.H(ls.columns, ls.columns);
      sub.g = qp.g(ls.columns) + qp.H(ls.columns, rest) * fixed;
      sub.E = qp.E(Eigen::all, ls.columns);
      sub.e = qp.e - qp.E(Eigen::all, rest) * fixed;
      sub.G = qp.G(Eigen::all, ls.columns);
      sub.h = qp.h - qp.G(Eigen::all, rest) * fixed;
      if (sub.G.rows() > 14)
        continue; // keep the enumeration small
      const auto ref = oracle::enumerate_active_sets(sub);
      REQUIRE(ref.feasible);
      const auto sol = solve_local(build_local_problem(ls, view));
      CHECK(inf_norm(sol.z - ref.z) < 1e-7);
    }
  }
}

TEST_CASE("local problems read only their scope")
{
  std::mt19937 rng(5);
  fixture::InstanceOptions o;
  o.M = 6;
  o.N = 2;
  const auto inst = fixture::random_instance(rng, o);
  auto mpc = condensed(inst.setup);
  const DmpcEngine engine(mpc);
  const auto records = make_records(*mpc, inst.start, inst.x0);
  for (int i = 0; i < engine.size(); ++i)
  {
    const auto &ls = engine.local(i);
    CHECK(ls.scope == extended_neighborhood(inst.setup.graph, i, o.N + 1));

    const RecordSet base(records);
    TrackingView tracker(base);
    const auto lp = build_local_problem(ls, tracker);
    for (int j : tracker.touched())
      CHECK(std::binary_search(ls.scope.begin(), ls.scope.end(), j));

    // mutating records outside the scope leaves the problem bit-identical
    auto mutated = records;
    for (int j = 0; j < engine.size(); ++j)
      if (!std::binary_search(ls.scope.begin(), ls.scope.end(), j))
      {
        mutated[j].inputs.setConstant(1e6);
        mutated[j].states.setConstant(-1e6);
      }
    const auto lp2 = build_local_problem(ls, RecordSet(mutated));
    CHECK(lp.g == lp2.g);
    CHECK(lp.e == lp2.e);
    CHECK(lp.h == lp2.h);
    CHECK(lp.current == lp2.current);
  }

  ScopedStore store;
  store.put(1, records[1]);
  CHECK(store.has(1));
  CHECK_THROWS_AS(store.record(0), std::logic_error);
}

TEST_CASE("global and local algorithms agree")
{
  std::mt19937 rng(17);
  for (int k = 0; k < 8; ++k)
  {
    fixture::InstanceOptions o;
    o.M = 3 + k % 4;
    o.N = 2 + k % 5;
    o.chain = k % 2 == 0;
    o.r_opt = 1 + k % 3 / 2;
    const auto inst = fixture::random_instance(rng, o);
    auto mpc = condensed(inst.setup);
    const DmpcEngine engine(mpc);
    Network net(engine.scopes());
    LocalAlgorithm la(engine, net);
    la.initialize(make_records(*mpc, inst.start, inst.x0));
    Vector u = inst.start;
    double phi = mpc->cost(u, inst.x0);
    for (int p = 0; p < 10; ++p)
    {
      const auto g = jacobi_step_global(engine, u, inst.x0);
      u = g.inputs;
      la.iterate();
      CHECK(inf_norm(u - la.assemble()) <= 1e-10);
      CHECK(check_feasibility(inst.setup, inst.x0, u).ok(1e-7));
      const double next = mpc->cost(u, inst.x0);
      CHECK(next <= phi + 1e-8);
      phi = next;
      // predicted states carried in the records stay consistent with the inputs
      const auto exact = make_records(*mpc, u, inst.x0);
      for (int j = 0; j < engine.size(); ++j)
        CHECK(inf_norm(la.own(j).states - exact[j].states) < 1e-9);
    }
  }
}

TEST_CASE("message accounting on the four-node chain")
{
  const auto setup = fixture::scalar_chain(4, 1, 2);
  auto mpc = condensed(setup);
  auto engine = std::make_shared<const DmpcEngine>(mpc);
  long scope_total = 0;
  for (const auto &s : engine->scopes())
    scope_total += static_cast<long>(s.size());
  CHECK(scope_total == 14);

  const Vector x0 = (Vector(4) << 1.0, -0.5, 0.8, 0.3).finished();
  const Vector warm = fixture::scalar_chain_start(setup, x0);
  const auto res = run_dmpc_timestep(*engine, x0, warm, Algorithm::local);
  CHECK(res.p_used == 2);
  CHECK(res.messages == 56);

  DistributedController ctl(engine, Algorithm::local, warm);
  const auto step = ctl.step(x0, 0);
  CHECK(step.messages == step.p_used * 2 * scope_total);
  const auto stats = ctl.network()->stats();
  CHECK(stats.cumulative == 56);
  CHECK(stats.setup_messages == 14);
  CHECK(stats.per_round == std::vector<long>{14, 14, 14, 14});
}

TEST_CASE("zero iterations send nothing and a loose epsilon stops after one")
{
  const auto params = chain(4, 6);
  auto setup = build_benchmark(params);
  setup.config.epsilon = 1e9;
  auto mpc = condensed(setup);
  const DmpcEngine engine(mpc);
  const Vector x0 = oscillator_initial_state(params);
  const Vector warm = fixture::min_energy_start(setup, x0);
  for (auto alg : {Algorithm::global, Algorithm::local})
  {
    const auto res = run_dmpc_timestep(engine, x0, warm, alg);
    CHECK(res.p_used == 1);
    CHECK(res.value <= res.initial_value + 1e-8);
    CHECK(check_feasibility(setup, x0, res.sequence).ok());
  }
  Network net(engine.scopes());
  CHECK(net.stats().cumulative == 0);
}

TEST_CASE("the optimum is a fixed point")
{
  const auto params = chain(4, 6);
  const auto setup = build_benchmark(params);
  auto mpc = condensed(setup);
  const DmpcEngine engine(mpc);
  const Vector x0 = oscillator_initial_state(params);
  const auto opt = solve_centralized_step(*mpc, x0);
  const auto r = jacobi_step_global(engine, opt.sequence, x0);
  CHECK(inf_norm(r.inputs - opt.sequence) < 1e-9);
  for (double rho : r.rho)
    CHECK(rho < 1e-9);
}

TEST_CASE("no room to move keeps the iterate")
{
  // N = 1 with one input per scalar state: the terminal equality pins every input
  std::vector<SubsystemModel> subs(3);
  for (int i = 0; i < 3; ++i)
  {
    subs[i].index = i;
    subs[i].n = 1;
    subs[i].m = 1;
    subs[i].blocks[i] = CouplingBlock{Matrix::Constant(1, 1, 0.5), Matrix::Ones(1, 1)};
    if (i > 0)
      subs[i].blocks[i - 1] = CouplingBlock{Matrix::Constant(1, 1, 0.1), Matrix()};
  }
  auto plant = aggregate(subs);
  MpcConfig cfg;
  cfg.horizon = 1;
  cfg.Q.assign(3, Matrix::Ones(1, 1));
  cfg.R.assign(3, Matrix::Ones(1, 1));
  auto mpc = condensed(make_setup(plant, StageConstraints::none(plant), cfg));
  const DmpcEngine engine(mpc);
  const Vector x0 = Vector::Ones(3);
  const auto opt = solve_centralized_step(*mpc, x0);
  const RecordSet view(make_records(*mpc, opt.sequence, x0));
  const auto sol = solve_local(build_local_problem(engine.local(1), view));
  CHECK(sol.status == QpStatus::degenerate_feasible_point);
  CHECK(inf_norm(sol.delta) < 1e-12);
}

TEST_CASE("iterations converge to the centralized optimum")
{
  const auto params = chain(4, 8);
  auto setup = build_benchmark(params);
  setup.config.p_max = 100;
  auto mpc = condensed(setup);
  const DmpcEngine engine(mpc);
  const Vector x0 = oscillator_initial_state(params);
  const auto opt = solve_centralized_step(*mpc, x0);
  const Vector warm = fixture::min_energy_start(setup, x0);
  std::vector<double> phis;
  const auto res = run_dmpc_timestep(engine, x0, warm, Algorithm::local, 0,
                                     [&](int, const Vector &u) { phis.push_back(mpc->cost(u, x0)); });
  CHECK(res.value <= opt.value * (1.0 + 1e-4));
  CHECK(res.trace.size() == phis.size());
  CHECK(res.trace.back().p == res.p_used);
  for (std::size_t k = 1; k < phis.size(); ++k)
    CHECK(phis[k] <= phis[k - 1] + 1e-8);
}

TEST_CASE("infeasible warm start is a configuration error")
{
  const auto params = chain(3, 5);
  auto mpc = condensed(build_benchmark(params));
  const DmpcEngine engine(mpc);
  const Vector x0 = oscillator_initial_state(params);
  CHECK_THROWS_AS(run_dmpc_timestep(engine, x0, Vector::Zero(mpc->dim()), Algorithm::global), ConfigError);
  CHECK_THROWS_AS(run_dmpc_timestep(engine, x0, Vector::Zero(3), Algorithm::global), DimensionError);
}

TEST_CASE("shifted plans stay feasible and the first iterate obeys the decrease bound")
{
  const auto params = chain(5, 10);
  const auto setup = build_benchmark(params);
  auto mpc = condensed(setup);
  auto engine = std::make_shared<const DmpcEngine>(mpc);
  const Vector x0 = oscillator_initial_state(params);
  const Vector warm = fixture::min_energy_start(setup, x0);
  for (auto alg : {Algorithm::global, Algorithm::local})
  {
    DistributedController ctl(engine, alg, warm);
    CHECK(ctl.name() == std::string("dmpc-") + to_string(alg));
    const auto tr = run_closed_loop(mpc->plant(), ctl, x0, 25);
    const Matrix Q = mpc->stage_Q();
    const Matrix R = mpc->stage_R();
    for (std::size_t t = 0; t + 1 < tr.steps.size(); ++t)
    {
      const auto &s = tr.steps[t];
      const auto &n = tr.steps[t + 1];
      const double bound = s.value - s.x.dot(Q * s.x) - s.u.dot(R * s.u);
      CHECK(check_feasibility(setup, n.x, shift_and_pad(s.plan, mpc->plant().input_dim())).ok());
      CHECK(n.value <= bound + 1e-6);
    }
    for (const auto &it : tr.iterations)
      if (it.p == 1 && it.t > 0)
      {
        const auto &prev = tr.steps[it.t - 1];
        CHECK(it.phi <= prev.value - prev.x.dot(Q * prev.x) - prev.u.dot(R * prev.u) + 1e-6);
      }
  }
}

TEST_CASE("global and local controllers produce the same closed loop")
{
  const auto params = chain(4, 6);
  const auto setup = build_benchmark(params);
  auto mpc = condensed(setup);
  auto engine = std::make_shared<const DmpcEngine>(mpc);
  const Vector x0 = oscillator_initial_state(params);
  const Vector warm = fixture::min_energy_start(setup, x0);
  auto fixed = setup;
  fixed.config.epsilon = 0.0;
  fixed.config.p_max = 5;
  auto engine_fixed = std::make_shared<const DmpcEngine>(condensed(fixed));
  DistributedController a(engine_fixed, Algorithm::global, warm);
  DistributedController b(engine_fixed, Algorithm::local, warm);
  const auto ta = run_closed_loop(mpc->plant(), a, x0, 15);
  const auto tb = run_closed_loop(mpc->plant(), b, x0, 15);
  for (std::size_t t = 0; t < ta.steps.size(); ++t)
    CHECK(inf_norm(ta.steps[t].u - tb.steps[t].u) < 1e-9);
}

TEST_CASE("initial feasible sequences")
{
  SUBCASE("zero state")
  {
    std::mt19937 rng(2);
    fixture::InstanceOptions o;
    o.M = 2;
    o.N = 3;
    o.coupled_rows = false;
    const auto inst = fixture::random_instance(rng, o);
    const CondensedMpc mpc(inst.setup);
    const Vector zero = Vector::Zero(4);
    const auto boot = initial_feasible(mpc, zero, InitStrategy::bootstrap);
    CHECK(inf_norm(boot.sequence) < 1e-12);
  }
  SUBCASE("box strategy on a pair with input bounds")
  {
    std::mt19937 rng(4);
    fixture::InstanceOptions o;
    o.M = 2;
    o.N = 4;
    o.coupled_rows = false;
    const auto inst = fixture::random_instance(rng, o);
    const CondensedMpc mpc(inst.setup);
    const auto init = initial_feasible(mpc, inst.x0, InitStrategy::inner_box);
    REQUIRE(init.box.has_value());
    CHECK(init.certificate <= 1e-9);
    CHECK(init.report.ok(1e-7));
    CHECK(check_feasibility(inst.setup, inst.x0, init.sequence).ok(1e-7));
    CHECK((init.box->widths.array() > 0.0).all());
    CHECK((init.decoupled || !init.warning.empty()));

    const auto zero = initial_feasible(mpc, Vector::Zero(4), InitStrategy::inner_box);
    CHECK(zero.report.ok(1e-7));
  }
  SUBCASE("terminal constraint leaves no freedom")
  {
    // N = 2 with two states and one input per subsystem: F is square and the sequence is unique
    std::mt19937 rng(6);
    fixture::InstanceOptions o;
    o.M = 3;
    o.N = 2;
    const auto inst = fixture::random_instance(rng, o);
    const CondensedMpc mpc(inst.setup);
    const auto init = initial_feasible(mpc, inst.x0, InitStrategy::inner_box);
    CHECK_FALSE(init.box.has_value());
    CHECK(init.report.ok(1e-7));
    CHECK(inf_norm(init.sequence - solve_centralized_step(mpc, inst.x0).sequence) < 1e-8);
  }
  SUBCASE("bootstrap on the benchmark is the centralized optimum")
  {
    const auto params = chain(6, 10);
    const CondensedMpc mpc(build_benchmark(params));
    const Vector x0 = oscillator_initial_state(params);
    const auto init = initial_feasible(mpc, x0, InitStrategy::bootstrap);
    const auto opt = solve_centralized_step(mpc, x0);
    CHECK(inf_norm(init.sequence - opt.sequence) < 1e-12);
    CHECK(init.value == doctest::Approx(opt.value));
    // no input bounds: the reduced polytope is unbounded
    CHECK_THROWS_AS(initial_feasible(mpc, x0, InitStrategy::inner_box), ConfigError);
  }
  SUBCASE("empty feasible set")
  {
    SubsystemModel s;
    s.n = 2;
    s.m = 1;
    s.blocks[0] = CouplingBlock{(Matrix(2, 2) << 1, 1, 0, 1).finished(), (Matrix(2, 1) << 0, 1).finished()};
    auto plant = aggregate({s});
    auto cons = StageConstraints::none(plant);
    cons.add_input_bounds(plant, 0, Vector::Constant(1, -0.1), Vector::Constant(1, 0.1));
    MpcConfig cfg;
    cfg.horizon = 4;
    cfg.Q = {Matrix::Identity(2, 2)};
    cfg.R = {Matrix::Ones(1, 1)};
    const CondensedMpc mpc(make_setup(plant, cons, cfg));
    const Vector x0 = (Vector(2) << 10.0, 0.0).finished();
    CHECK_THROWS_AS(initial_feasible(mpc, x0, InitStrategy::inner_box), InfeasibleError);
    CHECK_THROWS_AS(initial_feasible(mpc, x0, InitStrategy::bootstrap), InfeasibleError);
  }
}

TEST_CASE("iterates stay bounded by the input constraints")
{
  std::mt19937 rng(23);
  fixture::InstanceOptions o;
  o.M = 4;
  o.N = 4;
  o.p_max = 60;
  o.epsilon = 0.0;
  const auto inst = fixture::random_instance(rng, o);
  auto mpc = condensed(inst.setup);
  const DmpcEngine engine(mpc);
  const double bound = inst.setup.constraints.input_rhs.maxCoeff();
  const auto res = run_dmpc_timestep(engine, inst.x0, inst.start, Algorithm::global, 0, [&](int, const Vector &u) {
    CHECK(inf_norm(u) <= bound + 1e-7);
  });
  CHECK(res.p_used == 60);
}
