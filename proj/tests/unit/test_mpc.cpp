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
#include "jdmpc/mpc.hpp"
#include "jdmpc/oscillators.hpp"
#include "oracles.hpp"

#include <random>

using namespace jdmpc;

namespace
{

MpcSetup scalar_integrator(int N)
{
  SubsystemModel s;
  s.n = 1;
  s.m = 1;
  s.blocks[0] = CouplingBlock{Matrix::Ones(1, 1), Matrix::Ones(1, 1)};
  auto plant = aggregate({s});
  MpcConfig cfg;
  cfg.horizon = N;
  cfg.Q = {Matrix::Ones(1, 1)};
  cfg.R = {Matrix::Ones(1, 1)};
  return make_setup(plant, StageConstraints::none(plant), cfg);
}

MpcSetup double_integrator(int N, double umax)
{
  SubsystemModel s;
  s.n = 2;
  s.m = 1;
  s.blocks[0] = CouplingBlock{(Matrix(2, 2) << 1, 1, 0, 1).finished(), (Matrix(2, 1) << 0, 1).finished()};
  auto plant = aggregate({s});
  auto cons = StageConstraints::none(plant);
  cons.add_input_bounds(plant, 0, Vector::Constant(1, -umax), Vector::Constant(1, umax));
  MpcConfig cfg;
  cfg.horizon = N;
  cfg.Q = {Matrix::Identity(2, 2)};
  cfg.R = {Matrix::Ones(1, 1)};
  return make_setup(plant, cons, cfg);
}

OscillatorParams small_chain(int M, int N)
{
  OscillatorParams p;
  p.M = M;
  p.horizon = N;
  return p;
}

} // namespace

TEST_CASE("configuration validation")
{
  auto setup = scalar_integrator(2);
  auto bad = [&](auto mutate) {
    MpcConfig cfg = setup.config;
    mutate(cfg);
    CHECK_THROWS_AS(make_setup(setup.plant, setup.constraints, cfg), ConfigError);
  };
  bad([](MpcConfig &c) { c.horizon = 0; });
  bad([](MpcConfig &c) { c.R = {Matrix::Zero(1, 1)}; });
  bad([](MpcConfig &c) { c.Q = {-Matrix::Ones(1, 1)}; });
  bad([](MpcConfig &c) { c.p_max = 0; });
  bad([](MpcConfig &c) { c.epsilon = -1.0; });
  bad([](MpcConfig &c) { c.r_opt = 0; });
  bad([](MpcConfig &c) { c.lambda = {0.5}; });
  bad([](MpcConfig &c) { c.Q.clear(); });

  // epsilon = 0 runs a fixed iteration budget
  MpcConfig ok = setup.config;
  ok.epsilon = 0.0;
  CHECK_NOTHROW(make_setup(setup.plant, setup.constraints, ok));

  MpcConfig two;
  two.horizon = 2;
  auto osc = build_benchmark(small_chain(2, 4));
  two = osc.config;
  two.lambda = {0.3, 0.6};
  CHECK_THROWS_AS(make_setup(osc.plant, osc.constraints, two), ConfigError);
  two.lambda = {0.25, 0.75};
  CHECK(make_setup(osc.plant, osc.constraints, two).config.weights(2)[1] == doctest::Approx(0.75));
  CHECK(osc.config.weights(2)[0] == doctest::Approx(0.5));
}

TEST_CASE("constraints must admit the origin")
{
  auto setup = double_integrator(3, 1.0);
  auto cons = setup.constraints;
  cons.input_rhs(0) = -0.1;
  CHECK_THROWS_AS(make_setup(setup.plant, cons, setup.config), ConfigError);
}

TEST_CASE("owned constraint rows couple the owner only")
{
  auto osc = build_benchmark(small_chain(5, 4));
  CHECK(osc.graph.neighborhood(2) == IndexSet{1, 2, 3});
  CHECK(osc.graph.neighborhood(0) == IndexSet{0, 1});
  CHECK(osc.graph.neighborhood(4) == IndexSet{3, 4});

  // the same rows without an owner make the outer pair adjacent
  auto cons = StageConstraints::none(osc.plant);
  for (int r = 0; r < osc.constraints.num_state_rows(); ++r)
  {
    cons.state_rows.conservativeResize(r + 1, osc.plant.state_dim());
    cons.state_rows.row(r) = osc.constraints.state_rows.row(r);
  }
  cons.state_rhs = osc.constraints.state_rhs;
  const auto clique = make_setup(osc.plant, cons, osc.config);
  CHECK(clique.graph.neighborhood(2) == IndexSet{0, 1, 2, 3, 4});

  auto wrong = StageConstraints::none(osc.plant);
  wrong.add_state_row(osc.plant, {{0, Vector::Ones(2)}}, 1.0, 3);
  CHECK_THROWS_AS(make_setup(osc.plant, wrong, osc.config), ConfigError);
}

TEST_CASE("zero state gives the zero plan")
{
  const CondensedMpc mpc(double_integrator(4, 1.0));
  const auto sol = solve_centralized_step(mpc, Vector::Zero(2));
  CHECK(inf_norm(sol.sequence) < 1e-12);
  CHECK(sol.value == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("scalar integrator with N = 2 against the hand KKT solution")
{
  // x1 = 1 + u0, x2 = x1 + u1 = 0, V = x0^2 + x1^2 + u0^2 + u1^2  =>  u0 = -2/3, u1 = -1/3, V = 5/3
  // Only x1 is weighted in the condensed cost, so H = 2 (diag(1, 0) + I).
  const CondensedMpc mpc(scalar_integrator(2));
  const Vector x0 = Vector::Ones(1);
  const auto sol = solve_centralized_step(mpc, x0);
  CHECK(sol.sequence(0) == doctest::Approx(-2.0 / 3.0).epsilon(1e-12));
  CHECK(sol.sequence(1) == doctest::Approx(-1.0 / 3.0).epsilon(1e-12));
  CHECK(sol.value == doctest::Approx(5.0 / 3.0).epsilon(1e-12));
  CHECK(mpc.cost(sol.sequence, x0) == doctest::Approx(5.0 / 3.0).epsilon(1e-12));

  const auto qp = build_centralized_qp(mpc, x0);
  CHECK(qp.H.isApprox((Matrix(2, 2) << 4, 0, 0, 2).finished()));
  CHECK(qp.g.isApprox((Vector(2) << 2, 0).finished()));
  CHECK(qp.E.isApprox((Matrix(1, 2) << 1, 1).finished()));
  CHECK(qp.e(0) == doctest::Approx(-1.0));
}

TEST_CASE("unreachable terminal point is reported")
{
  const CondensedMpc mpc(double_integrator(2, 0.1));
  CHECK_THROWS_AS(solve_centralized_step(mpc, (Vector(2) << 10.0, 0.0).finished()), TerminalReachabilityError);
  try
  {
    solve_centralized_step(mpc, (Vector(2) << 10.0, 0.0).finished());
  }
  catch (const TerminalReachabilityError &err)
  {
    CHECK(std::string(err.what()).find("larger N") != std::string::npos);
  }
}

TEST_CASE("two-oscillator chain matches an independent QP solve")
{
  const auto setup = build_benchmark(small_chain(2, 10));
  const CondensedMpc mpc(setup);
  const Vector x0 = (Vector(4) << 1, 0, -1, 0).finished();
  const auto sol = solve_centralized_step(mpc, x0);
  const auto ref = solve_qp(build_centralized_qp(mpc, x0));
  REQUIRE(ref.ok());
  CHECK(inf_norm(sol.sequence - ref.z) < 1e-8);
  CHECK(sol.value == doctest::Approx(ref.objective).epsilon(1e-10));
  CHECK(check_feasibility(setup, x0, sol.sequence).ok());
}

TEST_CASE("benchmark Hessian is positive definite with dimension 800")
{
  const CondensedMpc mpc(build_benchmark(OscillatorParams{}));
  CHECK(mpc.dim() == 800);
  Eigen::LLT<Matrix> llt(mpc.hessian());
  CHECK(llt.info() == Eigen::Success);
}

TEST_CASE("objective with its constant equals the simulated stage cost")
{
  std::mt19937 rng(11);
  for (int k = 0; k < 20; ++k)
  {
    fixture::InstanceOptions o;
    o.M = 2 + k % 3;
    o.N = 3 + k % 4;
    const auto inst = fixture::random_instance(rng, o);
    const CondensedMpc mpc(inst.setup);
    const Vector u = oracle::random_vector(rng, mpc.dim(), 2.0);
    const Vector x = oracle::random_vector(rng, inst.setup.plant.state_dim());
    const double sim = trajectory_cost(inst.setup, x, u);
    CHECK(build_centralized_qp(mpc, x).objective(u) == doctest::Approx(sim).epsilon(1e-10));
    CHECK(mpc.cost(u, x) == doctest::Approx(sim).epsilon(1e-12));

    const auto sol = solve_centralized_step(mpc, inst.x0);
    CHECK(inf_norm(mpc.prediction().terminal(sol.sequence, inst.x0)) <= 1e-7);
    CHECK(check_feasibility(inst.setup, inst.x0, sol.sequence).ok());
    CHECK(sol.value == doctest::Approx(trajectory_cost(inst.setup, inst.x0, sol.sequence)).epsilon(1e-8));
  }
}

TEST_CASE("inequality rows follow the stage order")
{
  const auto setup = build_benchmark(small_chain(4, 5));
  const CondensedMpc mpc(setup);
  // 2 (M - 2) state rows for stages 1..N-1
  CHECK(mpc.inequality_matrix().rows() == 2 * 2 * 4);
  int last = 0;
  for (const auto &r : mpc.rows())
  {
    CHECK(r.state);
    CHECK(r.stage >= last);
    last = r.stage;
  }
  CHECK(mpc.rows().front().stage == 1);
  CHECK(mpc.rows().back().stage == 4);
}

TEST_CASE("closed loop from the origin stays at the origin")
{
  auto mpc = std::make_shared<const CondensedMpc>(double_integrator(4, 1.0));
  CentralizedController ctl(mpc);
  const auto tr = run_closed_loop(mpc->plant(), ctl, Vector::Zero(2), 5);
  REQUIRE(tr.steps.size() == 5);
  for (const auto &s : tr.steps)
  {
    CHECK(inf_norm(s.x) == 0.0);
    CHECK(inf_norm(s.u) < 1e-14);
  }
}

TEST_CASE("zero controller follows the autonomous decay")
{
  auto setup = build_benchmark(small_chain(3, 5));
  auto mpc = std::make_shared<const CondensedMpc>(setup);
  ZeroController ctl(mpc);
  const Vector x0 = oscillator_initial_state(small_chain(3, 5));
  const auto tr = run_closed_loop(mpc->plant(), ctl, x0, 10);
  Vector x = x0;
  for (const auto &s : tr.steps)
  {
    CHECK(inf_norm(s.x - x) < 1e-12);
    x = setup.plant.A() * x;
  }
  CHECK(inf_norm(tr.final_state - x) < 1e-12);
}

TEST_CASE("centralized closed loop decreases V and logs consistent traces")
{
  const auto params = small_chain(6, 10);
  const auto setup = build_benchmark(params);
  auto mpc = std::make_shared<const CondensedMpc>(setup);
  CentralizedController ctl(mpc);
  const Vector x0 = oscillator_initial_state(params);
  const auto tr = run_closed_loop(mpc->plant(), ctl, x0, 40);
  const Matrix Q = mpc->stage_Q();
  const Matrix R = mpc->stage_R();
  for (std::size_t t = 0; t < tr.steps.size(); ++t)
  {
    const auto &s = tr.steps[t];
    CHECK(s.value == doctest::Approx(trajectory_cost(setup, s.x, s.plan)).epsilon(1e-10));
    if (t + 1 < tr.steps.size())
    {
      const auto &n = tr.steps[t + 1];
      CHECK(inf_norm(n.x - (setup.plant.A() * s.x + setup.plant.B() * s.u)) < 1e-10);
      CHECK(n.value <= s.value - s.x.dot(Q * s.x) - s.u.dot(R * s.u) + 1e-6);
    }
  }
  CHECK(tr.total_cost() > 0.0);
}

TEST_CASE("oracle values are logged beside the controller")
{
  const auto params = small_chain(3, 8);
  auto mpc = std::make_shared<const CondensedMpc>(build_benchmark(params));
  CentralizedController ctl(mpc);
  CentralizedController oracle(mpc);
  const auto tr = run_closed_loop(mpc->plant(), ctl, oscillator_initial_state(params), 4, &oracle);
  for (const auto &s : tr.steps)
  {
    REQUIRE(s.oracle_value.has_value());
    CHECK(*s.oracle_value == doctest::Approx(s.value).epsilon(1e-9));
  }
}

TEST_CASE("controller failure carries the step index")
{
  auto mpc = std::make_shared<const CondensedMpc>(double_integrator(2, 0.1));
  CentralizedController ctl(mpc);
  try
  {
    run_closed_loop(mpc->plant(), ctl, (Vector(2) << 10.0, 0.0).finished(), 3);
    FAIL("expected a closed-loop error");
  }
  catch (const ClosedLoopError &err)
  {
    CHECK(err.step() == 0);
    CHECK(err.infeasible());
  }
}

TEST_CASE("shift and pad")
{
  const Vector u = (Vector(6) << 1, 2, 3, 4, 5, 6).finished();
  CHECK(shift_and_pad(u, 2) == (Vector(6) << 3, 4, 5, 6, 0, 0).finished());
  CHECK_THROWS(shift_and_pad(u, 4));
}
