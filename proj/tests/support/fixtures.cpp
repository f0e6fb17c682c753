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


#include "fixtures.hpp"

#include "oracles.hpp"

namespace jdmpc::fixture
{

Vector min_energy_start(const MpcSetup &setup, const Vector &x0)
{
  MpcConfig cfg = setup.config;
  for (auto &Q : cfg.Q)
    Q.setZero();
  const CondensedMpc mpc(make_setup(setup.plant, setup.constraints, cfg));
  return solve_centralized_step(mpc, x0).sequence;
}

Instance random_instance(std::mt19937 &rng, const InstanceOptions &o)
{
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int attempt = 0; attempt < 200; ++attempt)
  {
    std::vector<std::pair<int, int>> edges;
    for (int i = 0; i < o.M; ++i)
      for (int j = i + 1; j < o.M; ++j)
        if (o.chain ? j == i + 1 : unit(rng) < 0.35)
          edges.emplace_back(i, j);

    std::vector<SubsystemModel> subs(o.M);
    for (int i = 0; i < o.M; ++i)
    {
      subs[i].index = i;
      subs[i].n = 2;
      subs[i].m = 1;
      Matrix A = Matrix::Identity(2, 2) + oracle::random_matrix(rng, 2, 2, 0.3);
      subs[i].blocks[i] = CouplingBlock{A, oracle::random_matrix(rng, 2, 1, 1.0)};
    }
    for (const auto &[i, j] : edges)
    {
      subs[i].blocks[j] = CouplingBlock{oracle::random_matrix(rng, 2, 2, 0.15), Matrix()};
      subs[j].blocks[i] = CouplingBlock{oracle::random_matrix(rng, 2, 2, 0.15), Matrix()};
    }
    const PlantModel plant = aggregate(subs);

    auto cons = StageConstraints::none(plant);
    if (o.input_bounds)
      for (int i = 0; i < o.M; ++i)
      {
        const double U = 1.0 + 2.0 * unit(rng);
        cons.add_input_bounds(plant, i, Vector::Constant(1, -U), Vector::Constant(1, U));
      }
    if (o.coupled_rows)
      for (const auto &[i, j] : edges)
        cons.add_state_row(plant, {{i, oracle::random_vector(rng, 2)}, {j, oracle::random_vector(rng, 2)}},
                           1.5 + 2.0 * unit(rng));

    MpcConfig cfg;
    cfg.horizon = o.N;
    cfg.p_max = o.p_max;
    cfg.epsilon = o.epsilon;
    cfg.r_opt = o.r_opt;
    for (int i = 0; i < o.M; ++i)
    {
      Matrix Q = Matrix::Zero(2, 2);
      Q(0, 0) = 0.5 + 2.0 * unit(rng);
      Q(1, 1) = 0.1 + unit(rng);
      cfg.Q.push_back(Q);
      cfg.R.push_back(Matrix::Constant(1, 1, 0.2 + unit(rng)));
    }

    Instance inst{make_setup(plant, cons, cfg), oracle::random_vector(rng, 2 * o.M, 0.4), Vector()};
    try
    {
      inst.start = min_energy_start(inst.setup, inst.x0);
      solve_centralized_step(CondensedMpc(inst.setup), inst.x0);
    }
    catch (const InfeasibleError &)
    {
      continue;
    }
    return inst;
  }
  throw std::runtime_error("random_instance: no feasible instance found");
}

MpcSetup scalar_chain(int M, int N, int p_max)
{
  std::vector<SubsystemModel> subs(M);
  for (int i = 0; i < M; ++i)
  {
    subs[i].index = i;
    subs[i].n = 1;
    subs[i].m = 2;
    subs[i].blocks[i] = CouplingBlock{Matrix::Constant(1, 1, 0.9), (Matrix(1, 2) << 1.0, 0.5).finished()};
    if (i > 0)
      subs[i].blocks[i - 1] = CouplingBlock{Matrix::Constant(1, 1, 0.2), Matrix()};
    if (i + 1 < M)
      subs[i].blocks[i + 1] = CouplingBlock{Matrix::Constant(1, 1, 0.2), Matrix()};
  }
  auto plant = aggregate(subs);
  auto cons = StageConstraints::none(plant);
  MpcConfig cfg;
  cfg.horizon = N;
  cfg.p_max = p_max;
  cfg.epsilon = 0.0;
  cfg.Q.assign(M, Matrix::Identity(1, 1));
  cfg.R.assign(M, Matrix::Identity(2, 2));
  return make_setup(std::move(plant), std::move(cons), std::move(cfg));
}

Vector scalar_chain_start(const MpcSetup &setup, const Vector &x0)
{
  // B_ii = [1, 0.5], so u^i = (-(A x0)_i, 0) reaches x_1 = 0 but is not the minimum-energy split
  const Vector ax = setup.plant.A() * x0;
  Vector u = Vector::Zero(setup.plant.input_dim());
  for (int i = 0; i < setup.plant.size(); ++i)
    u(setup.plant.input_offset(i)) = -ax(i);
  return u;
}

} // namespace jdmpc::fixture
