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


#include "jdmpc/oscillators.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <limits>
#include <thread>

namespace jdmpc
{

void OscillatorParams::validate() const
{
  if (M < 2)
    throw std::invalid_argument("oscillator chain needs M >= 2, got " + std::to_string(M));
  const std::pair<const char *, double> positive[] = {{"k1", k1}, {"k2", k2}, {"mass", mass}, {"fs", fs},
                                                      {"Ts", Ts}, {"bound", bound}, {"r", r}};
  for (const auto &[name, value] : positive)
    if (!(value > 0.0))
      throw ConfigError(std::string("oscillator parameter ") + name + " must be positive");
  if (q_position < 0.0 || q_velocity < 0.0)
    throw ConfigError("oscillator state weights must be nonnegative");
  if (horizon < 1)
    throw ConfigError("horizon must be at least 1");
  if (steps < 0)
    throw ConfigError("steps must be nonnegative");
  if (x0 && x0->size() != 2 * M)
    throw DimensionError("oscillator x0 must have 2M entries");
}

PlantModel oscillator_plant(const OscillatorParams &params)
{
  params.validate();
  const double Ts = params.Ts;
  Matrix Aii(2, 2);
  Aii << 1.0, Ts, Ts * (params.k1 - 2.0 * params.k2), 1.0 - Ts * params.fs;
  Matrix Aij = Matrix::Zero(2, 2);
  Aij(1, 0) = Ts * params.k2;
  Matrix Bii(2, 1);
  Bii << 0.0, Ts;

  std::vector<SubsystemModel> subs(params.M);
  for (int i = 0; i < params.M; ++i)
  {
    subs[i].index = i;
    subs[i].n = 2;
    subs[i].m = 1;
    subs[i].blocks[i] = CouplingBlock{Aii, Bii};
    if (i > 0)
      subs[i].blocks[i - 1] = CouplingBlock{Aij, Matrix()};
    if (i + 1 < params.M)
      subs[i].blocks[i + 1] = CouplingBlock{Aij, Matrix()};
  }
  return aggregate(std::move(subs));
}

StageConstraints oscillator_constraints(const PlantModel &plant, const OscillatorParams &params)
{
  auto cons = StageConstraints::none(plant);
  const Vector half = (Vector(2) << -0.5, 0.0).finished();
  const Vector one = (Vector(2) << 1.0, 0.0).finished();
  for (int i = 1; i + 1 < params.M; ++i)
  {
    cons.add_state_row(plant, {{i - 1, half}, {i, one}, {i + 1, half}}, params.bound, i);
    cons.add_state_row(plant, {{i - 1, -half}, {i, -one}, {i + 1, -half}}, params.bound, i);
  }
  return cons;
}

MpcSetup build_benchmark(const OscillatorParams &params)
{
  auto plant = oscillator_plant(params);
  auto cons = oscillator_constraints(plant, params);
  MpcConfig cfg;
  cfg.horizon = params.horizon;
  Matrix Q = Matrix::Zero(2, 2);
  Q(0, 0) = params.q_position;
  Q(1, 1) = params.q_velocity;
  cfg.Q.assign(params.M, Q);
  cfg.R.assign(params.M, Matrix::Constant(1, 1, params.r));
  return make_setup(std::move(plant), std::move(cons), std::move(cfg));
}

Vector oscillator_initial_state(const OscillatorParams &params)
{
  params.validate();
  if (params.x0)
    return *params.x0;
  Vector x = Vector::Zero(2 * params.M);
  for (int i = 0; i < params.M; ++i)
    x(2 * i) = (i % 2 == 0 ? -1.0 : 1.0) * params.amplitude;
  return x;
}

std::vector<Variant> standard_variants()
{
  return {
      {"centralized", true, 0, 0},   {"dmpc-p2-r1", false, 2, 1},  {"dmpc-p20-r1", false, 20, 1},
      {"dmpc-p100-r1", false, 100, 1}, {"dmpc-p2-r5", false, 2, 5}, {"dmpc-p2-r10", false, 2, 10},
  };
}

const VariantResult *ExperimentResult::find(const std::string &name) const
{
  for (const auto &v : variants)
    if (v.variant.name == name)
      return &v;
  return nullptr;
}

ExperimentResult run_experiment_matrix(const OscillatorParams &params, const std::vector<Variant> &variants,
                                       const ExperimentOptions &options)
{
  ExperimentResult out;
  out.params = params;
  out.x0 = oscillator_initial_state(params);
  const MpcSetup base = build_benchmark(params);

  // one initial feasible sequence shared by every DMPC variant
  std::optional<Vector> initial;
  bool any_dmpc = false;
  for (const auto &v : variants)
    any_dmpc = any_dmpc || !v.centralized;
  if (any_dmpc)
    initial = initial_feasible(CondensedMpc(base), out.x0, options.init).sequence;

  out.variants.resize(variants.size());
  auto run_one = [&](std::size_t k) {
    auto &res = out.variants[k];
    res.variant = variants[k];
    const auto t0 = std::chrono::steady_clock::now();
    try
    {
      MpcConfig cfg = base.config;
      if (!res.variant.centralized)
      {
        cfg.p_max = res.variant.p_max;
        cfg.r_opt = res.variant.r_opt;
        cfg.epsilon = options.epsilon;
      }
      auto mpc = std::make_shared<const CondensedMpc>(make_setup(base.plant, base.constraints, cfg));
      if (res.variant.centralized)
      {
        CentralizedController ctl(mpc);
        res.trace = run_closed_loop(mpc->plant(), ctl, out.x0, params.steps);
      }
      else
      {
        auto engine = std::make_shared<const DmpcEngine>(mpc);
        DistributedController ctl(engine, options.algorithm, *initial);
        res.trace = run_closed_loop(mpc->plant(), ctl, out.x0, params.steps);
        if (const auto *net = ctl.network())
        {
          const auto stats = net->stats();
          res.messages = stats.cumulative;
          res.setup_messages = stats.setup_messages;
        }
      }
      res.total_cost = res.trace.total_cost();
      res.final_state_norm = inf_norm(res.trace.final_state);
    }
    catch (const std::exception &err)
    {
      res.error = err.what();
    }
    res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };

  const int jobs = std::max(1, std::min<int>(options.jobs, static_cast<int>(variants.size())));
  if (jobs == 1)
  {
    for (std::size_t k = 0; k < variants.size(); ++k)
      run_one(k);
  }
  else
  {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < jobs; ++w)
      pool.emplace_back([&] {
        for (std::size_t k = next++; k < variants.size(); k = next++)
          run_one(k);
      });
    for (auto &th : pool)
      th.join();
  }

  const VariantResult *central = nullptr;
  for (const auto &res : out.variants)
    if (res.variant.centralized && !central)
      central = &res;
  for (auto &res : out.variants)
  {
    if (central && central->error.empty() && res.error.empty() && central->total_cost != 0.0)
      res.gap = (res.total_cost - central->total_cost) / central->total_cost;
    else
      res.gap = std::numeric_limits<double>::quiet_NaN();
  }
  return out;
}

} // namespace jdmpc
