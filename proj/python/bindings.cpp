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


#include "jdmpc/io.hpp"
#include "jdmpc/oscillators.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace jdmpc;

namespace
{

// A control problem held by value; the condensed form is rebuilt when the setup changes.
class Problem
{
public:
  Problem(MpcSetup setup, Vector x0, int steps) : setup_(std::move(setup)), x0_(std::move(x0)), steps_(steps) {}

  static Problem from_oscillators(const std::string &params_json)
  {
    const auto params = oscillator_params_from_json(Json::parse(params_json.empty() ? "{}" : params_json));
    return Problem(build_benchmark(params), oscillator_initial_state(params), params.steps);
  }

  static Problem from_plant_json(const std::string &text)
  {
    auto pf = plant_from_json(Json::parse(text));
    return Problem(std::move(pf.setup), std::move(pf.x0), pf.steps);
  }

  int size() const { return setup_.plant.size(); }
  int state_dim() const { return setup_.plant.state_dim(); }
  int input_dim() const { return setup_.plant.input_dim(); }
  int horizon() const { return setup_.config.horizon; }
  const Vector &x0() const { return x0_; }
  int steps() const { return steps_; }

  void configure(int p_max, double epsilon, int r_opt)
  {
    auto cfg = setup_.config;
    cfg.p_max = p_max;
    cfg.epsilon = epsilon;
    cfg.r_opt = r_opt;
    setup_ = make_setup(setup_.plant, setup_.constraints, cfg);
    mpc_.reset();
    engine_.reset();
  }

  py::dict centralized_step(const Vector &x)
  {
    const auto s = solve_centralized_step(*mpc(), x);
    py::dict d;
    d["u0"] = s.u0;
    d["sequence"] = s.sequence;
    d["value"] = s.value;
    return d;
  }

  py::dict dmpc_step(const Vector &x, const Vector &warm, const std::string &algorithm)
  {
    const auto res = run_dmpc_timestep(*engine(), x, warm, parse_algorithm(algorithm));
    std::vector<double> phi;
    for (const auto &r : res.trace)
      phi.push_back(r.phi);
    py::dict d;
    d["u0"] = res.u;
    d["sequence"] = res.sequence;
    d["initial_value"] = res.initial_value;
    d["value"] = res.value;
    d["p_used"] = res.p_used;
    d["messages"] = res.messages;
    d["phi"] = phi;
    return d;
  }

  std::string initial_feasible_json(const Vector &x, const std::string &strategy)
  {
    return initial_feasible_to_json(initial_feasible(*mpc(), x, parse_init(strategy))).dump();
  }

  std::string run_json(const std::string &controller, const std::string &init, int steps, bool oracle)
  {
    std::unique_ptr<Controller> ctl;
    if (controller == "centralized")
      ctl = std::make_unique<CentralizedController>(mpc());
    else if (controller == "dmpc-global" || controller == "dmpc-local")
    {
      const auto start = initial_feasible(*mpc(), x0_, parse_init(init));
      ctl = std::make_unique<DistributedController>(
          engine(), controller == "dmpc-global" ? Algorithm::global : Algorithm::local, start.sequence);
    }
    else
      throw ConfigError("unknown controller '" + controller + "'");
    std::unique_ptr<Controller> ref;
    if (oracle)
      ref = std::make_unique<CentralizedController>(mpc());
    const auto trace = run_closed_loop(setup_.plant, *ctl, x0_, steps < 0 ? steps_ : steps, ref.get());
    return trace_to_json(trace, false).dump();
  }

  std::string to_json() const { return plant_to_json(PlantFile{setup_, x0_, steps_}).dump(); }

private:
  static Algorithm parse_algorithm(const std::string &s)
  {
    if (s == "global")
      return Algorithm::global;
    if (s == "local")
      return Algorithm::local;
    throw ConfigError("algorithm must be 'global' or 'local', got '" + s + "'");
  }

  static InitStrategy parse_init(const std::string &s)
  {
    if (s == "box")
      return InitStrategy::inner_box;
    if (s == "bootstrap")
      return InitStrategy::bootstrap;
    throw ConfigError("init must be 'box' or 'bootstrap', got '" + s + "'");
  }

  std::shared_ptr<const CondensedMpc> mpc()
  {
    if (!mpc_)
      mpc_ = std::make_shared<const CondensedMpc>(setup_);
    return mpc_;
  }

  std::shared_ptr<const DmpcEngine> engine()
  {
    if (!engine_)
      engine_ = std::make_shared<const DmpcEngine>(mpc());
    return engine_;
  }

  MpcSetup setup_;
  Vector x0_;
  int steps_;
  std::shared_ptr<const CondensedMpc> mpc_;
  std::shared_ptr<const DmpcEngine> engine_;
};

py::dict solve_qp_py(const Matrix &H, const Vector &g, const Matrix &E, const Vector &e, const Matrix &G,
                     const Vector &h)
{
  QpProblem p{H, g, E, e, G, h};
  const auto s = solve_qp(p);
  py::dict d;
  d["status"] = to_string(s.status);
  d["z"] = s.z;
  d["objective"] = s.objective;
  d["multipliers_eq"] = s.multipliers_eq;
  d["multipliers_ineq"] = s.multipliers_ineq;
  d["kkt_residual"] = s.kkt.max();
  d["iterations"] = s.iterations;
  return d;
}

py::dict inner_box_py(const Matrix &A, const Vector &b)
{
  const Polytope poly{A, b};
  const auto box = max_volume_inner_box(poly);
  py::dict d;
  d["lower"] = box.lower;
  d["widths"] = box.widths;
  d["certificate"] = box_certificate(poly, box);
  return d;
}

std::string experiment_json(const std::string &params_json, const std::string &algorithm, int jobs)
{
  const auto params = oscillator_params_from_json(Json::parse(params_json.empty() ? "{}" : params_json));
  ExperimentOptions opt;
  if (algorithm == "global")
    opt.algorithm = Algorithm::global;
  else if (algorithm != "local")
    throw ConfigError("algorithm must be 'global' or 'local', got '" + algorithm + "'");
  opt.jobs = jobs;
  return experiment_summary(run_experiment_matrix(params, standard_variants(), opt)).dump();
}

} // namespace

PYBIND11_MODULE(_core, m)
{
  m.doc() = "Jacobi distributed MPC with a terminal point constraint";

  py::register_exception<InfeasibleError>(m, "InfeasibleError", PyExc_RuntimeError);

  m.def("solve_qp", &solve_qp_py, py::arg("H"), py::arg("g"), py::arg("E"), py::arg("e"), py::arg("G"),
        py::arg("h"), "Solve min 1/2 z'Hz + g'z s.t. Ez = e, Gz <= h.");
  m.def("max_volume_inner_box", &inner_box_py, py::arg("A"), py::arg("b"),
        "Largest-volume axis-aligned box inside {z : Az <= b}.");
  m.def("experiment_json", &experiment_json, py::arg("params_json") = "", py::arg("algorithm") = "local",
        py::arg("jobs") = 1, py::call_guard<py::gil_scoped_release>());

  py::class_<Problem>(m, "Problem")
      .def_static("from_oscillators", &Problem::from_oscillators, py::arg("params_json") = "")
      .def_static("from_plant_json", &Problem::from_plant_json, py::arg("text"))
      .def_property_readonly("num_subsystems", &Problem::size)
      .def_property_readonly("state_dim", &Problem::state_dim)
      .def_property_readonly("input_dim", &Problem::input_dim)
      .def_property_readonly("horizon", &Problem::horizon)
      .def_property_readonly("x0", &Problem::x0)
      .def_property_readonly("steps", &Problem::steps)
      .def("configure", &Problem::configure, py::arg("p_max"), py::arg("epsilon"), py::arg("r_opt"))
      .def("centralized_step", &Problem::centralized_step, py::arg("x"))
      .def("dmpc_step", &Problem::dmpc_step, py::arg("x"), py::arg("warm"), py::arg("algorithm") = "local")
      .def("initial_feasible_json", &Problem::initial_feasible_json, py::arg("x"), py::arg("strategy") = "bootstrap")
      .def("run_json", &Problem::run_json, py::arg("controller"), py::arg("init") = "bootstrap",
           py::arg("steps") = -1, py::arg("oracle") = false)
      .def("to_json", &Problem::to_json);
}
