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

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

namespace jdmpc
{

namespace
{

const Json &require(const Json &j, const char *key, const std::string &where)
{
  if (!j.is_object() || !j.contains(key))
    throw ConfigError(where + ": missing field \"" + key + "\"");
  return j.at(key);
}

template <typename T> T get_or(const Json &j, const char *key, T fallback, const std::string &where)
{
  if (!j.contains(key))
    return fallback;
  try
  {
    return j.at(key).get<T>();
  }
  catch (const Json::exception &)
  {
    throw ConfigError(where + "." + key + ": wrong type");
  }
}

std::string fmt(double v)
{
  if (std::isnan(v))
    return "";
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

std::vector<std::pair<int, Vector>> parse_terms(const Json &row, const std::string &where)
{
  std::vector<std::pair<int, Vector>> terms;
  const auto &arr = require(row, "terms", where);
  if (!arr.is_array())
    throw ConfigError(where + ".terms: expected an array");
  for (std::size_t k = 0; k < arr.size(); ++k)
  {
    const std::string w = where + ".terms[" + std::to_string(k) + "]";
    terms.emplace_back(require(arr[k], "subsystem", w).get<int>(), vector_from_json(require(arr[k], "coeffs", w), w + ".coeffs"));
  }
  return terms;
}

Json row_terms_to_json(const PlantModel &plant, const Matrix &rows, int r, bool state)
{
  Json terms = Json::array();
  for (int j = 0; j < plant.size(); ++j)
  {
    const int off = state ? plant.state_offset(j) : plant.input_offset(j);
    const int w = state ? plant.n(j) : plant.m(j);
    const Vector c = rows.row(r).segment(off, w).transpose();
    if (w > 0 && (c.array() != 0.0).any())
      terms.push_back({{"subsystem", j}, {"coeffs", vector_to_json(c)}});
  }
  return terms;
}

} // namespace

Json matrix_to_json(const Matrix &M)
{
  Json out = Json::array();
  for (int r = 0; r < M.rows(); ++r)
  {
    Json row = Json::array();
    for (int c = 0; c < M.cols(); ++c)
      row.push_back(M(r, c));
    out.push_back(std::move(row));
  }
  return out;
}

Matrix matrix_from_json(const Json &j, const std::string &where)
{
  if (!j.is_array())
    throw ConfigError(where + ": expected an array of rows");
  const auto rows = static_cast<int>(j.size());
  const int cols = rows > 0 && j[0].is_array() ? static_cast<int>(j[0].size()) : 0;
  Matrix M(rows, cols);
  for (int r = 0; r < rows; ++r)
  {
    if (!j[r].is_array() || static_cast<int>(j[r].size()) != cols)
      throw ConfigError(where + ": row " + std::to_string(r) + " has the wrong length");
    for (int c = 0; c < cols; ++c)
    {
      if (!j[r][c].is_number())
        throw ConfigError(where + ": entry (" + std::to_string(r) + ", " + std::to_string(c) + ") is not a number");
      M(r, c) = j[r][c].get<double>();
    }
  }
  return M;
}

Json vector_to_json(const Vector &v)
{
  Json out = Json::array();
  for (int k = 0; k < v.size(); ++k)
    out.push_back(v(k));
  return out;
}

Vector vector_from_json(const Json &j, const std::string &where)
{
  if (!j.is_array())
    throw ConfigError(where + ": expected an array of numbers");
  Vector v(static_cast<int>(j.size()));
  for (int k = 0; k < v.size(); ++k)
  {
    if (!j[k].is_number())
      throw ConfigError(where + "[" + std::to_string(k) + "]: not a number");
    v(k) = j[k].get<double>();
  }
  return v;
}

PlantFile plant_from_json(const Json &j)
{
  const auto &subs_json = require(j, "subsystems", "plant");
  if (!subs_json.is_array() || subs_json.empty())
    throw ConfigError("plant.subsystems: expected a nonempty array");
  std::vector<SubsystemModel> subs;
  for (std::size_t i = 0; i < subs_json.size(); ++i)
  {
    const std::string w = "plant.subsystems[" + std::to_string(i) + "]";
    SubsystemModel s;
    s.index = static_cast<int>(i);
    s.n = require(subs_json[i], "n", w).get<int>();
    s.m = require(subs_json[i], "m", w).get<int>();
    if (subs_json[i].contains("blocks"))
      for (std::size_t b = 0; b < subs_json[i]["blocks"].size(); ++b)
      {
        const auto &bj = subs_json[i]["blocks"][b];
        const std::string wb = w + ".blocks[" + std::to_string(b) + "]";
        CouplingBlock block;
        if (bj.contains("A"))
          block.A = matrix_from_json(bj["A"], wb + ".A");
        if (bj.contains("B"))
          block.B = matrix_from_json(bj["B"], wb + ".B");
        s.blocks[require(bj, "j", wb).get<int>()] = std::move(block);
      }
    subs.push_back(std::move(s));
  }
  PlantModel plant;
  try
  {
    plant = aggregate(std::move(subs));
  }
  catch (const DimensionError &err)
  {
    throw ConfigError(std::string("plant: ") + err.what());
  }

  auto cons = StageConstraints::none(plant);
  if (j.contains("constraints"))
  {
    const auto &cj = j["constraints"];
    for (const char *kind : {"state", "input"})
    {
      if (!cj.contains(kind))
        continue;
      for (std::size_t r = 0; r < cj[kind].size(); ++r)
      {
        const std::string w = std::string("plant.constraints.") + kind + "[" + std::to_string(r) + "]";
        const auto terms = parse_terms(cj[kind][r], w);
        const double rhs = require(cj[kind][r], "rhs", w).get<double>();
        const int owner = get_or(cj[kind][r], "owner", -1, w);
        try
        {
          if (std::string(kind) == "state")
            cons.add_state_row(plant, terms, rhs, owner);
          else
            cons.add_input_row(plant, terms, rhs, owner);
        }
        catch (const std::invalid_argument &err)
        {
          throw ConfigError(w + ": " + err.what());
        }
      }
    }
    if (cj.contains("input_bounds"))
      for (std::size_t r = 0; r < cj["input_bounds"].size(); ++r)
      {
        const auto &bj = cj["input_bounds"][r];
        const std::string w = "plant.constraints.input_bounds[" + std::to_string(r) + "]";
        try
        {
          cons.add_input_bounds(plant, require(bj, "subsystem", w).get<int>(),
                                vector_from_json(require(bj, "lower", w), w + ".lower"),
                                vector_from_json(require(bj, "upper", w), w + ".upper"));
        }
        catch (const std::invalid_argument &err)
        {
          throw ConfigError(w + ": " + err.what());
        }
      }
  }

  const auto &mj = require(j, "mpc", "plant");
  MpcConfig cfg;
  cfg.horizon = require(mj, "horizon", "plant.mpc").get<int>();
  for (const char *key : {"Q", "R"})
  {
    const auto &arr = require(mj, key, "plant.mpc");
    std::vector<Matrix> mats;
    const bool is_q = std::string(key) == "Q";
    for (std::size_t i = 0; i < arr.size(); ++i)
    {
      const std::string w = std::string("plant.mpc.") + key + "[" + std::to_string(i) + "]";
      mats.push_back(matrix_from_json(arr[i], w));
      if (static_cast<int>(i) < plant.size())
      {
        const int d = is_q ? plant.n(static_cast<int>(i)) : plant.m(static_cast<int>(i));
        if (mats.back().rows() != d || mats.back().cols() != d)
          throw ConfigError(w + ": expected a " + std::to_string(d) + "x" + std::to_string(d) + " matrix");
      }
    }
    (is_q ? cfg.Q : cfg.R) = std::move(mats);
  }
  cfg.p_max = get_or(mj, "p_max", cfg.p_max, "plant.mpc");
  cfg.epsilon = get_or(mj, "epsilon", cfg.epsilon, "plant.mpc");
  cfg.r_opt = get_or(mj, "r_opt", cfg.r_opt, "plant.mpc");
  cfg.lambda = get_or(mj, "lambda", cfg.lambda, "plant.mpc");

  PlantFile out{make_setup(std::move(plant), std::move(cons), std::move(cfg)), Vector(), 0};
  out.x0 = vector_from_json(require(j, "x0", "plant"), "plant.x0");
  if (out.x0.size() != out.setup.plant.state_dim())
    throw ConfigError("plant.x0: expected " + std::to_string(out.setup.plant.state_dim()) + " entries");
  out.steps = get_or(j, "steps", 0, "plant");
  return out;
}

PlantFile load_plant_file(const std::string &path)
{
  std::ifstream in(path);
  if (!in)
    throw ConfigError("cannot open plant file " + path);
  Json j;
  try
  {
    in >> j;
  }
  catch (const Json::parse_error &err)
  {
    throw ConfigError("plant file " + path + ": " + err.what());
  }
  return plant_from_json(j);
}

Json plant_to_json(const PlantFile &pf)
{
  const auto &plant = pf.setup.plant;
  Json subs = Json::array();
  for (const auto &s : plant.subsystems())
  {
    Json blocks = Json::array();
    for (const auto &[jj, b] : s.blocks)
    {
      Json bj = {{"j", jj}};
      if (b.A.size())
        bj["A"] = matrix_to_json(b.A);
      if (b.B.size())
        bj["B"] = matrix_to_json(b.B);
      blocks.push_back(std::move(bj));
    }
    subs.push_back({{"n", s.n}, {"m", s.m}, {"blocks", std::move(blocks)}});
  }
  const auto &c = pf.setup.constraints;
  Json state = Json::array(), input = Json::array();
  for (int r = 0; r < c.num_state_rows(); ++r)
  {
    state.push_back({{"terms", row_terms_to_json(plant, c.state_rows, r, true)}, {"rhs", c.state_rhs(r)}});
    if (c.state_row_owner(r) >= 0)
      state.back()["owner"] = c.state_row_owner(r);
  }
  for (int r = 0; r < c.num_input_rows(); ++r)
  {
    input.push_back({{"terms", row_terms_to_json(plant, c.input_rows, r, false)}, {"rhs", c.input_rhs(r)}});
    if (c.input_row_owner(r) >= 0)
      input.back()["owner"] = c.input_row_owner(r);
  }
  const auto &cfg = pf.setup.config;
  Json Q = Json::array(), R = Json::array();
  for (const auto &q : cfg.Q)
    Q.push_back(matrix_to_json(q));
  for (const auto &r : cfg.R)
    R.push_back(matrix_to_json(r));
  Json mpc = {{"horizon", cfg.horizon}, {"Q", Q}, {"R", R}, {"p_max", cfg.p_max}, {"epsilon", cfg.epsilon},
              {"r_opt", cfg.r_opt}};
  if (!cfg.lambda.empty())
    mpc["lambda"] = cfg.lambda;
  return {{"subsystems", subs},
          {"constraints", {{"state", state}, {"input", input}}},
          {"mpc", mpc},
          {"x0", vector_to_json(pf.x0)},
          {"steps", pf.steps}};
}

OscillatorParams oscillator_params_from_json(const Json &j)
{
  OscillatorParams p;
  const std::string w = "oscillators";
  if (!j.is_object())
    throw ConfigError(w + ": expected an object");
  p.M = get_or(j, "M", p.M, w);
  p.k1 = get_or(j, "k1", p.k1, w);
  p.k2 = get_or(j, "k2", p.k2, w);
  p.mass = get_or(j, "mass", p.mass, w);
  p.fs = get_or(j, "fs", p.fs, w);
  p.Ts = get_or(j, "Ts", p.Ts, w);
  p.bound = get_or(j, "bound", p.bound, w);
  p.horizon = get_or(j, "horizon", p.horizon, w);
  p.q_position = get_or(j, "q_position", p.q_position, w);
  p.q_velocity = get_or(j, "q_velocity", p.q_velocity, w);
  p.r = get_or(j, "r", p.r, w);
  p.amplitude = get_or(j, "amplitude", p.amplitude, w);
  p.steps = get_or(j, "steps", p.steps, w);
  if (j.contains("x0"))
    p.x0 = vector_from_json(j["x0"], w + ".x0");
  try
  {
    p.validate();
  }
  catch (const std::invalid_argument &err)
  {
    throw ConfigError(err.what());
  }
  return p;
}

Json oscillator_params_to_json(const OscillatorParams &p)
{
  Json j = {{"M", p.M},         {"k1", p.k1},       {"k2", p.k2},
            {"mass", p.mass},   {"fs", p.fs},       {"Ts", p.Ts},
            {"bound", p.bound}, {"horizon", p.horizon}, {"q_position", p.q_position},
            {"q_velocity", p.q_velocity}, {"r", p.r}, {"amplitude", p.amplitude},
            {"steps", p.steps}};
  if (p.x0)
    j["x0"] = vector_to_json(*p.x0);
  return j;
}

void write_trace_csv(std::ostream &os, const ClosedLoopTrace &trace)
{
  os << "t";
  for (int k = 0; k < trace.nx; ++k)
    os << ",x_" << k;
  for (int k = 0; k < trace.nu; ++k)
    os << ",u_" << k;
  os << ",V,p_used,messages,cost_gap_vs_centralized\n";
  for (const auto &s : trace.steps)
  {
    os << s.t;
    for (int k = 0; k < s.x.size(); ++k)
      os << ',' << fmt(s.x(k));
    for (int k = 0; k < s.u.size(); ++k)
      os << ',' << fmt(s.u(k));
    os << ',' << fmt(s.value) << ',' << s.p_used << ',' << s.messages << ',';
    if (s.oracle_value)
    {
      const double ref = *s.oracle_value;
      os << fmt(ref != 0.0 ? (s.value - ref) / std::abs(ref) : s.value - ref);
    }
    os << '\n';
  }
}

void write_iterations_jsonl(std::ostream &os, const ClosedLoopTrace &trace)
{
  for (const auto &it : trace.iterations)
  {
    const Json j = {{"t", it.t}, {"p", it.p}, {"phi", it.phi}, {"rho_max", it.rho_max}, {"messages", it.messages},
                  {"wall_time", it.wall_time}};
    os << j.dump() << '\n';
  }
}

Json trace_to_json(const ClosedLoopTrace &trace, bool with_diagnostics)
{
  Json steps = Json::array();
  Json timing = Json::array();
  for (const auto &s : trace.steps)
  {
    Json js = {{"t", s.t},
               {"x", vector_to_json(s.x)},
               {"u", vector_to_json(s.u)},
               {"V", s.value},
               {"p_used", s.p_used},
               {"messages", s.messages}};
    if (s.oracle_value)
      js["V_centralized"] = *s.oracle_value;
    steps.push_back(std::move(js));
    timing.push_back(s.solve_seconds);
  }
  Json j = {{"controller", trace.controller},
            {"nx", trace.nx},
            {"nu", trace.nu},
            {"x0", vector_to_json(trace.x0)},
            {"final_state", vector_to_json(trace.final_state)},
            {"total_cost", trace.total_cost()},
            {"steps", std::move(steps)}};
  if (with_diagnostics)
    j["diagnostics"] = {{"solve_seconds", std::move(timing)}};
  return j;
}

ClosedLoopTrace trace_from_json(const Json &j)
{
  ClosedLoopTrace tr;
  const std::string w = "trace";
  tr.controller = get_or<std::string>(j, "controller", "", w);
  tr.nx = require(j, "nx", w).get<int>();
  tr.nu = require(j, "nu", w).get<int>();
  tr.x0 = vector_from_json(require(j, "x0", w), w + ".x0");
  if (j.contains("final_state"))
    tr.final_state = vector_from_json(j["final_state"], w + ".final_state");
  const auto &steps = require(j, "steps", w);
  for (std::size_t k = 0; k < steps.size(); ++k)
  {
    const std::string ws = w + ".steps[" + std::to_string(k) + "]";
    TraceStep s;
    s.t = require(steps[k], "t", ws).get<int>();
    s.x = vector_from_json(require(steps[k], "x", ws), ws + ".x");
    s.u = vector_from_json(require(steps[k], "u", ws), ws + ".u");
    s.value = require(steps[k], "V", ws).get<double>();
    s.p_used = get_or(steps[k], "p_used", 0, ws);
    s.messages = get_or(steps[k], "messages", 0L, ws);
    if (steps[k].contains("V_centralized"))
      s.oracle_value = steps[k]["V_centralized"].get<double>();
    tr.steps.push_back(std::move(s));
  }
  return tr;
}

Comparison compare_traces(const std::vector<ClosedLoopTrace> &traces, const std::vector<std::string> &names)
{
  if (traces.empty())
    throw ConfigError("compare: no traces given");
  if (names.size() != traces.size())
    throw ConfigError("compare: one name per trace is required");
  const auto &ref = traces.front();
  for (std::size_t k = 1; k < traces.size(); ++k)
  {
    const auto &tr = traces[k];
    auto mismatch = [&](const std::string &field) {
      throw ConfigError("compare: trace " + names[k] + " differs from " + names[0] + " in field " + field);
    };
    if (tr.nx != ref.nx)
      mismatch("nx");
    if (tr.nu != ref.nu)
      mismatch("nu");
    if (tr.x0.size() != ref.x0.size() || inf_norm(tr.x0 - ref.x0) > 1e-12)
      mismatch("x0");
    if (tr.steps.size() != ref.steps.size())
      mismatch("steps");
  }
  Comparison c;
  c.names = names;
  c.steps = static_cast<int>(ref.steps.size());
  for (const auto &tr : traces)
  {
    std::vector<double> v;
    long msgs = 0;
    for (const auto &s : tr.steps)
    {
      v.push_back(s.value);
      msgs += s.messages;
    }
    c.values.push_back(std::move(v));
    c.totals.push_back(tr.total_cost());
    c.messages.push_back(msgs);
  }
  for (double total : c.totals)
    c.gaps.push_back(c.totals[0] != 0.0 ? (total - c.totals[0]) / std::abs(c.totals[0]) : total - c.totals[0]);
  return c;
}

Json comparison_to_json(const Comparison &c)
{
  Json traces = Json::array();
  for (std::size_t k = 0; k < c.names.size(); ++k)
    traces.push_back({{"name", c.names[k]},
                      {"total_cost", c.totals[k]},
                      {"gap", c.gaps[k]},
                      {"messages", c.messages[k]},
                      {"V", c.values[k]}});
  return {{"reference", c.names.front()}, {"steps", c.steps}, {"traces", traces}};
}

std::string render_comparison(const Comparison &c)
{
  std::size_t width = 12;
  for (const auto &n : c.names)
    width = std::max(width, n.size() + 2);
  std::ostringstream os;
  os << std::left << std::setw(6) << "t";
  for (const auto &n : c.names)
    os << std::right << std::setw(static_cast<int>(width)) << n;
  os << '\n';
  for (int t = 0; t < c.steps; ++t)
  {
    os << std::left << std::setw(6) << t;
    for (const auto &v : c.values)
      os << std::right << std::setw(static_cast<int>(width)) << std::setprecision(6) << v[t];
    os << '\n';
  }
  os << std::left << std::setw(6) << "total";
  for (double v : c.totals)
    os << std::right << std::setw(static_cast<int>(width)) << std::setprecision(8) << v;
  os << '\n' << std::left << std::setw(6) << "gap";
  for (double g : c.gaps)
    os << std::right << std::setw(static_cast<int>(width)) << std::setprecision(3) << std::scientific << g
       << std::defaultfloat;
  os << '\n' << std::left << std::setw(6) << "msgs";
  for (long m : c.messages)
    os << std::right << std::setw(static_cast<int>(width)) << m;
  os << '\n';
  return os.str();
}

Json experiment_summary(const ExperimentResult &result)
{
  Json variants = Json::array();
  for (const auto &v : result.variants)
  {
    Json jv = {{"name", v.variant.name},
               {"centralized", v.variant.centralized},
               {"total_cost", v.total_cost},
               {"messages", v.messages},
               {"setup_messages", v.setup_messages},
               {"final_state_inf_norm", v.final_state_norm},
               {"steps", v.trace.steps.size()}};
    jv["gap"] = std::isnan(v.gap) ? Json(nullptr) : Json(v.gap);
    if (!v.variant.centralized)
    {
      jv["p_max"] = v.variant.p_max;
      jv["r_opt"] = v.variant.r_opt;
    }
    if (!v.error.empty())
      jv["error"] = v.error;
    variants.push_back(std::move(jv));
  }
  return {{"params", oscillator_params_to_json(result.params)},
          {"x0", vector_to_json(result.x0)},
          {"variants", std::move(variants)}};
}

void write_cost_table(std::ostream &os, const ExperimentResult &result)
{
  os << "t";
  std::size_t steps = 0;
  for (const auto &v : result.variants)
  {
    os << ',' << v.variant.name;
    steps = std::max(steps, v.trace.steps.size());
  }
  os << '\n';
  for (std::size_t t = 0; t < steps; ++t)
  {
    os << t;
    for (const auto &v : result.variants)
      os << ',' << (t < v.trace.steps.size() ? fmt(v.trace.steps[t].value) : std::string());
    os << '\n';
  }
}

Json initial_feasible_to_json(const InitialFeasible &init)
{
  Json j = {{"strategy", to_string(init.strategy)},
            {"sequence", vector_to_json(init.sequence)},
            {"value", init.value},
            {"feasibility",
             {{"input_violation", init.report.input_violation},
              {"state_violation", init.report.state_violation},
              {"terminal_residual", init.report.terminal_residual},
              {"ok", init.report.ok()}}}};
  if (init.box)
  {
    j["box"] = {{"lower", vector_to_json(init.box->lower)},
                {"widths", vector_to_json(init.box->widths)},
                {"log_volume", init.box->log_volume()},
                {"certificate", init.certificate},
                {"decoupled", init.decoupled}};
    Json per = Json::array();
    for (const auto &[sub, b] : init.subsystem_boxes)
      per.push_back({{"subsystem", sub}, {"lower", vector_to_json(b.lower)}, {"widths", vector_to_json(b.widths)}});
    j["box"]["subsystem_boxes"] = std::move(per);
  }
  if (!init.warning.empty())
    j["warning"] = init.warning;
  return j;
}

} // namespace jdmpc
