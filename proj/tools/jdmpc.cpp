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


// Command-line front end. Exit codes: 0 success, 1 configuration error, 2 infeasible problem.
// DMPC_SEED is accepted in the environment but has no effect: every computation is deterministic.

#include "jdmpc/io.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace jdmpc;

namespace
{

constexpr int kOk = 0;
constexpr int kConfig = 1;
constexpr int kInfeasible = 2;

struct ProblemOptions
{
  std::string bench;
  std::string plant;
  std::string params;
  std::optional<int> pmax;
  std::optional<double> epsilon;
  std::optional<int> ropt;
  std::optional<int> horizon;
  std::optional<int> steps;
};

struct Problem
{
  MpcSetup setup;
  Vector x0;
  int steps = 0;
  bool benchmark = false;
  OscillatorParams params;
};

void add_problem_options(CLI::App *cmd, ProblemOptions &o)
{
  cmd->add_option("--bench", o.bench, "built-in benchmark (oscillators)")->check(CLI::IsMember({"oscillators"}));
  cmd->add_option("--plant", o.plant, "plant JSON file");
  cmd->add_option("--params", o.params, "oscillator parameter JSON file (with --bench oscillators)");
  cmd->add_option("--pmax", o.pmax, "maximum Jacobi iterations per time step");
  cmd->add_option("--epsilon", o.epsilon, "progress threshold on rho");
  cmd->add_option("--ropt", o.ropt, "radius of the optimized neighborhood");
  cmd->add_option("--horizon", o.horizon, "prediction horizon N");
  cmd->add_option("--steps", o.steps, "closed-loop time steps");
}

Json read_json(const std::string &path)
{
  std::ifstream in(path);
  if (!in)
    throw ConfigError("cannot open " + path);
  try
  {
    return Json::parse(in);
  }
  catch (const Json::parse_error &err)
  {
    throw ConfigError(path + ": " + err.what());
  }
}

Problem load_problem(const ProblemOptions &o)
{
  if (o.bench.empty() == o.plant.empty())
    throw ConfigError("give exactly one of --bench or --plant");
  Problem p;
  if (!o.bench.empty())
  {
    p.benchmark = true;
    p.params = o.params.empty() ? OscillatorParams{} : oscillator_params_from_json(read_json(o.params));
    if (o.horizon)
      p.params.horizon = *o.horizon;
    try
    {
      p.setup = build_benchmark(p.params);
    }
    catch (const std::invalid_argument &err)
    {
      throw ConfigError(err.what());
    }
    p.x0 = oscillator_initial_state(p.params);
    p.steps = p.params.steps;
  }
  else
  {
    if (!o.params.empty())
      throw ConfigError("--params applies to --bench only");
    auto pf = load_plant_file(o.plant);
    p.setup = std::move(pf.setup);
    p.x0 = std::move(pf.x0);
    p.steps = pf.steps;
    if (o.horizon)
      p.setup.config.horizon = *o.horizon;
  }
  if (o.pmax)
    p.setup.config.p_max = *o.pmax;
  if (o.epsilon)
    p.setup.config.epsilon = *o.epsilon;
  if (o.ropt)
    p.setup.config.r_opt = *o.ropt;
  if (o.steps)
    p.steps = *o.steps;
  if (p.steps < 0)
    throw ConfigError("--steps must be nonnegative");
  p.setup = make_setup(p.setup.plant, p.setup.constraints, p.setup.config);
  return p;
}

InitStrategy parse_init(const std::string &s) { return s == "box" ? InitStrategy::inner_box : InitStrategy::bootstrap; }

fs::path prepare_out(const std::string &dir)
{
  fs::path out(dir);
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec)
    throw ConfigError("cannot create output directory " + dir + ": " + ec.message());
  return out;
}

std::ofstream open_out(const fs::path &path)
{
  std::ofstream os(path);
  if (!os)
    throw ConfigError("cannot write " + path.string());
  return os;
}

int cmd_run(const ProblemOptions &po, const std::string &controller, const std::string &init, bool oracle_flag,
            bool message_log, const std::string &out_dir)
{
  const auto problem = load_problem(po);
  const fs::path out = prepare_out(out_dir);
  auto mpc = std::make_shared<const CondensedMpc>(problem.setup);

  std::unique_ptr<Controller> ctl;
  DistributedController *dist = nullptr;
  if (controller == "centralized")
  {
    ctl = std::make_unique<CentralizedController>(mpc);
  }
  else
  {
    const auto algorithm = controller == "dmpc-global" ? Algorithm::global : Algorithm::local;
    Vector initial = Vector::Zero(mpc->dim());
    if (problem.steps > 0)
      initial = initial_feasible(*mpc, problem.x0, parse_init(init)).sequence;
    auto engine = std::make_shared<const DmpcEngine>(mpc);
    auto d = std::make_unique<DistributedController>(engine, algorithm, initial);
    dist = d.get();
    ctl = std::move(d);
  }
  std::unique_ptr<CentralizedController> oracle;
  if (oracle_flag)
    oracle = std::make_unique<CentralizedController>(mpc);
  if (dist && dist->network() && message_log)
    dist->network()->enable_log(true);

  const auto trace = run_closed_loop(mpc->plant(), *ctl, problem.x0, problem.steps, oracle.get());

  {
    auto os = open_out(out / "trace.csv");
    write_trace_csv(os, trace);
  }
  {
    auto os = open_out(out / "trace.json");
    os << trace_to_json(trace).dump(2) << '\n';
  }
  if (dist)
  {
    auto os = open_out(out / "iterations.jsonl");
    write_iterations_jsonl(os, trace);
  }
  if (dist && dist->network() && message_log)
  {
    auto os = open_out(out / "messages.jsonl");
    dist->network()->write_log(os);
  }

  long messages = 0;
  int p_total = 0;
  for (const auto &s : trace.steps)
  {
    messages += s.messages;
    p_total += s.p_used;
  }
  Json summary = {{"controller", trace.controller},
                  {"steps", trace.steps.size()},
                  {"total_cost", trace.total_cost()},
                  {"final_state_inf_norm", inf_norm(trace.final_state)},
                  {"iterations", p_total},
                  {"messages", messages},
                  {"centralized_equivalent_messages_per_step", 2 * problem.setup.plant.size()}};
  if (dist && dist->network())
    summary["setup_messages"] = dist->network()->stats().setup_messages;
  if (oracle_flag)
  {
    double central = 0.0;
    for (const auto &s : trace.steps)
      central += s.oracle_value.value_or(0.0);
    summary["oracle_total_cost"] = central;
    summary["cost_gap_vs_centralized"] = central != 0.0 ? (trace.total_cost() - central) / std::abs(central) : 0.0;
  }
  if (problem.benchmark)
    summary["params"] = oscillator_params_to_json(problem.params);
  {
    auto os = open_out(out / "summary.json");
    os << summary.dump(2) << '\n';
  }
  std::cout << trace.controller << ": " << trace.steps.size() << " steps, total cost " << trace.total_cost()
            << ", |x_T|_inf " << inf_norm(trace.final_state) << ", messages " << messages << '\n';
  return kOk;
}

int cmd_compare(const std::vector<std::string> &files, const std::string &out_dir)
{
  std::vector<ClosedLoopTrace> traces;
  std::vector<std::string> names;
  for (const auto &f : files)
  {
    traces.push_back(trace_from_json(read_json(f)));
    // runs write trace.json into their own directory, so the directory names the run
    const fs::path path(f);
    const auto dir = fs::absolute(path).parent_path().filename().string();
    names.push_back(path.stem() == "trace" && !dir.empty() ? dir : path.stem().string());
  }
  const auto c = compare_traces(traces, names);
  std::cout << render_comparison(c);
  if (!out_dir.empty())
  {
    auto os = open_out(prepare_out(out_dir) / "comparison.json");
    os << comparison_to_json(c).dump(2) << '\n';
  }
  return kOk;
}

int cmd_init(const ProblemOptions &po, const std::string &init, const std::string &out_dir)
{
  const auto problem = load_problem(po);
  const fs::path out = prepare_out(out_dir);
  const CondensedMpc mpc(problem.setup);
  const auto result = initial_feasible(mpc, problem.x0, parse_init(init));
  {
    auto os = open_out(out / "feasible_sequence.json");
    os << Json{{"x0", vector_to_json(problem.x0)}, {"sequence", vector_to_json(result.sequence)}}.dump(2) << '\n';
  }
  {
    auto os = open_out(out / "feasible_sequence.certificate.json");
    auto j = initial_feasible_to_json(result);
    j.erase("sequence");
    os << j.dump(2) << '\n';
  }
  if (!result.warning.empty())
    std::cerr << "warning: " << result.warning << '\n';
  std::cout << "initial sequence (" << to_string(result.strategy) << "): cost " << result.value
            << ", worst residual " << result.report.worst();
  if (result.box)
    std::cout << ", box certificate " << result.certificate;
  std::cout << '\n';
  return result.report.ok() ? kOk : kInfeasible;
}

int cmd_experiment(const ProblemOptions &po, const std::string &controller, const std::string &init, int jobs,
                   const std::string &out_dir)
{
  if (po.bench.empty())
    throw ConfigError("experiment needs --bench oscillators");
  if (!po.plant.empty())
    throw ConfigError("experiment runs on the built-in benchmark only");
  auto params = po.params.empty() ? OscillatorParams{} : oscillator_params_from_json(read_json(po.params));
  if (po.horizon)
    params.horizon = *po.horizon;
  if (po.steps)
    params.steps = *po.steps;
  ExperimentOptions opt;
  opt.algorithm = controller == "dmpc-global" ? Algorithm::global : Algorithm::local;
  opt.init = parse_init(init);
  opt.jobs = jobs;
  if (po.epsilon)
    opt.epsilon = *po.epsilon;
  const fs::path out = prepare_out(out_dir);
  const auto res = run_experiment_matrix(params, standard_variants(), opt);
  {
    auto os = open_out(out / "summary.json");
    os << experiment_summary(res).dump(2) << '\n';
  }
  {
    auto os = open_out(out / "costs.csv");
    write_cost_table(os, res);
  }
  int status = kOk;
  for (const auto &v : res.variants)
  {
    auto os = open_out(out / ("trace_" + v.variant.name + ".csv"));
    write_trace_csv(os, v.trace);
    std::cout << v.variant.name << ": total " << v.total_cost << ", gap " << v.gap << ", messages " << v.messages
              << ", |x_T|_inf " << v.final_state_norm;
    if (!v.error.empty())
    {
      std::cout << ", error: " << v.error;
      status = kInfeasible;
    }
    std::cout << '\n';
  }
  return status;
}

} // namespace

int main(int argc, char **argv)
{
  CLI::App app{"Jacobi distributed MPC with a terminal point constraint"};
  app.footer("Exit codes: 0 success, 1 configuration error, 2 infeasible problem.\n"
             "DMPC_SEED is reserved and ignored; all runs are deterministic.");
  app.require_subcommand(1);

  ProblemOptions run_po, init_po, exp_po;
  std::string controller = "dmpc-local";
  std::string init = "bootstrap";
  std::string out_dir = ".";
  bool oracle = false;
  bool message_log = false;
  int jobs = 1;
  std::vector<std::string> files;

  auto *run = app.add_subcommand("run", "closed-loop simulation with one controller");
  add_problem_options(run, run_po);
  run->add_option("--controller", controller, "centralized, dmpc-global or dmpc-local")
      ->check(CLI::IsMember({"centralized", "dmpc-global", "dmpc-local"}));
  run->add_option("--init", init, "initial feasible sequence: box or bootstrap")->check(CLI::IsMember({"box", "bootstrap"}));
  run->add_flag("--oracle", oracle, "log the centralized value at every visited state");
  run->add_flag("--message-log", message_log, "write every delivered message to messages.jsonl");
  run->add_option("--out", out_dir, "output directory");

  auto *compare = app.add_subcommand("compare", "compare trace.json files from earlier runs");
  compare->add_option("traces", files, "trace JSON files; the first is the reference")->required()->check(CLI::ExistingFile);
  std::string compare_out;
  compare->add_option("--out", compare_out, "directory for comparison.json");

  auto *initc = app.add_subcommand("init-feasible", "compute a certified initial feasible sequence");
  add_problem_options(initc, init_po);
  initc->add_option("--init", init, "box or bootstrap")->check(CLI::IsMember({"box", "bootstrap"}));
  initc->add_option("--out", out_dir, "output directory");

  auto *exp = app.add_subcommand("experiment", "benchmark variant matrix (p_max and r_opt sweeps)");
  add_problem_options(exp, exp_po);
  exp->add_option("--controller", controller, "dmpc-global or dmpc-local")
      ->check(CLI::IsMember({"dmpc-global", "dmpc-local"}));
  exp->add_option("--init", init, "box or bootstrap")->check(CLI::IsMember({"box", "bootstrap"}));
  exp->add_option("--jobs", jobs, "variants run in parallel")->check(CLI::PositiveNumber);
  exp->add_option("--out", out_dir, "output directory");

  try
  {
    app.parse(argc, argv);
  }
  catch (const CLI::ParseError &err)
  {
    const int code = app.exit(err);
    return code == 0 ? kOk : kConfig;
  }

  try
  {
    if (run->parsed())
      return cmd_run(run_po, controller, init, oracle, message_log, out_dir);
    if (compare->parsed())
      return cmd_compare(files, compare_out);
    if (initc->parsed())
      return cmd_init(init_po, init, out_dir);
    if (exp->parsed())
      return cmd_experiment(exp_po, controller, init, jobs, out_dir);
  }
  catch (const TerminalReachabilityError &err)
  {
    std::cerr << "error (terminal-reachability): " << err.what() << '\n';
    return kInfeasible;
  }
  catch (const InfeasibleError &err)
  {
    std::cerr << "error (infeasible): " << err.what() << '\n';
    return kInfeasible;
  }
  catch (const ClosedLoopError &err)
  {
    std::cerr << "error at step " << err.step() << (err.infeasible() ? " (terminal-reachability): " : ": ")
              << err.what() << '\n';
    return err.infeasible() ? kInfeasible : kConfig;
  }
  catch (const std::invalid_argument &err)
  {
    std::cerr << "configuration error: " << err.what() << '\n';
    return kConfig;
  }
  catch (const std::exception &err)
  {
    std::cerr << "error: " << err.what() << '\n';
    return kConfig;
  }
  return kConfig;
}
