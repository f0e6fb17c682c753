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

#include "jdmpc/oscillators.hpp"

#include <iosfwd>
#include <json.hpp>

namespace jdmpc
{

using Json = nlohmann::json;

/// A plant file: model, constraints, controller parameters and the initial state.
struct PlantFile
{
  MpcSetup setup;
  Vector x0;
  int steps = 0;
};

/**
 * Plant JSON schema (indices are zero-based, matrices are arrays of rows):
 *
 *   {"subsystems": [{"n": 2, "m": 1, "blocks": [{"j": 0, "A": [[..]], "B": [[..]]}, ...]}, ...],
 *    "constraints": {"state": [{"terms": [{"subsystem": 0, "coeffs": [..]}], "rhs": 1.0}],
 *                    "input": [...],
 *                    "input_bounds": [{"subsystem": 0, "lower": [..], "upper": [..]}]},
 *    "mpc": {"horizon": 5, "Q": [[[..]], ...], "R": [[[..]], ...],
 *            "p_max": 20, "epsilon": 1e-6, "r_opt": 1, "lambda": [..]},
 *    "x0": [..], "steps": 50}
 *
 * Missing "B" means no input coupling, a missing "constraints" section means none.
 * A constraint row may name an "owner" subsystem; see StageConstraints.
 * Errors are reported as ConfigError with the offending JSON path.
 */
PlantFile plant_from_json(const Json &j);
PlantFile load_plant_file(const std::string &path);
Json plant_to_json(const PlantFile &plant);

OscillatorParams oscillator_params_from_json(const Json &j);
Json oscillator_params_to_json(const OscillatorParams &p);

Json matrix_to_json(const Matrix &M);
Matrix matrix_from_json(const Json &j, const std::string &where);
Json vector_to_json(const Vector &v);
Vector vector_from_json(const Json &j, const std::string &where);

/// Column set of the per-step CSV; bump the version when it changes.
inline constexpr int kTraceCsvVersion = 1;

/**
 * One row per time step: t, x_0.., u_0.., V, p_used, messages,
 * cost_gap_vs_centralized. The gap column is (V - V*) / |V*| when the trace
 * carries oracle values and empty otherwise. No timing columns, so equal runs
 * give equal files.
 */
void write_trace_csv(std::ostream &os, const ClosedLoopTrace &trace);
/// One JSON object per Jacobi iteration: t, p, phi, rho_max, messages, wall_time.
/// wall_time is the only nondeterministic field.
void write_iterations_jsonl(std::ostream &os, const ClosedLoopTrace &trace);
/// Full trace including plans; timings only under "diagnostics".
Json trace_to_json(const ClosedLoopTrace &trace, bool with_diagnostics = true);
ClosedLoopTrace trace_from_json(const Json &j);

struct Comparison
{
  std::vector<std::string> names;
  int steps = 0;
  std::vector<std::vector<double>> values; ///< values[k][t]
  std::vector<double> totals;
  std::vector<double> gaps; ///< relative total-cost gap to the first trace
  std::vector<long> messages;
};

/// Throws ConfigError naming the first field in which the traces differ (nx, nu, x0, steps).
Comparison compare_traces(const std::vector<ClosedLoopTrace> &traces, const std::vector<std::string> &names);
Json comparison_to_json(const Comparison &c);
std::string render_comparison(const Comparison &c);

Json experiment_summary(const ExperimentResult &result);
/// t followed by one V column per variant.
void write_cost_table(std::ostream &os, const ExperimentResult &result);

Json initial_feasible_to_json(const InitialFeasible &init);

} // namespace jdmpc
