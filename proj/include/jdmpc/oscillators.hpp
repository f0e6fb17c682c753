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

#include "jdmpc/dmpc.hpp"

#include <optional>

namespace jdmpc
{

/**
 * @brief Chain of mass-spring-damper oscillators, Euler-discretized.
 *
 * Subsystem i has state (p^i, v^i) and one force input. Neighbors are coupled
 * through springs k2; every interior node must stay within @c bound of the
 * midpoint of its neighbors.
 */
struct OscillatorParams
{
  int M = 40;
  double k1 = 0.4;   ///< spring to the ground
  double k2 = 0.3;   ///< coupling spring
  double mass = 1.0; ///< kept for completeness; the discrete blocks do not divide by it
  double fs = 0.4;   ///< friction
  double Ts = 0.05;
  double bound = 4.0;
  int horizon = 20;
  double q_position = 100.0;
  double q_velocity = 0.0;
  double r = 10.0;
  double amplitude = 1.8; ///< p^i(0) = amplitude (-1)^(i+1) for zero-based i
  int steps = 150;
  std::optional<Vector> x0;

  /// Throws std::invalid_argument for M < 2 and ConfigError for nonpositive parameters.
  void validate() const;
};

PlantModel oscillator_plant(const OscillatorParams &params);
StageConstraints oscillator_constraints(const PlantModel &plant, const OscillatorParams &params);
/// Setup with default iteration parameters (p_max = 20, epsilon = 1e-6, r_opt = 1).
MpcSetup build_benchmark(const OscillatorParams &params);
Vector oscillator_initial_state(const OscillatorParams &params);

struct Variant
{
  std::string name;
  bool centralized = false;
  int p_max = 20;
  int r_opt = 1;
};

/// Centralized baseline, p_max in {2, 20, 100} at r = 1, and r in {5, 10} at p_max = 2.
std::vector<Variant> standard_variants();

struct VariantResult
{
  Variant variant;
  ClosedLoopTrace trace;
  double total_cost = 0.0;
  double gap = 0.0; ///< (total - centralized total) / centralized total
  long messages = 0;
  long setup_messages = 0;
  double final_state_norm = 0.0;
  double seconds = 0.0;
  std::string error; ///< empty on success
};

struct ExperimentOptions
{
  Algorithm algorithm = Algorithm::local;
  InitStrategy init = InitStrategy::bootstrap;
  double epsilon = 1e-6;
  int jobs = 1; ///< variants run concurrently on this many threads
};

struct ExperimentResult
{
  OscillatorParams params;
  Vector x0;
  std::vector<VariantResult> variants;

  const VariantResult *find(const std::string &name) const;
};

/// All variants start from the same state and, for DMPC, the same initial feasible sequence.
ExperimentResult run_experiment_matrix(const OscillatorParams &params, const std::vector<Variant> &variants,
                                       const ExperimentOptions &options = {});

} // namespace jdmpc
