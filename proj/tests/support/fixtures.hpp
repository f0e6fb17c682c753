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


// Random problem instances shared by the unit and acceptance tests.

#pragma once

#include "jdmpc/dmpc.hpp"

#include <random>

namespace jdmpc::fixture
{

struct Instance
{
  MpcSetup setup;
  Vector x0;
  Vector start; ///< feasible, deliberately suboptimal input sequence
};

struct InstanceOptions
{
  int M = 4;
  int N = 5;
  int r_opt = 1;
  int p_max = 20;
  double epsilon = 1e-6;
  bool chain = true;        ///< chain coupling; otherwise a random sparse graph
  bool input_bounds = true;
  bool coupled_rows = true; ///< state rows that span two neighbors
};

/// Chain or random-graph plant with 2 states and 1 input per subsystem,
/// polyhedral constraints, a state from which the terminal point is reachable,
/// and the minimum-energy plan as the start.
Instance random_instance(std::mt19937 &rng, const InstanceOptions &options);

/// Minimum-energy plan: the centralized problem with zero state weights.
Vector min_energy_start(const MpcSetup &setup, const Vector &x0);

/// Small hand-made chain used for message accounting (M subsystems, scalar states).
MpcSetup scalar_chain(int M, int N, int p_max = 2);
/// Feasible N = 1 start for scalar_chain that drives each state to zero with its first input only.
Vector scalar_chain_start(const MpcSetup &setup, const Vector &x0);

} // namespace jdmpc::fixture
