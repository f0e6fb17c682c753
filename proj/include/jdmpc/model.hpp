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

#include "jdmpc/common.hpp"

#include <map>

namespace jdmpc
{

/// Dynamic influence of subsystem j on subsystem i: x^i_{t+1} += A_ij x^j_t + B_ij u^j_t.
/// An empty matrix stands for a zero block of the right shape.
struct CouplingBlock
{
  Matrix A;
  Matrix B;
};

/**
 * @brief One subsystem of a coupled linear plant.
 *
 * Subsystem indices are zero-based. A key j in @c blocks declares coupling
 * with subsystem j; coupling is never inferred from numerical values.
 */
struct SubsystemModel
{
  int index = 0;
  int n = 0; ///< state dimension
  int m = 0; ///< input dimension
  std::map<int, CouplingBlock> blocks;
};

/// Aggregated plant x_{t+1} = A x_t + B u_t with subsystem-ordered states and inputs.
class PlantModel
{
public:
  PlantModel() = default;

  int size() const { return static_cast<int>(subsystems_.size()); }
  int state_dim() const { return static_cast<int>(A_.rows()); }
  int input_dim() const { return static_cast<int>(B_.cols()); }

  const std::vector<SubsystemModel> &subsystems() const { return subsystems_; }
  const SubsystemModel &subsystem(int i) const { return subsystems_.at(i); }
  int n(int i) const { return subsystems_.at(i).n; }
  int m(int i) const { return subsystems_.at(i).m; }
  int state_offset(int i) const { return state_offsets_.at(i); }
  int input_offset(int i) const { return input_offsets_.at(i); }

  const Matrix &A() const { return A_; }
  const Matrix &B() const { return B_; }

private:
  friend PlantModel aggregate(std::vector<SubsystemModel> subsystems);

  std::vector<SubsystemModel> subsystems_;
  std::vector<int> state_offsets_;
  std::vector<int> input_offsets_;
  Matrix A_;
  Matrix B_;
};

/// Assemble the centralized (A, B). Throws DimensionError naming the offending (i, j) block.
PlantModel aggregate(std::vector<SubsystemModel> subsystems);

/// Neighborhoods N^i: i itself, dynamic coupling in either direction, and shared constraint sets.
struct InteractionGraph
{
  int M = 0;
  std::vector<IndexSet> neighbors; ///< sorted, always contains i

  const IndexSet &neighborhood(int i) const { return neighbors.at(i); }
  bool adjacent(int i, int j) const;
};

InteractionGraph build_interaction_graph(const std::vector<SubsystemModel> &subsystems,
                                         const std::vector<IndexSet> &constraint_couplings);

/// r-step extended neighborhood (r = 1 gives N^i). Throws std::invalid_argument for r < 1.
IndexSet extended_neighborhood(const InteractionGraph &graph, int i, int r);

/// Hop distance between every pair of nodes (-1 when disconnected).
std::vector<std::vector<int>> hop_distances(const InteractionGraph &graph);

/**
 * @brief Condensed prediction over a horizon N.
 *
 * Stacked inputs are time-major: u~ = [u_0; ...; u_{N-1}], each u_k subsystem-ordered.
 * Stacked states are x~ = [x_1; ...; x_N] so that x~ = alpha u~ + beta(x0).
 */
struct PredictionOperator
{
  int horizon = 0;
  int nx = 0;
  int nu = 0;
  Matrix alpha;  ///< (N nx) x (N nu), block (k, l) = A^{k-l} B for l <= k
  Matrix powers; ///< [A; A^2; ...; A^N]
  Matrix F;      ///< last block row of alpha
  Matrix A_pow_N;

  Vector beta(const Vector &x0) const { return powers * x0; }
  Vector predict(const Vector &u, const Vector &x0) const { return alpha * u + beta(x0); }
  Vector terminal(const Vector &u, const Vector &x0) const { return F * u + A_pow_N * x0; }
};

PredictionOperator build_prediction(const PlantModel &plant, int N);

/// Global stacked-input columns of a subsystem set, canonical order: time, then ascending subsystem, then component.
IndexSet stacked_input_columns(const PlantModel &plant, int N, const IndexSet &subsystems);

/// Column split of alpha and F into the inputs of an optimized set and its complement.
struct ColumnSplit
{
  int owner = 0;
  IndexSet members;      ///< optimized subsystems (ascending)
  IndexSet plus_columns; ///< global column of each local coordinate
  IndexSet minus_columns;
  Matrix alpha_plus;
  Matrix alpha_minus;
  Matrix F_plus;
  Matrix F_minus;

  Vector gather_plus(const Vector &u) const;
  Vector gather_minus(const Vector &u) const;
  /// Inverse of the gathers: writes both parts back into a global stacked vector.
  Vector scatter(const Vector &u_plus, const Vector &u_minus) const;
};

ColumnSplit split_columns(const PredictionOperator &pred, const PlantModel &plant,
                          const InteractionGraph &graph, int i);
ColumnSplit split_columns(const PredictionOperator &pred, const PlantModel &plant, int owner,
                          const IndexSet &members);

/// Exact recursion x_{t+1} = A x_t + B u_t; returns nx x (N+1) with x0 in column 0.
Matrix simulate(const PlantModel &plant, const Vector &x0, const Vector &inputs);

/// PBH test on unstable modes. Diagnostic only.
bool is_stabilizable(const PlantModel &plant, double tol = 1e-9);

} // namespace jdmpc
