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

#include "jdmpc/model.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <deque>
#include <set>
#include <sstream>

namespace jdmpc
{

namespace
{

std::string block_name(int i, int j)
{
  std::ostringstream os;
  os << "(" << i << ", " << j << ")";
  return os.str();
}

} // namespace

PlantModel aggregate(std::vector<SubsystemModel> subsystems)
{
  const int M = static_cast<int>(subsystems.size());
  if (M == 0)
    throw DimensionError("aggregate: plant has no subsystems");

  PlantModel plant;
  plant.state_offsets_.resize(M);
  plant.input_offsets_.resize(M);
  int nx = 0;
  int nu = 0;
  for (int i = 0; i < M; ++i)
  {
    const auto &s = subsystems[i];
    if (s.index != i)
      throw DimensionError("aggregate: subsystem at position " + std::to_string(i) + " declares index " +
                           std::to_string(s.index));
    if (s.n <= 0 || s.m < 0)
      throw DimensionError("aggregate: subsystem " + std::to_string(i) + " has invalid dimensions");
    plant.state_offsets_[i] = nx;
    plant.input_offsets_[i] = nu;
    nx += s.n;
    nu += s.m;
  }

  plant.A_ = Matrix::Zero(nx, nx);
  plant.B_ = Matrix::Zero(nx, nu);
  for (int i = 0; i < M; ++i)
  {
    const auto &s = subsystems[i];
    for (const auto &[j, blk] : s.blocks)
    {
      if (j < 0 || j >= M)
        throw DimensionError("aggregate: block " + block_name(i, j) + " references unknown subsystem");
      const auto &sj = subsystems[j];
      if (blk.A.size() > 0)
      {
        if (blk.A.rows() != s.n || blk.A.cols() != sj.n)
          throw DimensionError("aggregate: A block " + block_name(i, j) + " must be " + std::to_string(s.n) +
                               "x" + std::to_string(sj.n));
        plant.A_.block(plant.state_offsets_[i], plant.state_offsets_[j], s.n, sj.n) = blk.A;
      }
      if (blk.B.size() > 0)
      {
        if (blk.B.rows() != s.n || blk.B.cols() != sj.m)
          throw DimensionError("aggregate: B block " + block_name(i, j) + " must be " + std::to_string(s.n) +
                               "x" + std::to_string(sj.m));
        plant.B_.block(plant.state_offsets_[i], plant.input_offsets_[j], s.n, sj.m) = blk.B;
      }
    }
  }
  plant.subsystems_ = std::move(subsystems);
  return plant;
}

bool InteractionGraph::adjacent(int i, int j) const
{
  const auto &nb = neighbors.at(i);
  return std::binary_search(nb.begin(), nb.end(), j);
}

InteractionGraph build_interaction_graph(const std::vector<SubsystemModel> &subsystems,
                                         const std::vector<IndexSet> &constraint_couplings)
{
  const int M = static_cast<int>(subsystems.size());
  std::vector<std::set<int>> nb(M);
  for (int i = 0; i < M; ++i)
  {
    nb[i].insert(i);
    for (const auto &[j, blk] : subsystems[i].blocks)
    {
      if (j < 0 || j >= M)
        throw std::invalid_argument("build_interaction_graph: coupling to unknown subsystem " + std::to_string(j));
      nb[i].insert(j);
      nb[j].insert(i);
    }
  }
  for (const auto &set : constraint_couplings)
  {
    for (int a : set)
    {
      if (a < 0 || a >= M)
        throw std::invalid_argument("build_interaction_graph: constraint coupling references subsystem " +
                                    std::to_string(a));
      for (int b : set)
        nb[a].insert(b);
    }
  }

  InteractionGraph g;
  g.M = M;
  g.neighbors.reserve(M);
  for (auto &s : nb)
    g.neighbors.emplace_back(s.begin(), s.end());
  return g;
}

IndexSet extended_neighborhood(const InteractionGraph &graph, int i, int r)
{
  if (r < 1)
    throw std::invalid_argument("extended_neighborhood: r must be >= 1");
  std::set<int> current(graph.neighborhood(i).begin(), graph.neighborhood(i).end());
  for (int step = 2; step <= r; ++step)
  {
    std::set<int> next;
    for (int j : current)
      next.insert(graph.neighborhood(j).begin(), graph.neighborhood(j).end());
    if (next.size() == current.size())
      break;
    current = std::move(next);
  }
  return IndexSet(current.begin(), current.end());
}

std::vector<std::vector<int>> hop_distances(const InteractionGraph &graph)
{
  const int M = graph.M;
  std::vector<std::vector<int>> dist(M, std::vector<int>(M, -1));
  for (int s = 0; s < M; ++s)
  {
    std::deque<int> queue{s};
    dist[s][s] = 0;
    while (!queue.empty())
    {
      const int a = queue.front();
      queue.pop_front();
      for (int b : graph.neighborhood(a))
      {
        if (dist[s][b] < 0)
        {
          dist[s][b] = dist[s][a] + 1;
          queue.push_back(b);
        }
      }
    }
  }
  return dist;
}

PredictionOperator build_prediction(const PlantModel &plant, int N)
{
  if (N < 1)
    throw std::invalid_argument("build_prediction: horizon must be >= 1");
  const int nx = plant.state_dim();
  const int nu = plant.input_dim();
  const Matrix &A = plant.A();
  const Matrix &B = plant.B();

  PredictionOperator p;
  p.horizon = N;
  p.nx = nx;
  p.nu = nu;
  p.alpha = Matrix::Zero(N * nx, N * nu);
  p.powers = Matrix::Zero(N * nx, nx);

  // impulse[k] = A^k B
  std::vector<Matrix> impulse(N);
  impulse[0] = B;
  for (int k = 1; k < N; ++k)
    impulse[k] = A * impulse[k - 1];

  Matrix Ak = A;
  for (int k = 0; k < N; ++k)
  {
    p.powers.middleRows(k * nx, nx) = Ak;
    if (k + 1 < N)
      Ak = A * Ak;
    for (int l = 0; l <= k; ++l)
      p.alpha.block(k * nx, l * nu, nx, nu) = impulse[k - l];
  }
  p.A_pow_N = p.powers.bottomRows(nx);
  p.F = p.alpha.bottomRows(nx);
  return p;
}

IndexSet stacked_input_columns(const PlantModel &plant, int N, const IndexSet &subsystems)
{
  IndexSet sorted = subsystems;
  std::sort(sorted.begin(), sorted.end());
  IndexSet cols;
  const int nu = plant.input_dim();
  for (int k = 0; k < N; ++k)
    for (int j : sorted)
      for (int c = 0; c < plant.m(j); ++c)
        cols.push_back(k * nu + plant.input_offset(j) + c);
  return cols;
}

Vector ColumnSplit::gather_plus(const Vector &u) const { return u(plus_columns); }

Vector ColumnSplit::gather_minus(const Vector &u) const { return u(minus_columns); }

Vector ColumnSplit::scatter(const Vector &u_plus, const Vector &u_minus) const
{
  Vector u(static_cast<Eigen::Index>(plus_columns.size() + minus_columns.size()));
  u(plus_columns) = u_plus;
  u(minus_columns) = u_minus;
  return u;
}

ColumnSplit split_columns(const PredictionOperator &pred, const PlantModel &plant, int owner,
                          const IndexSet &members)
{
  ColumnSplit split;
  split.owner = owner;
  split.members = members;
  std::sort(split.members.begin(), split.members.end());
  split.plus_columns = stacked_input_columns(plant, pred.horizon, split.members);

  std::vector<bool> in_plus(pred.alpha.cols(), false);
  for (int c : split.plus_columns)
    in_plus[c] = true;
  for (int c = 0; c < pred.alpha.cols(); ++c)
    if (!in_plus[c])
      split.minus_columns.push_back(c);

  split.alpha_plus = pred.alpha(Eigen::all, split.plus_columns);
  split.alpha_minus = pred.alpha(Eigen::all, split.minus_columns);
  split.F_plus = pred.F(Eigen::all, split.plus_columns);
  split.F_minus = pred.F(Eigen::all, split.minus_columns);
  return split;
}

ColumnSplit split_columns(const PredictionOperator &pred, const PlantModel &plant,
                          const InteractionGraph &graph, int i)
{
  return split_columns(pred, plant, i, graph.neighborhood(i));
}

Matrix simulate(const PlantModel &plant, const Vector &x0, const Vector &inputs)
{
  const int nx = plant.state_dim();
  const int nu = plant.input_dim();
  if (x0.size() != nx)
    throw DimensionError("simulate: x0 has " + std::to_string(x0.size()) + " entries, expected " +
                         std::to_string(nx));
  if (nu == 0 ? inputs.size() != 0 : inputs.size() % nu != 0)
    throw DimensionError("simulate: input sequence length is not a multiple of the input dimension");
  const int N = nu == 0 ? 0 : static_cast<int>(inputs.size() / nu);

  Matrix traj(nx, N + 1);
  traj.col(0) = x0;
  for (int k = 0; k < N; ++k)
    traj.col(k + 1) = plant.A() * traj.col(k) + plant.B() * inputs.segment(k * nu, nu);
  return traj;
}

bool is_stabilizable(const PlantModel &plant, double tol)
{
  const int nx = plant.state_dim();
  Eigen::EigenSolver<Matrix> es(plant.A());
  const Eigen::MatrixXcd Bc = plant.B().cast<std::complex<double>>();
  for (int k = 0; k < nx; ++k)
  {
    const std::complex<double> lambda = es.eigenvalues()(k);
    if (std::abs(lambda) < 1.0)
      continue;
    Eigen::MatrixXcd pbh(nx, nx + plant.input_dim());
    pbh << plant.A().cast<std::complex<double>>() - lambda * Eigen::MatrixXcd::Identity(nx, nx), Bc;
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(pbh);
    const auto &sv = svd.singularValues();
    if (sv.size() < nx || sv(nx - 1) <= tol * std::max(1.0, sv(0)))
      return false;
  }
  return true;
}

} // namespace jdmpc
