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

namespace jdmpc
{

/// {z : A z <= b}
struct Polytope
{
  Matrix A;
  Vector b;

  int dim() const { return static_cast<int>(A.cols()); }
  bool contains(const Vector &z, double tol = 0.0) const { return ((A * z - b).array() <= tol).all(); }
};

/// Axis-aligned box [lower, lower + widths].
struct Box
{
  Vector lower;
  Vector widths;

  Vector upper() const { return lower + widths; }
  Vector center() const { return lower + 0.5 * widths; }
  double log_volume() const { return widths.array().log().sum(); }
};

/// Entrywise max(A, 0).
Matrix positive_part(const Matrix &A);

/// Worst-case vertex test A*lower + A^+ * widths <= b + tol.
bool box_contains(const Polytope &poly, const Box &box, double tol = 1e-10);

/// Largest violation of the containment certificate (<= 0 when contained).
double box_certificate(const Polytope &poly, const Box &box);

/// Raised when the polytope is unbounded along a coordinate axis.
class UnboundedBoxError : public std::runtime_error
{
public:
  UnboundedBoxError(int coordinate, int direction);
  int coordinate() const { return coordinate_; }
  int direction() const { return direction_; }

private:
  int coordinate_;
  int direction_;
};

/// Raised when no box with strictly positive widths fits.
class EmptyInteriorError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

struct InnerBoxOptions
{
  double gap_tol = 1e-9;       ///< stop when (#constraints)/t falls below this
  double newton_tol = 1e-12;   ///< centering stops when lambda^2/2 falls below this
  double barrier_growth = 20.0;
  int max_newton = 200;
};

/**
 * @brief Maximum-volume axis-aligned box inside a bounded polytope.
 *
 * Maximizes sum_j ln v_j subject to A l + A^+ v <= b with a phase-I barrier
 * for a strictly feasible start followed by a path-following barrier method.
 * The returned box satisfies the containment certificate strictly.
 */
Box max_volume_inner_box(const Polytope &poly, const InnerBoxOptions &options = {});

/// Throws UnboundedBoxError when some coordinate is unbounded over the polytope.
void check_coordinate_bounded(const Polytope &poly);

} // namespace jdmpc
