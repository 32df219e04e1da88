// Copyright 2026 The vaelab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <vector>

#include "vaelab/util.hpp"

// Small dense row-major matrices. Everything here is exact double
// arithmetic on matrices of side <= a few hundred; no BLAS needed.

namespace vaelab::linalg {

using Vector = std::vector<double>;

struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> a;

  Matrix() = default;
  Matrix(int r, int c, double fill = 0.0) : rows(r), cols(c), a(static_cast<size_t>(r) * c, fill) {}

  double& at(int i, int j) { return a[static_cast<size_t>(i) * cols + j]; }
  double at(int i, int j) const { return a[static_cast<size_t>(i) * cols + j]; }
  size_t size() const { return a.size(); }
};

Matrix identity(int n);
Matrix diag(const Vector& d);
Vector diag_of(const Matrix& m);

Matrix matmul(const Matrix& x, const Matrix& y);
Matrix transpose(const Matrix& x);
Matrix add(const Matrix& x, const Matrix& y);
Matrix sub(const Matrix& x, const Matrix& y);
Matrix scale(const Matrix& x, double c);
Vector matvec(const Matrix& x, const Vector& v);

// (x + x^T) / 2.
Matrix symmetrize(const Matrix& x);

// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
// The input is symmetrized first. Throws CholeskyError with the failing
// pivot index when the matrix is not positive definite.
Matrix cholesky(const Matrix& spd);

// Solve L y = b / L^T y = b for triangular L.
Vector solve_lower(const Matrix& lower, const Vector& b);
Vector solve_upper_from_lower(const Matrix& lower, const Vector& b);

// Solve S x = b via Cholesky.
Vector solve_spd(const Matrix& spd, const Vector& b);
Matrix solve_spd(const Matrix& spd, const Matrix& b);

Matrix spd_inverse(const Matrix& spd);
double spd_logdet(const Matrix& spd);

// Inverse of a lower-triangular matrix.
Matrix lower_inverse(const Matrix& lower);

double dot(const Vector& x, const Vector& y);
double frobenius_sq(const Matrix& x);

double max_abs_diff(const Matrix& x, const Matrix& y);

}  // namespace vaelab::linalg
