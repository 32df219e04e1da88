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

#include "vaelab/linalg.hpp"

#include <cmath>

namespace vaelab::linalg {

namespace {

void require(bool cond, const std::string& msg) {
  if (!cond) throw ShapeError(msg);
}

}  // namespace

Matrix identity(int n) {
  Matrix m(n, n);
  for (int i = 0; i < n; ++i) m.at(i, i) = 1.0;
  return m;
}

Matrix diag(const Vector& d) {
  Matrix m(static_cast<int>(d.size()), static_cast<int>(d.size()));
  for (size_t i = 0; i < d.size(); ++i) m.at(static_cast<int>(i), static_cast<int>(i)) = d[i];
  return m;
}

Vector diag_of(const Matrix& m) {
  require(m.rows == m.cols, "diag_of: matrix not square");
  Vector d(m.rows);
  for (int i = 0; i < m.rows; ++i) d[i] = m.at(i, i);
  return d;
}

Matrix matmul(const Matrix& x, const Matrix& y) {
  require(x.cols == y.rows, strf("matmul: inner dims differ, (%d,%d) x (%d,%d)", x.rows, x.cols, y.rows, y.cols));
  Matrix r(x.rows, y.cols);
  for (int i = 0; i < x.rows; ++i) {
    for (int k = 0; k < x.cols; ++k) {
      double xv = x.at(i, k);
      if (xv == 0.0) continue;
      for (int j = 0; j < y.cols; ++j) r.at(i, j) += xv * y.at(k, j);
    }
  }
  return r;
}

Matrix transpose(const Matrix& x) {
  Matrix r(x.cols, x.rows);
  for (int i = 0; i < x.rows; ++i)
    for (int j = 0; j < x.cols; ++j) r.at(j, i) = x.at(i, j);
  return r;
}

Matrix add(const Matrix& x, const Matrix& y) {
  require(x.rows == y.rows && x.cols == y.cols, "add: shape mismatch");
  Matrix r = x;
  for (size_t i = 0; i < r.a.size(); ++i) r.a[i] += y.a[i];
  return r;
}

Matrix sub(const Matrix& x, const Matrix& y) {
  require(x.rows == y.rows && x.cols == y.cols, "sub: shape mismatch");
  Matrix r = x;
  for (size_t i = 0; i < r.a.size(); ++i) r.a[i] -= y.a[i];
  return r;
}

Matrix scale(const Matrix& x, double c) {
  Matrix r = x;
  for (double& v : r.a) v *= c;
  return r;
}

Vector matvec(const Matrix& x, const Vector& v) {
  require(x.cols == static_cast<int>(v.size()), "matvec: dim mismatch");
  Vector r(x.rows, 0.0);
  for (int i = 0; i < x.rows; ++i)
    for (int j = 0; j < x.cols; ++j) r[i] += x.at(i, j) * v[j];
  return r;
}

Matrix symmetrize(const Matrix& x) {
  require(x.rows == x.cols, "symmetrize: matrix not square");
  Matrix r(x.rows, x.cols);
  for (int i = 0; i < x.rows; ++i)
    for (int j = 0; j < x.cols; ++j) r.at(i, j) = 0.5 * (x.at(i, j) + x.at(j, i));
  return r;
}

Matrix cholesky(const Matrix& spd) {
  require(spd.rows == spd.cols, "cholesky: matrix not square");
  Matrix s = symmetrize(spd);
  int n = s.rows;
  Matrix l(n, n);
  for (int j = 0; j < n; ++j) {
    double d = s.at(j, j);
    for (int k = 0; k < j; ++k) d -= l.at(j, k) * l.at(j, k);
    if (!(d > 0.0)) {
      throw CholeskyError(strf("cholesky: non-positive pivot %.6e at index %d", d, j), j);
    }
    double lj = std::sqrt(d);
    l.at(j, j) = lj;
    for (int i = j + 1; i < n; ++i) {
      double v = s.at(i, j);
      for (int k = 0; k < j; ++k) v -= l.at(i, k) * l.at(j, k);
      l.at(i, j) = v / lj;
    }
  }
  return l;
}

Vector solve_lower(const Matrix& lower, const Vector& b) {
  int n = lower.rows;
  require(n == static_cast<int>(b.size()), "solve_lower: dim mismatch");
  Vector x(b);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < i; ++j) x[i] -= lower.at(i, j) * x[j];
    x[i] /= lower.at(i, i);
  }
  return x;
}

Vector solve_upper_from_lower(const Matrix& lower, const Vector& b) {
  int n = lower.rows;
  require(n == static_cast<int>(b.size()), "solve_upper: dim mismatch");
  Vector x(b);
  for (int i = n - 1; i >= 0; --i) {
    for (int j = i + 1; j < n; ++j) x[i] -= lower.at(j, i) * x[j];
    x[i] /= lower.at(i, i);
  }
  return x;
}

Vector solve_spd(const Matrix& spd, const Vector& b) {
  Matrix l = cholesky(spd);
  return solve_upper_from_lower(l, solve_lower(l, b));
}

Matrix solve_spd(const Matrix& spd, const Matrix& b) {
  Matrix l = cholesky(spd);
  Matrix r(b.rows, b.cols);
  Vector col(b.rows);
  for (int j = 0; j < b.cols; ++j) {
    for (int i = 0; i < b.rows; ++i) col[i] = b.at(i, j);
    Vector x = solve_upper_from_lower(l, solve_lower(l, col));
    for (int i = 0; i < b.rows; ++i) r.at(i, j) = x[i];
  }
  return r;
}

Matrix spd_inverse(const Matrix& spd) { return solve_spd(spd, identity(spd.rows)); }

double spd_logdet(const Matrix& spd) {
  Matrix l = cholesky(spd);
  double s = 0.0;
  for (int i = 0; i < l.rows; ++i) s += std::log(l.at(i, i));
  return 2.0 * s;
}

Matrix lower_inverse(const Matrix& lower) {
  int n = lower.rows;
  Matrix inv(n, n);
  for (int j = 0; j < n; ++j) {
    Vector e(n, 0.0);
    e[j] = 1.0;
    Vector x = solve_lower(lower, e);
    for (int i = 0; i < n; ++i) inv.at(i, j) = x[i];
  }
  return inv;
}

double dot(const Vector& x, const Vector& y) {
  require(x.size() == y.size(), "dot: dim mismatch");
  double s = 0.0;
  for (size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
  return s;
}

double frobenius_sq(const Matrix& x) {
  double s = 0.0;
  for (double v : x.a) s += v * v;
  return s;
}

double max_abs_diff(const Matrix& x, const Matrix& y) {
  require(x.rows == y.rows && x.cols == y.cols, "max_abs_diff: shape mismatch");
  double m = 0.0;
  for (size_t i = 0; i < x.a.size(); ++i) m = std::max(m, std::abs(x.a[i] - y.a[i]));
  return m;
}

}  // namespace vaelab::linalg
