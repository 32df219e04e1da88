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

#include "vaelab/gauss.hpp"

#include <cmath>
#include <numbers>

namespace vaelab::gauss {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;  // ln(2*pi)
constexpr double kSymTol = 1e-12;

}  // namespace

GaussianDist GaussianDist::standard(int d) {
  GaussianDist g;
  g.mean.assign(static_cast<size_t>(d), 0.0);
  g.cov = linalg::identity(d);
  g.diagonal = true;
  return g;
}

GaussianDist GaussianDist::from_diag(Vector mean, Vector var) {
  if (mean.size() != var.size()) throw ShapeError("from_diag: mean/var length mismatch");
  GaussianDist g;
  g.mean = std::move(mean);
  g.cov = linalg::diag(var);
  g.diagonal = true;
  return g;
}

void check_valid(const GaussianDist& dist) {
  const Matrix& c = dist.cov;
  if (c.rows != c.cols || c.rows != dist.dim())
    throw ShapeError("gaussian: covariance shape does not match mean length");
  for (int i = 0; i < c.rows; ++i)
    for (int j = i + 1; j < c.cols; ++j)
      if (std::abs(c.at(i, j) - c.at(j, i)) > kSymTol)
        throw Error(strf("gaussian: covariance asymmetric at (%d,%d): %.3e vs %.3e", i, j,
                         c.at(i, j), c.at(j, i)));
  if (dist.diagonal) {
    for (int i = 0; i < c.rows; ++i)
      for (int j = 0; j < c.cols; ++j)
        if (i != j && c.at(i, j) != 0.0)
          throw Error("gaussian: diagonal-flagged covariance has nonzero off-diagonal");
  }
  linalg::cholesky(c);  // throws CholeskyError when not SPD
}

double logpdf(const GaussianDist& dist, const Vector& point) {
  if (static_cast<int>(point.size()) != dist.dim())
    throw ShapeError(strf("logpdf: point dim %zu vs distribution dim %d", point.size(), dist.dim()));
  Matrix l = linalg::cholesky(dist.cov);
  Vector r(point.size());
  for (size_t i = 0; i < point.size(); ++i) r[i] = point[i] - dist.mean[i];
  Vector y = linalg::solve_lower(l, r);  // quad = y'y
  double quad = linalg::dot(y, y);
  double logdet = 0.0;
  for (int i = 0; i < l.rows; ++i) logdet += std::log(l.at(i, i));
  logdet *= 2.0;
  return -0.5 * (dist.dim() * kLog2Pi + logdet + quad);
}

Vector sample_one(const GaussianDist& dist, Rng& rng) {
  Matrix l = linalg::cholesky(dist.cov);
  int d = dist.dim();
  Vector z(static_cast<size_t>(d));
  for (int i = 0; i < d; ++i) z[static_cast<size_t>(i)] = rng.normal();
  Vector x = dist.mean;
  for (int i = 0; i < d; ++i)
    for (int j = 0; j <= i; ++j) x[static_cast<size_t>(i)] += l.at(i, j) * z[static_cast<size_t>(j)];
  return x;
}

std::vector<Vector> sample(const GaussianDist& dist, Rng& rng, int n) {
  if (n < 1) throw Error("sample: n must be >= 1");
  Matrix l = linalg::cholesky(dist.cov);
  int d = dist.dim();
  std::vector<Vector> out;
  out.reserve(static_cast<size_t>(n));
  Vector z(static_cast<size_t>(d));
  for (int k = 0; k < n; ++k) {
    for (int i = 0; i < d; ++i) z[static_cast<size_t>(i)] = rng.normal();
    Vector x = dist.mean;
    for (int i = 0; i < d; ++i)
      for (int j = 0; j <= i; ++j) x[static_cast<size_t>(i)] += l.at(i, j) * z[static_cast<size_t>(j)];
    out.push_back(std::move(x));
  }
  return out;
}

double kl(const GaussianDist& q, const GaussianDist& p) {
  if (q.dim() != p.dim()) throw ShapeError("kl: dimension mismatch");
  int d = q.dim();
  Matrix pinv = linalg::spd_inverse(p.cov);
  double tr = 0.0;
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) tr += pinv.at(i, j) * q.cov.at(j, i);
  Vector dm(static_cast<size_t>(d));
  for (int i = 0; i < d; ++i) dm[static_cast<size_t>(i)] = p.mean[static_cast<size_t>(i)] - q.mean[static_cast<size_t>(i)];
  double quad = linalg::dot(dm, linalg::matvec(pinv, dm));
  double logdet_p = linalg::spd_logdet(p.cov);
  double logdet_q = linalg::spd_logdet(q.cov);
  return 0.5 * (tr + quad - d + logdet_p - logdet_q);
}

GaussianDist condition(const JointGaussian& joint, const Vector& x) {
  int dx = static_cast<int>(joint.mean_x.size());
  int dz = static_cast<int>(joint.mean_z.size());
  if (static_cast<int>(x.size()) != dx)
    throw ShapeError(strf("condition: x dim %zu vs block dim %d", x.size(), dx));
  if (joint.cov_xx.rows != dx || joint.cov_xz.rows != dx || joint.cov_xz.cols != dz ||
      joint.cov_zz.rows != dz)
    throw ShapeError("condition: block shapes inconsistent");

  // mu = mu_z + Sxz' Sxx^-1 (x - mu_x);  Sigma = Szz - Sxz' Sxx^-1 Sxz
  Vector r(static_cast<size_t>(dx));
  for (int i = 0; i < dx; ++i) r[static_cast<size_t>(i)] = x[static_cast<size_t>(i)] - joint.mean_x[static_cast<size_t>(i)];
  Vector w = linalg::solve_spd(joint.cov_xx, r);              // Sxx^-1 (x - mu_x)
  Matrix k = linalg::solve_spd(joint.cov_xx, joint.cov_xz);   // Sxx^-1 Sxz

  GaussianDist out;
  out.mean = joint.mean_z;
  for (int i = 0; i < dz; ++i)
    for (int j = 0; j < dx; ++j)
      out.mean[static_cast<size_t>(i)] += joint.cov_xz.at(j, i) * w[static_cast<size_t>(j)];
  Matrix szx = linalg::transpose(joint.cov_xz);
  out.cov = linalg::sub(joint.cov_zz, linalg::matmul(szx, k));
  out.cov = linalg::symmetrize(out.cov);
  return out;
}

GaussianDist best_fit_meanfield(const GaussianDist& target) {
  Matrix prec = linalg::spd_inverse(target.cov);
  int d = target.dim();
  Vector var(static_cast<size_t>(d));
  for (int i = 0; i < d; ++i) var[static_cast<size_t>(i)] = 1.0 / prec.at(i, i);
  return GaussianDist::from_diag(target.mean, var);
}

double entropy(const GaussianDist& dist) {
  return 0.5 * (dist.dim() * (kLog2Pi + 1.0) + linalg::spd_logdet(dist.cov));
}

}  // namespace vaelab::gauss
