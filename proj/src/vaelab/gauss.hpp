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

#include "vaelab/linalg.hpp"
#include "vaelab/util.hpp"

// Exact multivariate-Gaussian toolkit: densities, sampling, KL divergences,
// joint-Gaussian conditioning and the best-fitting mean-field (diagonal)
// approximation. All functions are pure and safe for concurrent use.

namespace vaelab::gauss {

using linalg::Matrix;
using linalg::Vector;

struct GaussianDist {
  Vector mean;
  Matrix cov;
  bool diagonal = false;  // marks diagonal-only structure; off-diagonals must be zero

  int dim() const { return static_cast<int>(mean.size()); }

  static GaussianDist standard(int d);
  static GaussianDist from_diag(Vector mean, Vector var);
};

// Zero-indexed blocks: x first, z second.
struct JointGaussian {
  Vector mean_x;
  Vector mean_z;
  Matrix cov_xx;
  Matrix cov_xz;  // dim(x) x dim(z)
  Matrix cov_zz;
};

// Exact log-density in nats (Cholesky-based).
double logpdf(const GaussianDist& dist, const Vector& point);

// n draws, each mean + chol(cov) * standard normals; deterministic given rng.
std::vector<Vector> sample(const GaussianDist& dist, Rng& rng, int n);
Vector sample_one(const GaussianDist& dist, Rng& rng);

// KL[q || p] in nats, closed form.
double kl(const GaussianDist& q, const GaussianDist& p);

// Conditional distribution of z given x under the joint.
GaussianDist condition(const JointGaussian& joint, const Vector& x);

// Diagonal Gaussian minimizing KL[diag || target] at fixed mean:
// the mean passes through and B_ii = 1 / (target.cov^-1)_ii.
GaussianDist best_fit_meanfield(const GaussianDist& target);

// Differential entropy in nats.
double entropy(const GaussianDist& dist);

void check_valid(const GaussianDist& dist);  // symmetric within 1e-12, SPD

}  // namespace vaelab::gauss
