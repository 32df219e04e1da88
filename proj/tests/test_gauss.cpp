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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "testutil.hpp"
#include "vaelab/gauss.hpp"

using namespace vaelab;
using namespace vaelab::gauss;
namespace tu = vaelab::testutil;

namespace {

GaussianDist scalar_gaussian(double mean, double var) {
  GaussianDist g;
  g.mean = {mean};
  g.cov = Matrix(1, 1);
  g.cov.at(0, 0) = var;
  g.diagonal = true;
  return g;
}

}  // namespace

TEST_CASE("logpdf of standard normals") {
  CHECK(logpdf(scalar_gaussian(0, 1), {0.0}) == doctest::Approx(-0.9189385332046727).epsilon(1e-12));
  CHECK(logpdf(GaussianDist::standard(2), {0.0, 0.0}) == doctest::Approx(-1.8378770664093453).epsilon(1e-12));
}

TEST_CASE("logpdf of scaled isotropic Gaussian at (1,1)") {
  // Direct formula: -1/2 (2 ln 2pi + ln 4 + 1).
  double want = -0.5 * (2.0 * std::log(2.0 * M_PI) + std::log(4.0) + 1.0);
  CHECK(want == doctest::Approx(-3.03102424696929).epsilon(1e-12));
  GaussianDist g = GaussianDist::from_diag({0.0, 0.0}, {2.0, 2.0});
  CHECK(logpdf(g, {1.0, 1.0}) == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("sampling rejects degenerate covariance") {
  GaussianDist g = scalar_gaussian(0.0, 0.0);
  Rng rng(1);
  CHECK_THROWS_AS(sample(g, rng, 1), CholeskyError);
}

TEST_CASE("sample moments of the standard normal") {
  Rng rng(77);
  GaussianDist g = scalar_gaussian(0.0, 1.0);
  double s = 0.0;
  const int n = 100000;
  for (const auto& x : sample(g, rng, n)) s += x[0];
  CHECK(std::abs(s / n) < 0.02);
}

TEST_CASE("sample covariance of a correlated Gaussian") {
  Rng rng(78);
  GaussianDist g;
  g.mean = {0.0, 0.0};
  g.cov = Matrix(2, 2);
  g.cov.at(0, 0) = 1.0;
  g.cov.at(0, 1) = 0.5;
  g.cov.at(1, 0) = 0.5;
  g.cov.at(1, 1) = 1.0;
  const int n = 100000;
  auto xs = sample(g, rng, n);
  Matrix c(2, 2);
  for (const auto& x : xs)
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) c.at(i, j) += x[i] * x[j] / n;
  CHECK(linalg::max_abs_diff(c, g.cov) < 0.02);
}

TEST_CASE("kl of identical distributions is zero") {
  Rng rng(5);
  GaussianDist g;
  g.mean = {0.3, -0.7, 1.1};
  g.cov = tu::random_spd(3, rng);
  CHECK(kl(g, g) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("kl mean-shift and variance terms") {
  CHECK(kl(scalar_gaussian(1, 1), scalar_gaussian(0, 1)) == doctest::Approx(0.5).epsilon(1e-12));
  // 1/2 (sigma^2 - 1 - ln sigma^2) at sigma^2 = 2.
  double want = 0.5 * (2.0 - 1.0 - std::log(2.0));
  CHECK(want == doctest::Approx(0.15342640972002733));
  CHECK(kl(scalar_gaussian(0, 2), scalar_gaussian(0, 1)) == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("kl is nonnegative and zero only at equality") {
  Rng rng(9);
  for (int rep = 0; rep < 50; ++rep) {
    GaussianDist q, p;
    int d = 1 + static_cast<int>(rng.below(4));
    q.mean.resize(d);
    p.mean.resize(d);
    for (int i = 0; i < d; ++i) {
      q.mean[i] = rng.normal();
      p.mean[i] = rng.normal();
    }
    q.cov = tu::random_spd(d, rng);
    p.cov = tu::random_spd(d, rng);
    double v = kl(q, p);
    CHECK(v >= -1e-12);
  }
}

TEST_CASE("conditioning with zero cross-covariance returns the marginal") {
  JointGaussian j;
  j.mean_x = {0.0, 0.0};
  j.mean_z = {1.0, -1.0};
  j.cov_xx = linalg::identity(2);
  j.cov_xz = Matrix(2, 2);
  j.cov_zz = linalg::scale(linalg::identity(2), 2.0);
  GaussianDist post = condition(j, {3.0, -2.0});
  CHECK(post.mean[0] == doctest::Approx(1.0));
  CHECK(post.mean[1] == doctest::Approx(-1.0));
  CHECK(linalg::max_abs_diff(post.cov, j.cov_zz) < 1e-14);
}

TEST_CASE("scalar latent model posterior via joint conditioning") {
  // x = theta z + eps, z ~ N(0,1), eps ~ N(0, s2 - theta^2).
  const double theta = 0.05, s2 = 0.01;
  JointGaussian j;
  j.mean_x = {0.0};
  j.mean_z = {0.0};
  j.cov_xx = Matrix(1, 1);
  j.cov_xx.at(0, 0) = s2;
  j.cov_xz = Matrix(1, 1);
  j.cov_xz.at(0, 0) = theta;
  j.cov_zz = linalg::identity(1);
  GaussianDist post = condition(j, {0.1});
  CHECK(post.mean[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(post.cov.at(0, 0) == doctest::Approx(0.75).epsilon(1e-12));
  // Closed form mean theta/s2 * x and variance (s2 - theta^2)/s2.
  CHECK(post.mean[0] == doctest::Approx(theta / s2 * 0.1));
  CHECK(post.cov.at(0, 0) == doctest::Approx((s2 - theta * theta) / s2));
}

TEST_CASE("conditioning matches the information-form posterior for the latent-noise-split model") {
  // x = chol(AA'+B) z + eps with eps ~ N(0, I s2 - B). Information form:
  //   S_p = (I + W' D^-1 W)^-1,  mu = S_p W' D^-1 x,  W = chol(AA'+B), D = I s2 - B.
  const double s2 = 0.01;
  Matrix a(2, 2);
  a.at(0, 0) = 0.75;
  a.at(0, 1) = 0.25;
  a.at(1, 0) = 1.5;
  a.at(1, 1) = -1.0;
  Matrix b(2, 2);
  b.at(0, 0) = 0.006;
  b.at(1, 1) = 0.006;

  Matrix m = linalg::add(linalg::matmul(a, linalg::transpose(a)), b);
  Matrix w = linalg::cholesky(m);
  Matrix d = linalg::sub(linalg::scale(linalg::identity(2), s2), b);

  JointGaussian j;
  j.mean_x = {0.0, 0.0};
  j.mean_z = {0.0, 0.0};
  j.cov_xx = linalg::add(linalg::matmul(w, linalg::transpose(w)), d);
  j.cov_xz = w;
  j.cov_zz = linalg::identity(2);
  Vector x = {1.0, 0.0};
  GaussianDist post = condition(j, x);

  Matrix dinv = linalg::spd_inverse(d);
  Matrix wt_dinv = linalg::matmul(linalg::transpose(w), dinv);
  Matrix prec = linalg::add(linalg::identity(2), linalg::matmul(wt_dinv, w));
  Matrix sp = linalg::spd_inverse(prec);
  Vector mu = linalg::matvec(sp, linalg::matvec(wt_dinv, x));

  CHECK(linalg::max_abs_diff(post.cov, sp) < 1e-10);
  CHECK(std::abs(post.mean[0] - mu[0]) < 1e-10);
  CHECK(std::abs(post.mean[1] - mu[1]) < 1e-10);
}

TEST_CASE("conditioned means average back to the prior mean") {
  Rng rng(31);
  JointGaussian j;
  j.mean_x = {0.0, 0.0};
  j.mean_z = {0.0, 0.0};
  Matrix w(2, 2);
  w.at(0, 0) = 0.8;
  w.at(1, 0) = 1.1;
  w.at(1, 1) = 1.4;
  j.cov_xx = linalg::add(linalg::matmul(w, linalg::transpose(w)),
                         linalg::scale(linalg::identity(2), 0.01));
  j.cov_xz = w;
  j.cov_zz = linalg::identity(2);

  GaussianDist marginal;
  marginal.mean = j.mean_x;
  marginal.cov = j.cov_xx;
  Vector acc(2, 0.0);
  const int n = 20000;
  for (const auto& x : sample(marginal, rng, n)) {
    GaussianDist post = condition(j, x);
    acc[0] += post.mean[0] / n;
    acc[1] += post.mean[1] / n;
  }
  CHECK(std::abs(acc[0]) < 0.02);
  CHECK(std::abs(acc[1]) < 0.02);
}

TEST_CASE("best-fit mean-field of identity and diagonal targets") {
  GaussianDist id = GaussianDist::standard(3);
  GaussianDist f = best_fit_meanfield(id);
  CHECK(linalg::max_abs_diff(f.cov, id.cov) < 1e-14);

  GaussianDist dg = GaussianDist::from_diag({0.1, -0.2}, {0.5, 2.5});
  GaussianDist fd = best_fit_meanfield(dg);
  CHECK(linalg::max_abs_diff(fd.cov, dg.cov) < 1e-12);
  CHECK(fd.mean == dg.mean);
}

TEST_CASE("best-fit mean-field of the correlated 2x2 target") {
  GaussianDist t;
  t.mean = {0.0, 0.0};
  t.cov = Matrix(2, 2);
  t.cov.at(0, 0) = 1.0;
  t.cov.at(0, 1) = 0.5;
  t.cov.at(1, 0) = 0.5;
  t.cov.at(1, 1) = 1.0;
  GaussianDist f = best_fit_meanfield(t);
  CHECK(f.cov.at(0, 0) == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(f.cov.at(1, 1) == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("best-fit mean-field agrees with numeric KL minimization") {
  // Independent oracle: cyclic per-coordinate golden-section search on
  // KL[diag(b) || target] treated as a black box.
  Rng rng(13);
  const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
  for (int rep = 0; rep < 10; ++rep) {
    int d = 2 + static_cast<int>(rng.below(3));
    GaussianDist t;
    t.mean.assign(d, 0.0);
    t.cov = tu::random_spd(d, rng, 0.3);

    Vector b(d, 1.0);
    auto klb = [&](const Vector& bb) {
      GaussianDist q = GaussianDist::from_diag(t.mean, bb);
      return kl(q, t);
    };
    for (int pass = 0; pass < 3; ++pass) {
      for (int i = 0; i < d; ++i) {
        double lo = 1e-8, hi = t.cov.at(i, i) + 1.0;
        while (hi - lo > 1e-12) {
          double m1 = hi - gr * (hi - lo);
          double m2 = lo + gr * (hi - lo);
          Vector b1 = b, b2 = b;
          b1[i] = m1;
          b2[i] = m2;
          if (klb(b1) < klb(b2)) hi = m2;
          else lo = m1;
        }
        b[i] = 0.5 * (lo + hi);
      }
    }
    GaussianDist f = best_fit_meanfield(t);
    for (int i = 0; i < d; ++i) CHECK(std::abs(f.cov.at(i, i) - b[i]) < 1e-6);
  }
}

TEST_CASE("mean-field fit never exceeds the target marginal variances") {
  Rng rng(17);
  for (int rep = 0; rep < 30; ++rep) {
    int d = 2 + static_cast<int>(rng.below(4));
    GaussianDist t;
    t.mean.assign(d, 0.0);
    t.cov = tu::random_spd(d, rng, 0.2);
    GaussianDist f = best_fit_meanfield(t);
    for (int i = 0; i < d; ++i) CHECK(f.cov.at(i, i) <= t.cov.at(i, i) + 1e-12);
  }
}

TEST_CASE("validity checks") {
  GaussianDist g;
  g.mean = {0.0, 0.0};
  g.cov = Matrix(2, 2);
  g.cov.at(0, 0) = 1.0;
  g.cov.at(0, 1) = 0.5;
  g.cov.at(1, 0) = 0.5 + 1e-6;  // asymmetric beyond tolerance
  g.cov.at(1, 1) = 1.0;
  CHECK_THROWS_AS(check_valid(g), Error);
}
