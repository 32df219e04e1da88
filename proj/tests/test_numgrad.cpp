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
#include "vaelab/numgrad.hpp"

using namespace vaelab;
using namespace vaelab::numgrad;
namespace tu = vaelab::testutil;

TEST_CASE("tensor shape/data invariant") {
  CHECK_THROWS_AS(Tensor({2, 3}, {1.0, 2.0}), ShapeError);
  Tensor t({2, 2}, {1, 2, 3, 4});
  CHECK(t.numel() == 4);
  CHECK(t.at(1, 0) == 3.0);
}

TEST_CASE("square value and gradient at x=3") {
  Graph g;
  Node x = g.leaf(Tensor::scalar(3.0), true);
  Node y = square(x);
  CHECK(g.value(y).item() == doctest::Approx(9.0));
  g.backward(y);
  CHECK(g.grad(x).item() == doctest::Approx(6.0));
}

TEST_CASE("cholesky of a diagonal matrix") {
  Graph g;
  Node s = g.leaf(Tensor({2, 2}, {4, 0, 0, 9}), false);
  Node l = cholesky(s);
  const Tensor& lv = g.value(l);
  CHECK(lv.at(0, 0) == doctest::Approx(2.0));
  CHECK(lv.at(1, 1) == doctest::Approx(3.0));
  CHECK(lv.at(0, 1) == 0.0);
  CHECK(lv.at(1, 0) == 0.0);
}

TEST_CASE("log-determinant gradient matches finite differences") {
  Tensor s({2, 2}, {2.0, 0.3, 0.3, 1.0});
  double err = tu::gradcheck([](Graph& g, Node x) { (void)g; return logdet_spd(x); }, s);
  CHECK(err < 1e-5);
}

TEST_CASE("backward of sum(matmul(W,z)) has outer-product structure") {
  Rng rng(7);
  Tensor w = Tensor::randn({3, 2}, rng);
  Tensor z = Tensor::randn({2, 1}, rng);
  Graph g;
  Node wn = g.leaf(w, true);
  Node zn = g.leaf(z, false);
  Node loss = sum(matmul(wn, zn));
  g.backward(loss);
  Tensor gw = g.grad(wn);
  // dL/dW_ij = z_j for every row i.
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 2; ++j) CHECK(gw.at(i, j) == doctest::Approx(z[j]).epsilon(1e-12));

  double err = tu::gradcheck(
      [&](Graph& g2, Node x) { return sum(matmul(x, g2.leaf(z, false))); }, w);
  CHECK(err < 1e-5);
}

TEST_CASE("gradient of unused parameter is exactly zero") {
  Graph g;
  Node p = g.leaf(Tensor::scalar(5.0), true);
  Node q = g.leaf(Tensor::scalar(2.0), true);
  Node loss = square(q);
  g.backward(loss);
  CHECK(g.grad(p).item() == 0.0);
}

TEST_CASE("gradient of c*p is exactly c") {
  Graph g;
  Node p = g.leaf(Tensor::scalar(1.25), true);
  Node loss = scale(p, -3.5);
  g.backward(loss);
  CHECK(g.grad(p).item() == -3.5);
}

TEST_CASE("backward requires scalar loss") {
  Graph g;
  Node p = g.leaf(Tensor({2}, {1, 2}), true);
  Node y = square(p);
  CHECK_THROWS_AS(g.backward(y), ShapeError);
}

TEST_CASE("shape mismatch error names both shapes") {
  Graph g;
  Node a = g.leaf(Tensor({2, 3}, std::vector<double>(6, 1.0)), false);
  Node b = g.leaf(Tensor({3, 2}, std::vector<double>(6, 1.0)), false);
  try {
    (void)add(a, b);
    CHECK(false);
  } catch (const ShapeError& e) {
    std::string msg = e.what();
    CHECK(msg.find("(2,3)") != std::string::npos);
    CHECK(msg.find("(3,2)") != std::string::npos);
  }
}

TEST_CASE("cholesky of non-SPD input reports failing pivot") {
  Graph g;
  Node s = g.leaf(Tensor({2, 2}, {1.0, 2.0, 2.0, 1.0}), false);
  try {
    (void)cholesky(s);
    CHECK(false);
  } catch (const CholeskyError& e) {
    CHECK(e.pivot() == 1);
  }
}

TEST_CASE("relu gradient at zero is zero") {
  Graph g;
  Node x = g.leaf(Tensor({3}, {-1.0, 0.0, 2.0}), true);
  Node loss = sum(relu(x));
  g.backward(loss);
  Tensor gx = g.grad(x);
  CHECK(gx[0] == 0.0);
  CHECK(gx[1] == 0.0);
  CHECK(gx[2] == 1.0);
}

TEST_CASE("signed cube root handles negatives and stays finite near zero") {
  Graph g;
  Node x = g.leaf(Tensor({3}, {-8.0, 1e-15, 27.0}), true);
  Node y = cbrt(x);
  CHECK(g.value(y)[0] == doctest::Approx(-2.0));
  CHECK(g.value(y)[2] == doctest::Approx(3.0));
  g.backward(sum(y));
  for (size_t i = 0; i < 3; ++i) CHECK(std::isfinite(g.grad(x)[i]));
}

TEST_CASE("evaluation is deterministic") {
  Rng rng(11);
  Tensor a = Tensor::randn({4, 4}, rng);
  auto run = [&]() {
    Graph g;
    Node x = g.leaf(a, false);
    Node y = sum(sigmoid(matmul(x, transpose(x))));
    return g.value(y).item();
  };
  double v1 = run();
  double v2 = run();
  CHECK(v1 == v2);  // bit-identical
}

TEST_CASE("primitive gradients match central finite differences") {
  Rng rng(42);
  auto positive = [&](std::vector<int> shape) {
    Tensor t = Tensor::randn(shape, rng, 0.3);
    for (size_t i = 0; i < t.numel(); ++i) t[i] = 0.5 + std::abs(t[i]);
    return t;
  };
  auto anywhere = [&](std::vector<int> shape) {
    Tensor t = Tensor::randn(shape, rng, 1.0);
    for (size_t i = 0; i < t.numel(); ++i)
      if (std::abs(t[i]) < 0.2) t[i] += t[i] >= 0 ? 0.3 : -0.3;  // keep away from kinks
    return t;
  };

  for (int rep = 0; rep < 5; ++rep) {
    CHECK(tu::gradcheck([](Graph&, Node x) { return sum(exp(x)); }, anywhere({2, 3})) < 1e-4);
    CHECK(tu::gradcheck([](Graph&, Node x) { return sum(log(x)); }, positive({2, 3})) < 1e-4);
    CHECK(tu::gradcheck([](Graph&, Node x) { return sum(sqrt(x)); }, positive({3})) < 1e-4);
    CHECK(tu::gradcheck([](Graph&, Node x) { return sum(cbrt(x)); }, anywhere({4})) < 1e-4);
    CHECK(tu::gradcheck([](Graph&, Node x) { return sum(pow_const(x, 3.0)); }, anywhere({3})) < 1e-4);
    CHECK(tu::gradcheck([](Graph&, Node x) { return sum(sigmoid(x)); }, anywhere({2, 2})) < 1e-4);
    CHECK(tu::gradcheck([](Graph&, Node x) { return sum(relu(x)); }, anywhere({5})) < 1e-4);
    CHECK(tu::gradcheck([](Graph&, Node x) { return mean(square(x)); }, anywhere({2, 3})) < 1e-4);
    CHECK(tu::gradcheck([](Graph&, Node x) { return l2_norm_sq(x); }, anywhere({2, 3})) < 1e-4);
    CHECK(tu::gradcheck([](Graph&, Node x) { return sum(square(sum_axis0(x))); }, anywhere({3, 2})) < 1e-4);
    CHECK(tu::gradcheck([](Graph&, Node x) { return sum(square(sum_axis1(x))); }, anywhere({3, 2})) < 1e-4);
    CHECK(tu::gradcheck([](Graph&, Node x) { return sum(square(transpose(x))); }, anywhere({2, 4})) < 1e-4);
    CHECK(tu::gradcheck([](Graph&, Node x) { return sum(exp(slice_cols(x, 1, 3))); }, anywhere({2, 4})) < 1e-4);
    CHECK(tu::gradcheck(
              [](Graph& g, Node x) {
                Node other = g.leaf(Tensor({2, 2}, {0.3, -0.2, 0.8, 1.1}), false);
                return sum(square(hconcat(x, other)));
              },
              anywhere({2, 3})) < 1e-4);
    CHECK(tu::gradcheck([](Graph&, Node x) { return sum(square(reshape(x, {3, 2}))); }, anywhere({2, 3})) < 1e-4);
  }
}

TEST_CASE("broadcast add/sub/mul gradients") {
  Rng rng(3);
  Tensor m = Tensor::randn({3, 2}, rng);
  Tensor row = Tensor::randn({2}, rng);
  Tensor col = Tensor::randn({3, 1}, rng);

  // matrix (+|*) row vector, gradient w.r.t. each operand
  CHECK(tu::gradcheck(
            [&](Graph& g, Node x) { return sum(square(add(x, g.leaf(row, false)))); }, m) < 1e-4);
  CHECK(tu::gradcheck(
            [&](Graph& g, Node x) { return sum(square(add(g.leaf(m, false), x))); }, row) < 1e-4);
  CHECK(tu::gradcheck(
            [&](Graph& g, Node x) { return sum(square(mul(x, g.leaf(col, false)))); }, m) < 1e-4);
  CHECK(tu::gradcheck(
            [&](Graph& g, Node x) { return sum(square(sub(g.leaf(m, false), x))); }, col) < 1e-4);
  CHECK(tu::gradcheck(
            [&](Graph& g, Node x) { return sum(square(mul(g.leaf(m, false), x))); },
            Tensor::scalar(0.7)) < 1e-4);
}

TEST_CASE("cholesky backward matches finite differences on random SPD") {
  Rng rng(19);
  for (int rep = 0; rep < 10; ++rep) {
    int d = 2 + static_cast<int>(rng.below(3));
    linalg::Matrix s = tu::random_spd(d, rng, 0.1);
    double err = tu::gradcheck([](Graph&, Node x) { return sum(cholesky(x)); },
                               Tensor::from_matrix(s));
    CHECK(err < 1e-4);
  }
}

TEST_CASE("spd inverse and diag_part gradients") {
  Rng rng(23);
  for (int rep = 0; rep < 5; ++rep) {
    linalg::Matrix s = tu::random_spd(3, rng, 0.2);
    CHECK(tu::gradcheck([](Graph&, Node x) { return sum(square(inverse_spd(x))); },
                        Tensor::from_matrix(s)) < 1e-4);
    CHECK(tu::gradcheck([](Graph&, Node x) { return sum(log(diag_part(inverse_spd(x)))); },
                        Tensor::from_matrix(s)) < 1e-4);
  }
}

TEST_CASE("adam: zero gradient leaves parameters unchanged") {
  Tensor p({2}, {1.0, -2.0});
  AdamState st;
  st.cfg.lr = 0.01;
  adam_step(st, {&p}, {Tensor::zeros({2})});
  CHECK(st.step == 1);
  CHECK(p[0] == 1.0);
  CHECK(p[1] == -2.0);
}

TEST_CASE("adam: first step magnitude is about lr") {
  Tensor p = Tensor::scalar(0.0);
  AdamState st;
  st.cfg.lr = 0.01;
  adam_step(st, {&p}, {Tensor::scalar(3.7)});
  CHECK(std::abs(p.item() + 0.01) < 1e-6);  // bias-corrected sign step
}

TEST_CASE("adam: reference loop reaches minimum of (p-2)^2") {
  // Independent scalar reference loop.
  double rp = 0.0, rm = 0.0, rv = 0.0;
  const double lr = 0.1, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  for (int t = 1; t <= 200; ++t) {
    double g = 2.0 * (rp - 2.0);
    rm = b1 * rm + (1 - b1) * g;
    rv = b2 * rv + (1 - b2) * g * g;
    double mh = rm / (1 - std::pow(b1, t));
    double vh = rv / (1 - std::pow(b2, t));
    rp -= lr * mh / (std::sqrt(vh) + eps);
  }
  CHECK(std::abs(rp - 2.0) < 1e-3);

  // Library trajectory matches the reference loop.
  Tensor p = Tensor::scalar(0.0);
  AdamState st;
  st.cfg.lr = lr;
  for (int t = 1; t <= 200; ++t) {
    Graph g;
    Node pn = g.leaf(p, true);
    Node loss = square(add_const(pn, -2.0));
    g.backward(loss);
    adam_step(st, {&p}, {g.grad(pn)});
  }
  CHECK(p.item() == doctest::Approx(rp).epsilon(1e-12));
  CHECK(std::abs(p.item() - 2.0) < 1e-3);
}

TEST_CASE("adam: NaN gradient raises divergence error") {
  Tensor p = Tensor::scalar(0.0);
  AdamState st;
  CHECK_THROWS_AS(adam_step(st, {&p}, {Tensor::scalar(std::nan(""))}), DivergenceError);
}

TEST_CASE("clip_global_norm scales long gradients") {
  std::vector<Tensor> grads = {Tensor({2}, {3.0, 4.0})};
  double norm = clip_global_norm(grads, 1.0);
  CHECK(norm == doctest::Approx(5.0));
  CHECK(grads[0][0] == doctest::Approx(0.6));
  CHECK(grads[0][1] == doctest::Approx(0.8));
}
