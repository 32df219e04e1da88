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

#include <cstdint>
#include <optional>
#include <vector>

#include "vaelab/linalg.hpp"
#include "vaelab/util.hpp"

// Reverse-mode automatic differentiation over dense double tensors.
//
// The graph is a define-by-run tape: nodes are appended in evaluation
// order, so insertion order is a topological order and backward() is a
// single reverse sweep that visits each node exactly once. Graphs are
// rebuilt per training step; a Graph instance is single-threaded.
//
// Rank <= 2 is supported (scalars, vectors, matrices). Broadcasting in
// the elementwise ops covers scalar, row-vector (1,k) and column-vector
// (n,1) operands; nothing more is needed by the models here.

namespace vaelab::numgrad {

class Tensor {
 public:
  Tensor() = default;
  Tensor(std::vector<int> shape, std::vector<double> data);

  static Tensor scalar(double v);
  static Tensor zeros(std::vector<int> shape);
  static Tensor full(std::vector<int> shape, double v);
  static Tensor from_vector(const linalg::Vector& v);           // shape (n)
  static Tensor from_matrix(const linalg::Matrix& m);           // shape (n,k)
  static Tensor randn(std::vector<int> shape, Rng& rng, double stddev = 1.0);

  const std::vector<int>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  size_t numel() const { return data_.size(); }
  bool is_scalar() const { return data_.size() == 1 && shape_.size() <= 1; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  double& operator[](size_t i) { return data_[i]; }
  double operator[](size_t i) const { return data_[i]; }

  // Rank-2 element access.
  double& at(int i, int j);
  double at(int i, int j) const;

  double item() const;  // needs_grad numel()==1
  int dim(int axis) const { return shape_[axis]; }

  linalg::Matrix to_matrix() const;  // rank-2 (or rank-1 as a row)
  linalg::Vector to_vector() const;

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

 private:
  std::vector<int> shape_;
  std::vector<double> data_;
};

enum class Op : uint8_t {
  Leaf,
  Add, Sub, Mul,
  AddC, ScaleC,          // x + c, c * x
  MatMul, Transpose,
  Exp, Log, Square, Sqrt, Cbrt, PowC,
  Relu, Sigmoid, Clamp,
  Sum, SumAxis0, SumAxis1,
  Cholesky, LogDetSpd, InverseSpd, DiagPart,
  SliceCols, HConcat, Reshape,
};

class Graph;

// Lightweight handle to a node on a graph.
struct Node {
  Graph* graph = nullptr;
  int id = -1;
  bool valid() const { return graph != nullptr && id >= 0; }
};

class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  // Record an input tensor. Only leaves created with requires_grad=true
  // (and nodes computed from them) receive gradients.
  Node leaf(Tensor value, bool requires_grad = false);
  Node constant(double v) { return leaf(Tensor::scalar(v), false); }

  const Tensor& value(Node n) const;
  // Gradient of the last backward() loss w.r.t. node n (zeros if none).
  Tensor grad(Node n) const;

  // Reverse sweep from a scalar loss node. Each node is visited once.
  void backward(Node loss);

  size_t size() const { return nodes_.size(); }

  // --- internal (used by op builders) ---
  struct Rec {
    Op op = Op::Leaf;
    int a = -1;
    int b = -1;
    Tensor val;
    Tensor grd;           // allocated lazily during backward
    bool needs_grad = false;
    double c0 = 0.0;      // op constants (scale, exponent, clamp lo, slice j0, ...)
    double c1 = 0.0;
  };
  Node push(Rec rec);
  Rec& rec(int id) { return nodes_[static_cast<size_t>(id)]; }
  const Rec& rec(int id) const { return nodes_[static_cast<size_t>(id)]; }

 private:
  std::vector<Rec> nodes_;
};

// Elementwise with broadcasting (scalar / row / column operands).
Node add(Node a, Node b);
Node sub(Node a, Node b);
Node mul(Node a, Node b);
Node operator+(Node a, Node b);
Node operator-(Node a, Node b);
Node operator*(Node a, Node b);

Node add_const(Node a, double c);
Node scale(Node a, double c);
Node neg(Node a);

Node matmul(Node a, Node b);
Node transpose(Node a);

Node exp(Node a);
Node log(Node a);
Node square(Node a);
Node sqrt(Node a);
// Signed cube root: sign(x) * |x|^(1/3); gradient guard |x| >= 1e-12.
Node cbrt(Node a);
Node pow_const(Node a, double p);
Node relu(Node a);
Node sigmoid(Node a);
Node clamp(Node a, double lo, double hi);

Node sum(Node a);                 // all elements -> scalar
Node sum_axis0(Node a);           // (n,k) -> (k)
Node sum_axis1(Node a);           // (n,k) -> (n)
Node mean(Node a);                // sum / numel
Node l2_norm_sq(Node a);          // sum of squares -> scalar

// SPD matrix ops. Inputs are symmetrized before factorization, and
// gradients are symmetrized accordingly.
Node cholesky(Node spd);
Node logdet_spd(Node spd);
Node inverse_spd(Node spd);
Node diag_part(Node square_matrix);

Node slice_cols(Node a, int j0, int j1);  // columns [j0, j1)
Node hconcat(Node a, Node b);
Node reshape(Node a, std::vector<int> shape);

// --- Adam optimizer -------------------------------------------------------

struct AdamConfig {
  double lr = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  AdamConfig cfg;
  int64_t step = 0;
  std::vector<Tensor> m;
  std::vector<Tensor> v;
};

// Standard Adam update with bias correction; increments state.step.
// Accumulator shapes are created on first use and must match thereafter.
// Throws DivergenceError if any gradient is non-finite.
void adam_step(AdamState& state, const std::vector<Tensor*>& params,
               const std::vector<Tensor>& grads);

// Scales all gradients so their global L2 norm is at most max_norm.
// Returns the pre-clip norm. Non-finite norms leave grads untouched
// (the subsequent adam_step will raise DivergenceError).
double clip_global_norm(std::vector<Tensor>& grads, double max_norm);

}  // namespace vaelab::numgrad
