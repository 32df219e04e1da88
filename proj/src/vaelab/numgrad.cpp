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

#include "vaelab/numgrad.hpp"

#include <cmath>

namespace vaelab::numgrad {

namespace {

size_t shape_numel(const std::vector<int>& shape) {
  size_t n = 1;
  for (int d : shape) {
    if (d < 0) throw ShapeError("negative extent in shape " + shape_str(shape));
    n *= static_cast<size_t>(d);
  }
  return n;
}

// Normalize rank <= 2 shapes to (rows, cols).
void norm2d(const std::vector<int>& shape, int& r, int& c) {
  if (shape.empty()) {
    r = 1;
    c = 1;
  } else if (shape.size() == 1) {
    r = 1;
    c = shape[0];
  } else if (shape.size() == 2) {
    r = shape[0];
    c = shape[1];
  } else {
    throw ShapeError("rank > 2 not supported, shape " + shape_str(shape));
  }
}

void check_same_graph(Node a, Node b) {
  if (a.graph != b.graph) throw Error("operands belong to different graphs");
}

}  // namespace

// --- Tensor -----------------------------------------------------------------

Tensor::Tensor(std::vector<int> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_numel(shape_) != data_.size()) {
    throw ShapeError(strf("tensor data length %zu does not match shape %s", data_.size(),
                          shape_str(shape_).c_str()));
  }
}

Tensor Tensor::scalar(double v) { return Tensor({}, {v}); }

Tensor Tensor::zeros(std::vector<int> shape) {
  size_t n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, 0.0));
}

Tensor Tensor::full(std::vector<int> shape, double v) {
  size_t n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, v));
}

Tensor Tensor::from_vector(const linalg::Vector& v) {
  return Tensor({static_cast<int>(v.size())}, v);
}

Tensor Tensor::from_matrix(const linalg::Matrix& m) { return Tensor({m.rows, m.cols}, m.a); }

Tensor Tensor::randn(std::vector<int> shape, Rng& rng, double stddev) {
  Tensor t = zeros(std::move(shape));
  for (size_t i = 0; i < t.numel(); ++i) t[i] = stddev * rng.normal();
  return t;
}

double& Tensor::at(int i, int j) {
  if (rank() != 2) throw ShapeError("at(i,j) on tensor of shape " + shape_str(shape_));
  return data_[static_cast<size_t>(i) * shape_[1] + j];
}

double Tensor::at(int i, int j) const { return const_cast<Tensor*>(this)->at(i, j); }

double Tensor::item() const {
  if (numel() != 1) throw ShapeError("item() on tensor of shape " + shape_str(shape_));
  return data_[0];
}

linalg::Matrix Tensor::to_matrix() const {
  int r, c;
  norm2d(shape_, r, c);
  linalg::Matrix m(r, c);
  m.a = data_;
  return m;
}

linalg::Vector Tensor::to_vector() const { return data_; }

// --- Graph ------------------------------------------------------------------

Node Graph::push(Rec rec) {
  nodes_.push_back(std::move(rec));
  return Node{this, static_cast<int>(nodes_.size()) - 1};
}

Node Graph::leaf(Tensor value, bool requires_grad) {
  Rec r;
  r.op = Op::Leaf;
  r.val = std::move(value);
  r.needs_grad = requires_grad;
  return push(std::move(r));
}

const Tensor& Graph::value(Node n) const {
  if (n.graph != this || n.id < 0 || n.id >= static_cast<int>(nodes_.size()))
    throw Error("value(): node does not belong to this graph");
  return nodes_[static_cast<size_t>(n.id)].val;
}

Tensor Graph::grad(Node n) const {
  const Rec& r = rec(n.id);
  if (r.grd.numel() == 0) return Tensor::zeros(r.val.shape());
  return r.grd;
}

namespace {

void ensure_grad(Graph::Rec& r) {
  if (r.grd.numel() == 0) r.grd = Tensor::zeros(r.val.shape());
}

// Accumulate g (with normalized result dims R x C) into the gradient of a
// parent whose value has normalized dims pr x pc, reducing over broadcast
// dims. scale is +1/-1 (for Sub) and factor optionally multiplies by the
// other operand's broadcast value (for Mul).
void accum_broadcast(Graph::Rec& parent, const Tensor& g, int R, int C, double sign,
                     const Tensor* factor, int fr, int fc) {
  ensure_grad(parent);
  int pr, pc;
  norm2d(parent.val.shape(), pr, pc);
  for (int i = 0; i < R; ++i) {
    for (int j = 0; j < C; ++j) {
      double v = g[static_cast<size_t>(i) * C + j];
      if (factor) {
        int fi = fr == 1 ? 0 : i;
        int fj = fc == 1 ? 0 : j;
        v *= (*factor)[static_cast<size_t>(fi) * fc + fj];
      }
      int pi = pr == 1 ? 0 : i;
      int pj = pc == 1 ? 0 : j;
      parent.grd[static_cast<size_t>(pi) * pc + pj] += sign * v;
    }
  }
}

linalg::Matrix phi_lower_half_diag(const linalg::Matrix& x) {
  linalg::Matrix r(x.rows, x.cols);
  for (int i = 0; i < x.rows; ++i) {
    for (int j = 0; j < x.cols; ++j) {
      if (i > j) r.at(i, j) = x.at(i, j);
      else if (i == j) r.at(i, j) = 0.5 * x.at(i, j);
    }
  }
  return r;
}

}  // namespace

void Graph::backward(Node loss) {
  if (loss.graph != this) throw Error("backward(): loss node not on this graph");
  Rec& lrec = nodes_[static_cast<size_t>(loss.id)];
  if (lrec.val.numel() != 1) {
    throw ShapeError("backward(): loss must be scalar, got shape " + shape_str(lrec.val.shape()));
  }
  for (auto& r : nodes_) r.grd = Tensor();
  if (!lrec.needs_grad) return;  // loss does not depend on any parameter
  lrec.grd = Tensor::full(lrec.val.shape(), 1.0);

  for (int id = loss.id; id >= 0; --id) {
    Rec& r = nodes_[static_cast<size_t>(id)];
    if (!r.needs_grad || r.grd.numel() == 0) continue;
    const Tensor& g = r.grd;
    Rec* pa = r.a >= 0 ? &nodes_[static_cast<size_t>(r.a)] : nullptr;
    Rec* pb = r.b >= 0 ? &nodes_[static_cast<size_t>(r.b)] : nullptr;
    int R, C;
    norm2d(r.val.shape(), R, C);

    switch (r.op) {
      case Op::Leaf:
        break;
      case Op::Add:
      case Op::Sub: {
        double sb = r.op == Op::Sub ? -1.0 : 1.0;
        if (pa->needs_grad) accum_broadcast(*pa, g, R, C, 1.0, nullptr, 0, 0);
        if (pb->needs_grad) accum_broadcast(*pb, g, R, C, sb, nullptr, 0, 0);
        break;
      }
      case Op::Mul: {
        int ar, ac, br, bc;
        norm2d(pa->val.shape(), ar, ac);
        norm2d(pb->val.shape(), br, bc);
        if (pa->needs_grad) accum_broadcast(*pa, g, R, C, 1.0, &pb->val, br, bc);
        if (pb->needs_grad) accum_broadcast(*pb, g, R, C, 1.0, &pa->val, ar, ac);
        break;
      }
      case Op::AddC: {
        if (pa->needs_grad) {
          ensure_grad(*pa);
          for (size_t i = 0; i < g.numel(); ++i) pa->grd[i] += g[i];
        }
        break;
      }
      case Op::ScaleC: {
        if (pa->needs_grad) {
          ensure_grad(*pa);
          for (size_t i = 0; i < g.numel(); ++i) pa->grd[i] += r.c0 * g[i];
        }
        break;
      }
      case Op::MatMul: {
        linalg::Matrix gm = g.to_matrix();
        if (pa->needs_grad) {
          ensure_grad(*pa);
          linalg::Matrix da = linalg::matmul(gm, linalg::transpose(pb->val.to_matrix()));
          for (size_t i = 0; i < da.a.size(); ++i) pa->grd[i] += da.a[i];
        }
        if (pb->needs_grad) {
          ensure_grad(*pb);
          linalg::Matrix db = linalg::matmul(linalg::transpose(pa->val.to_matrix()), gm);
          for (size_t i = 0; i < db.a.size(); ++i) pb->grd[i] += db.a[i];
        }
        break;
      }
      case Op::Transpose: {
        if (pa->needs_grad) {
          ensure_grad(*pa);
          int gr = r.val.dim(0), gc = r.val.dim(1);
          for (int i = 0; i < gr; ++i)
            for (int j = 0; j < gc; ++j)
              pa->grd[static_cast<size_t>(j) * gr + i] += g[static_cast<size_t>(i) * gc + j];
        }
        break;
      }
      case Op::Exp: {
        if (pa->needs_grad) {
          ensure_grad(*pa);
          for (size_t i = 0; i < g.numel(); ++i) pa->grd[i] += g[i] * r.val[i];
        }
        break;
      }
      case Op::Log: {
        if (pa->needs_grad) {
          ensure_grad(*pa);
          for (size_t i = 0; i < g.numel(); ++i) pa->grd[i] += g[i] / pa->val[i];
        }
        break;
      }
      case Op::Square: {
        if (pa->needs_grad) {
          ensure_grad(*pa);
          for (size_t i = 0; i < g.numel(); ++i) pa->grd[i] += g[i] * 2.0 * pa->val[i];
        }
        break;
      }
      case Op::Sqrt: {
        if (pa->needs_grad) {
          ensure_grad(*pa);
          for (size_t i = 0; i < g.numel(); ++i) pa->grd[i] += g[i] * 0.5 / r.val[i];
        }
        break;
      }
      case Op::Cbrt: {
        if (pa->needs_grad) {
          ensure_grad(*pa);
          for (size_t i = 0; i < g.numel(); ++i) {
            double ax = std::max(std::abs(pa->val[i]), 1e-12);
            pa->grd[i] += g[i] / (3.0 * std::cbrt(ax) * std::cbrt(ax));
          }
        }
        break;
      }
      case Op::PowC: {
        if (pa->needs_grad) {
          ensure_grad(*pa);
          for (size_t i = 0; i < g.numel(); ++i)
            pa->grd[i] += g[i] * r.c0 * std::pow(pa->val[i], r.c0 - 1.0);
        }
        break;
      }
      case Op::Relu: {
        if (pa->needs_grad) {
          ensure_grad(*pa);
          for (size_t i = 0; i < g.numel(); ++i)
            if (pa->val[i] > 0.0) pa->grd[i] += g[i];
        }
        break;
      }
      case Op::Sigmoid: {
        if (pa->needs_grad) {
          ensure_grad(*pa);
          for (size_t i = 0; i < g.numel(); ++i) pa->grd[i] += g[i] * r.val[i] * (1.0 - r.val[i]);
        }
        break;
      }
      case Op::Clamp: {
        if (pa->needs_grad) {
          ensure_grad(*pa);
          for (size_t i = 0; i < g.numel(); ++i)
            if (pa->val[i] >= r.c0 && pa->val[i] <= r.c1) pa->grd[i] += g[i];
        }
        break;
      }
      case Op::Sum: {
        if (pa->needs_grad) {
          ensure_grad(*pa);
          double gv = g[0];
          for (size_t i = 0; i < pa->grd.numel(); ++i) pa->grd[i] += gv;
        }
        break;
      }
      case Op::SumAxis0: {
        if (pa->needs_grad) {
          ensure_grad(*pa);
          int n = pa->val.dim(0), k = pa->val.dim(1);
          for (int i = 0; i < n; ++i)
            for (int j = 0; j < k; ++j) pa->grd[static_cast<size_t>(i) * k + j] += g[static_cast<size_t>(j)];
        }
        break;
      }
      case Op::SumAxis1: {
        if (pa->needs_grad) {
          ensure_grad(*pa);
          int n = pa->val.dim(0), k = pa->val.dim(1);
          for (int i = 0; i < n; ++i)
            for (int j = 0; j < k; ++j) pa->grd[static_cast<size_t>(i) * k + j] += g[static_cast<size_t>(i)];
        }
        break;
      }
      case Op::Cholesky: {
        if (pa->needs_grad) {
          ensure_grad(*pa);
          linalg::Matrix L = r.val.to_matrix();
          linalg::Matrix Lbar = g.to_matrix();
          linalg::Matrix P = phi_lower_half_diag(linalg::matmul(linalg::transpose(L), Lbar));
          linalg::Matrix Linv = linalg::lower_inverse(L);
          linalg::Matrix raw =
              linalg::matmul(linalg::matmul(linalg::transpose(Linv), P), Linv);
          linalg::Matrix sbar = linalg::symmetrize(raw);
          for (size_t i = 0; i < sbar.a.size(); ++i) pa->grd[i] += sbar.a[i];
        }
        break;
      }
      case Op::LogDetSpd: {
        if (pa->needs_grad) {
          ensure_grad(*pa);
          linalg::Matrix inv = linalg::spd_inverse(pa->val.to_matrix());
          double gv = g[0];
          for (size_t i = 0; i < inv.a.size(); ++i) pa->grd[i] += gv * inv.a[i];
        }
        break;
      }
      case Op::InverseSpd: {
        if (pa->needs_grad) {
          ensure_grad(*pa);
          linalg::Matrix Y = r.val.to_matrix();
          linalg::Matrix raw = linalg::scale(linalg::matmul(linalg::matmul(Y, g.to_matrix()), Y), -1.0);
          linalg::Matrix sbar = linalg::symmetrize(raw);
          for (size_t i = 0; i < sbar.a.size(); ++i) pa->grd[i] += sbar.a[i];
        }
        break;
      }
      case Op::DiagPart: {
        if (pa->needs_grad) {
          ensure_grad(*pa);
          int d = pa->val.dim(0);
          for (int i = 0; i < d; ++i) pa->grd[static_cast<size_t>(i) * d + i] += g[static_cast<size_t>(i)];
        }
        break;
      }
      case Op::SliceCols: {
        if (pa->needs_grad) {
          ensure_grad(*pa);
          int pr2, pc2;
          norm2d(pa->val.shape(), pr2, pc2);
          int j0 = static_cast<int>(r.c0);
          int w = static_cast<int>(r.c1) - j0;
          for (int i = 0; i < pr2; ++i)
            for (int j = 0; j < w; ++j)
              pa->grd[static_cast<size_t>(i) * pc2 + j0 + j] += g[static_cast<size_t>(i) * w + j];
        }
        break;
      }
      case Op::HConcat: {
        int ar2, ac2, br2, bc2;
        norm2d(pa->val.shape(), ar2, ac2);
        norm2d(pb->val.shape(), br2, bc2);
        int w = ac2 + bc2;
        if (pa->needs_grad) {
          ensure_grad(*pa);
          for (int i = 0; i < ar2; ++i)
            for (int j = 0; j < ac2; ++j)
              pa->grd[static_cast<size_t>(i) * ac2 + j] += g[static_cast<size_t>(i) * w + j];
        }
        if (pb->needs_grad) {
          ensure_grad(*pb);
          for (int i = 0; i < br2; ++i)
            for (int j = 0; j < bc2; ++j)
              pb->grd[static_cast<size_t>(i) * bc2 + j] += g[static_cast<size_t>(i) * w + ac2 + j];
        }
        break;
      }
      case Op::Reshape: {
        if (pa->needs_grad) {
          ensure_grad(*pa);
          for (size_t i = 0; i < g.numel(); ++i) pa->grd[i] += g[i];
        }
        break;
      }
    }
  }
}

// --- op builders --------------------------------------------------------------

namespace {

Node binary_elementwise(Op op, Node a, Node b) {
  check_same_graph(a, b);
  Graph& g = *a.graph;
  const Tensor& av = g.value(a);
  const Tensor& bv = g.value(b);
  int ar, ac, br, bc;
  norm2d(av.shape(), ar, ac);
  norm2d(bv.shape(), br, bc);
  bool rows_ok = ar == br || ar == 1 || br == 1;
  bool cols_ok = ac == bc || ac == 1 || bc == 1;
  if (!rows_ok || !cols_ok) {
    throw ShapeError(strf("elementwise op: incompatible shapes %s and %s",
                          shape_str(av.shape()).c_str(), shape_str(bv.shape()).c_str()));
  }
  int R = std::max(ar, br), C = std::max(ac, bc);
  std::vector<int> out_shape;
  if (av.shape() == bv.shape()) {
    out_shape = av.shape();
  } else if (R == 1 && C == 1) {
    out_shape = {};
  } else if (R == 1 && av.rank() <= 1 && bv.rank() <= 1) {
    out_shape = {C};
  } else {
    out_shape = {R, C};
  }
  Tensor out = Tensor::zeros(out_shape);
  for (int i = 0; i < R; ++i) {
    for (int j = 0; j < C; ++j) {
      double x = av[static_cast<size_t>(ar == 1 ? 0 : i) * ac + (ac == 1 ? 0 : j)];
      double y = bv[static_cast<size_t>(br == 1 ? 0 : i) * bc + (bc == 1 ? 0 : j)];
      double v = op == Op::Add ? x + y : op == Op::Sub ? x - y : x * y;
      out[static_cast<size_t>(i) * C + j] = v;
    }
  }
  Graph::Rec rec;
  rec.op = op;
  rec.a = a.id;
  rec.b = b.id;
  rec.val = std::move(out);
  rec.needs_grad = g.rec(a.id).needs_grad || g.rec(b.id).needs_grad;
  return g.push(std::move(rec));
}

Node unary_elementwise(Op op, Node a, double c0 = 0.0, double c1 = 0.0) {
  Graph& g = *a.graph;
  const Tensor& av = g.value(a);
  Tensor out = Tensor::zeros(av.shape());
  for (size_t i = 0; i < av.numel(); ++i) {
    double x = av[i];
    double v = 0.0;
    switch (op) {
      case Op::AddC: v = x + c0; break;
      case Op::ScaleC: v = c0 * x; break;
      case Op::Exp: v = std::exp(x); break;
      case Op::Log: v = std::log(x); break;
      case Op::Square: v = x * x; break;
      case Op::Sqrt: v = std::sqrt(x); break;
      case Op::Cbrt: v = std::cbrt(x); break;
      case Op::PowC: v = std::pow(x, c0); break;
      case Op::Relu: v = x > 0.0 ? x : 0.0; break;
      case Op::Sigmoid: v = 1.0 / (1.0 + std::exp(-x)); break;
      case Op::Clamp: v = x < c0 ? c0 : (x > c1 ? c1 : x); break;
      default: throw Error("unary_elementwise: bad op");
    }
    out[i] = v;
  }
  Graph::Rec rec;
  rec.op = op;
  rec.a = a.id;
  rec.val = std::move(out);
  rec.c0 = c0;
  rec.c1 = c1;
  rec.needs_grad = g.rec(a.id).needs_grad;
  return g.push(std::move(rec));
}

}  // namespace

Node add(Node a, Node b) { return binary_elementwise(Op::Add, a, b); }
Node sub(Node a, Node b) { return binary_elementwise(Op::Sub, a, b); }
Node mul(Node a, Node b) { return binary_elementwise(Op::Mul, a, b); }
Node operator+(Node a, Node b) { return add(a, b); }
Node operator-(Node a, Node b) { return sub(a, b); }
Node operator*(Node a, Node b) { return mul(a, b); }

Node add_const(Node a, double c) { return unary_elementwise(Op::AddC, a, c); }
Node scale(Node a, double c) { return unary_elementwise(Op::ScaleC, a, c); }
Node neg(Node a) { return scale(a, -1.0); }

Node matmul(Node a, Node b) {
  check_same_graph(a, b);
  Graph& g = *a.graph;
  const Tensor& av = g.value(a);
  const Tensor& bv = g.value(b);
  if (av.rank() != 2 || bv.rank() != 2) {
    throw ShapeError(strf("matmul: rank-2 operands required, got %s and %s",
                          shape_str(av.shape()).c_str(), shape_str(bv.shape()).c_str()));
  }
  if (av.dim(1) != bv.dim(0)) {
    throw ShapeError(strf("matmul: inner dims differ, %s x %s", shape_str(av.shape()).c_str(),
                          shape_str(bv.shape()).c_str()));
  }
  Graph::Rec rec;
  rec.op = Op::MatMul;
  rec.a = a.id;
  rec.b = b.id;
  rec.val = Tensor::from_matrix(linalg::matmul(av.to_matrix(), bv.to_matrix()));
  rec.needs_grad = g.rec(a.id).needs_grad || g.rec(b.id).needs_grad;
  return g.push(std::move(rec));
}

Node transpose(Node a) {
  Graph& g = *a.graph;
  const Tensor& av = g.value(a);
  if (av.rank() != 2) throw ShapeError("transpose: rank-2 operand required");
  Graph::Rec rec;
  rec.op = Op::Transpose;
  rec.a = a.id;
  rec.val = Tensor::from_matrix(linalg::transpose(av.to_matrix()));
  rec.needs_grad = g.rec(a.id).needs_grad;
  return g.push(std::move(rec));
}

Node exp(Node a) { return unary_elementwise(Op::Exp, a); }
Node log(Node a) { return unary_elementwise(Op::Log, a); }
Node square(Node a) { return unary_elementwise(Op::Square, a); }
Node sqrt(Node a) { return unary_elementwise(Op::Sqrt, a); }
Node cbrt(Node a) { return unary_elementwise(Op::Cbrt, a); }
Node pow_const(Node a, double p) { return unary_elementwise(Op::PowC, a, p); }
Node relu(Node a) { return unary_elementwise(Op::Relu, a); }
Node sigmoid(Node a) { return unary_elementwise(Op::Sigmoid, a); }
Node clamp(Node a, double lo, double hi) { return unary_elementwise(Op::Clamp, a, lo, hi); }

Node sum(Node a) {
  Graph& g = *a.graph;
  const Tensor& av = g.value(a);
  double s = 0.0;
  for (size_t i = 0; i < av.numel(); ++i) s += av[i];
  Graph::Rec rec;
  rec.op = Op::Sum;
  rec.a = a.id;
  rec.val = Tensor::scalar(s);
  rec.needs_grad = g.rec(a.id).needs_grad;
  return g.push(std::move(rec));
}

Node sum_axis0(Node a) {
  Graph& g = *a.graph;
  const Tensor& av = g.value(a);
  if (av.rank() != 2) throw ShapeError("sum_axis0: rank-2 operand required");
  int n = av.dim(0), k = av.dim(1);
  Tensor out = Tensor::zeros({k});
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < k; ++j) out[static_cast<size_t>(j)] += av[static_cast<size_t>(i) * k + j];
  Graph::Rec rec;
  rec.op = Op::SumAxis0;
  rec.a = a.id;
  rec.val = std::move(out);
  rec.needs_grad = g.rec(a.id).needs_grad;
  return g.push(std::move(rec));
}

Node sum_axis1(Node a) {
  Graph& g = *a.graph;
  const Tensor& av = g.value(a);
  if (av.rank() != 2) throw ShapeError("sum_axis1: rank-2 operand required");
  int n = av.dim(0), k = av.dim(1);
  Tensor out = Tensor::zeros({n});
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < k; ++j) out[static_cast<size_t>(i)] += av[static_cast<size_t>(i) * k + j];
  Graph::Rec rec;
  rec.op = Op::SumAxis1;
  rec.a = a.id;
  rec.val = std::move(out);
  rec.needs_grad = g.rec(a.id).needs_grad;
  return g.push(std::move(rec));
}

Node mean(Node a) {
  size_t n = a.graph->value(a).numel();
  return scale(sum(a), 1.0 / static_cast<double>(n));
}

Node l2_norm_sq(Node a) { return sum(square(a)); }

Node cholesky(Node spd) {
  Graph& g = *spd.graph;
  const Tensor& sv = g.value(spd);
  if (sv.rank() != 2 || sv.dim(0) != sv.dim(1))
    throw ShapeError("cholesky: square matrix required, got " + shape_str(sv.shape()));
  Graph::Rec rec;
  rec.op = Op::Cholesky;
  rec.a = spd.id;
  rec.val = Tensor::from_matrix(linalg::cholesky(sv.to_matrix()));
  rec.needs_grad = g.rec(spd.id).needs_grad;
  return g.push(std::move(rec));
}

Node logdet_spd(Node spd) {
  Graph& g = *spd.graph;
  const Tensor& sv = g.value(spd);
  if (sv.rank() != 2 || sv.dim(0) != sv.dim(1))
    throw ShapeError("logdet_spd: square matrix required");
  Graph::Rec rec;
  rec.op = Op::LogDetSpd;
  rec.a = spd.id;
  rec.val = Tensor::scalar(linalg::spd_logdet(sv.to_matrix()));
  rec.needs_grad = g.rec(spd.id).needs_grad;
  return g.push(std::move(rec));
}

Node inverse_spd(Node spd) {
  Graph& g = *spd.graph;
  const Tensor& sv = g.value(spd);
  if (sv.rank() != 2 || sv.dim(0) != sv.dim(1))
    throw ShapeError("inverse_spd: square matrix required");
  Graph::Rec rec;
  rec.op = Op::InverseSpd;
  rec.a = spd.id;
  rec.val = Tensor::from_matrix(linalg::spd_inverse(sv.to_matrix()));
  rec.needs_grad = g.rec(spd.id).needs_grad;
  return g.push(std::move(rec));
}

Node diag_part(Node m) {
  Graph& g = *m.graph;
  const Tensor& mv = g.value(m);
  if (mv.rank() != 2 || mv.dim(0) != mv.dim(1)) throw ShapeError("diag_part: square matrix required");
  int d = mv.dim(0);
  Tensor out = Tensor::zeros({d});
  for (int i = 0; i < d; ++i) out[static_cast<size_t>(i)] = mv.at(i, i);
  Graph::Rec rec;
  rec.op = Op::DiagPart;
  rec.a = m.id;
  rec.val = std::move(out);
  rec.needs_grad = g.rec(m.id).needs_grad;
  return g.push(std::move(rec));
}

Node slice_cols(Node a, int j0, int j1) {
  Graph& g = *a.graph;
  const Tensor& av = g.value(a);
  int r, c;
  norm2d(av.shape(), r, c);
  if (j0 < 0 || j1 > c || j0 >= j1) throw ShapeError(strf("slice_cols: bad range [%d,%d) for %d cols", j0, j1, c));
  int w = j1 - j0;
  Tensor out = av.rank() <= 1 ? Tensor::zeros({w}) : Tensor::zeros({r, w});
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < w; ++j)
      out[static_cast<size_t>(i) * w + j] = av[static_cast<size_t>(i) * c + j0 + j];
  Graph::Rec rec;
  rec.op = Op::SliceCols;
  rec.a = a.id;
  rec.val = std::move(out);
  rec.c0 = j0;
  rec.c1 = j1;
  rec.needs_grad = g.rec(a.id).needs_grad;
  return g.push(std::move(rec));
}

Node hconcat(Node a, Node b) {
  check_same_graph(a, b);
  Graph& g = *a.graph;
  const Tensor& av = g.value(a);
  const Tensor& bv = g.value(b);
  int ar, ac, br, bc;
  norm2d(av.shape(), ar, ac);
  norm2d(bv.shape(), br, bc);
  if (ar != br)
    throw ShapeError(strf("hconcat: row counts differ, %s vs %s", shape_str(av.shape()).c_str(),
                          shape_str(bv.shape()).c_str()));
  int w = ac + bc;
  Tensor out = (av.rank() <= 1 && bv.rank() <= 1) ? Tensor::zeros({w}) : Tensor::zeros({ar, w});
  for (int i = 0; i < ar; ++i) {
    for (int j = 0; j < ac; ++j) out[static_cast<size_t>(i) * w + j] = av[static_cast<size_t>(i) * ac + j];
    for (int j = 0; j < bc; ++j) out[static_cast<size_t>(i) * w + ac + j] = bv[static_cast<size_t>(i) * bc + j];
  }
  Graph::Rec rec;
  rec.op = Op::HConcat;
  rec.a = a.id;
  rec.b = b.id;
  rec.val = std::move(out);
  rec.needs_grad = g.rec(a.id).needs_grad || g.rec(b.id).needs_grad;
  return g.push(std::move(rec));
}

Node reshape(Node a, std::vector<int> shape) {
  Graph& g = *a.graph;
  const Tensor& av = g.value(a);
  if (shape_numel(shape) != av.numel())
    throw ShapeError(strf("reshape: %zu elements cannot fill shape %s", av.numel(), shape_str(shape).c_str()));
  Graph::Rec rec;
  rec.op = Op::Reshape;
  rec.a = a.id;
  rec.val = Tensor(std::move(shape), std::vector<double>(av.data(), av.data() + av.numel()));
  rec.needs_grad = g.rec(a.id).needs_grad;
  return g.push(std::move(rec));
}

// --- Adam ---------------------------------------------------------------------

void adam_step(AdamState& state, const std::vector<Tensor*>& params,
               const std::vector<Tensor>& grads) {
  if (params.size() != grads.size()) throw Error("adam_step: params/grads count mismatch");
  if (state.m.empty()) {
    for (const Tensor* p : params) {
      state.m.push_back(Tensor::zeros(p->shape()));
      state.v.push_back(Tensor::zeros(p->shape()));
    }
  }
  if (state.m.size() != params.size()) throw Error("adam_step: state size mismatch");
  for (size_t k = 0; k < params.size(); ++k) {
    if (!params[k]->same_shape(grads[k]) || !params[k]->same_shape(state.m[k])) {
      throw ShapeError(strf("adam_step: shape mismatch for parameter %zu (%s vs %s)", k,
                            shape_str(params[k]->shape()).c_str(),
                            shape_str(grads[k].shape()).c_str()));
    }
    for (size_t i = 0; i < grads[k].numel(); ++i) {
      if (!std::isfinite(grads[k][i]))
        throw DivergenceError(strf("adam_step: non-finite gradient in parameter %zu", k));
    }
  }
  state.step += 1;
  double t = static_cast<double>(state.step);
  double bc1 = 1.0 - std::pow(state.cfg.beta1, t);
  double bc2 = 1.0 - std::pow(state.cfg.beta2, t);
  for (size_t k = 0; k < params.size(); ++k) {
    Tensor& p = *params[k];
    Tensor& m = state.m[k];
    Tensor& v = state.v[k];
    const Tensor& g = grads[k];
    for (size_t i = 0; i < p.numel(); ++i) {
      m[i] = state.cfg.beta1 * m[i] + (1.0 - state.cfg.beta1) * g[i];
      v[i] = state.cfg.beta2 * v[i] + (1.0 - state.cfg.beta2) * g[i] * g[i];
      double mhat = m[i] / bc1;
      double vhat = v[i] / bc2;
      p[i] -= state.cfg.lr * mhat / (std::sqrt(vhat) + state.cfg.eps);
    }
  }
}

double clip_global_norm(std::vector<Tensor>& grads, double max_norm) {
  double sq = 0.0;
  for (const Tensor& g : grads)
    for (size_t i = 0; i < g.numel(); ++i) sq += g[i] * g[i];
  double norm = std::sqrt(sq);
  if (!std::isfinite(norm)) return norm;
  if (norm > max_norm && norm > 0.0) {
    double s = max_norm / norm;
    for (Tensor& g : grads)
      for (size_t i = 0; i < g.numel(); ++i) g[i] *= s;
  }
  return norm;
}

}  // namespace vaelab::numgrad
