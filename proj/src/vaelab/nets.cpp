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

#include "vaelab/nets.hpp"

#include <cmath>

namespace vaelab::nets {

namespace ng = vaelab::numgrad;

std::string act_name(Act a) {
  switch (a) {
    case Act::Linear: return "linear";
    case Act::Relu: return "relu";
    case Act::Sigmoid: return "sigmoid";
    case Act::Cbrt: return "cbrt";
  }
  throw Error("act_name: bad activation");
}

Act act_from(const std::string& s) {
  if (s == "linear") return Act::Linear;
  if (s == "relu") return Act::Relu;
  if (s == "sigmoid") return Act::Sigmoid;
  if (s == "cbrt") return Act::Cbrt;
  throw Error("act_from: unknown activation '" + s + "'");
}

Node Bound::at(const Tensor& t) const {
  auto it = map_.find(&t);
  if (it == map_.end()) throw Error("Bound::at: tensor is not bound to this graph");
  return it->second;
}

Bound bind(Graph& g, const std::vector<const Tensor*>& params, bool trainable) {
  Bound b;
  for (const Tensor* p : params) b.put(*p, g.leaf(*p, trainable));
  return b;
}

Layer make_layer(int in, int out, std::vector<Act> acts, Rng& rng, double init_stddev) {
  Layer l;
  l.w = Tensor::randn({out, in}, rng, init_stddev);
  l.b = Tensor::zeros({out});
  l.acts = std::move(acts);
  if (l.acts.empty()) l.acts = {Act::Linear};
  if (l.acts.size() != 1 && static_cast<int>(l.acts.size()) != out)
    throw ShapeError("make_layer: activation list does not match output width");
  return l;
}

namespace {

double apply_act(Act a, double x) {
  switch (a) {
    case Act::Linear: return x;
    case Act::Relu: return x > 0.0 ? x : 0.0;
    case Act::Sigmoid: return 1.0 / (1.0 + std::exp(-x));
    case Act::Cbrt: return std::cbrt(x);
  }
  throw Error("apply_act: bad activation");
}

Node apply_act_node(Act a, Node x) {
  switch (a) {
    case Act::Linear: return x;
    case Act::Relu: return ng::relu(x);
    case Act::Sigmoid: return ng::sigmoid(x);
    case Act::Cbrt: return ng::cbrt(x);
  }
  throw Error("apply_act_node: bad activation");
}

}  // namespace

Node layer_forward(Graph& g, const Bound& bound, const Layer& layer, Node x) {
  Node h = ng::add(ng::matmul(x, ng::transpose(bound.at(layer.w))), bound.at(layer.b));
  if (layer.acts.size() == 1) return apply_act_node(layer.acts[0], h);
  // Mixed per-unit activations: apply per contiguous run and re-concatenate.
  Node out{};
  int j = 0;
  int width = layer.out_dim();
  while (j < width) {
    int k = j + 1;
    while (k < width && layer.acts[static_cast<size_t>(k)] == layer.acts[static_cast<size_t>(j)]) ++k;
    Node piece = apply_act_node(layer.acts[static_cast<size_t>(j)], ng::slice_cols(h, j, k));
    out = j == 0 ? piece : ng::hconcat(out, piece);
    j = k;
  }
  return out;
}

Matrix layer_forward_plain(const Layer& layer, const Matrix& x) {
  int n = x.rows, out = layer.out_dim();
  if (x.cols != layer.in_dim())
    throw ShapeError(strf("layer: input width %d vs expected %d", x.cols, layer.in_dim()));
  Matrix h(n, out);
  for (int i = 0; i < n; ++i) {
    for (int o = 0; o < out; ++o) {
      double v = layer.b[static_cast<size_t>(o)];
      for (int j = 0; j < x.cols; ++j) v += layer.w.at(o, j) * x.at(i, j);
      Act a = layer.acts.size() == 1 ? layer.acts[0] : layer.acts[static_cast<size_t>(o)];
      h.at(i, o) = apply_act(a, v);
    }
  }
  return h;
}

Node Mlp::forward(Graph& g, const Bound& bound, Node x) const {
  Node h = x;
  for (const Layer& l : layers) h = layer_forward(g, bound, l, h);
  return h;
}

Matrix Mlp::forward_plain(const Matrix& x) const {
  Matrix h = x;
  for (const Layer& l : layers) h = layer_forward_plain(l, h);
  return h;
}

std::vector<const Tensor*> Mlp::params() const {
  std::vector<const Tensor*> ps;
  for (const Layer& l : layers) {
    ps.push_back(&l.w);
    ps.push_back(&l.b);
  }
  return ps;
}

std::vector<Tensor*> Mlp::params() {
  std::vector<Tensor*> ps;
  for (Layer& l : layers) {
    ps.push_back(&l.w);
    ps.push_back(&l.b);
  }
  return ps;
}

std::pair<Node, Node> Encoder::forward(Graph& g, const Bound& bound, Node x) const {
  Node h = trunk.layers.empty() ? x : trunk.forward(g, bound, x);
  Node mean = layer_forward(g, bound, mean_head, h);
  Node logvar = ng::clamp(layer_forward(g, bound, logvar_head, h), kLogVarLo, kLogVarHi);
  return {mean, logvar};
}

std::pair<Matrix, Matrix> Encoder::forward_plain(const Matrix& x) const {
  Matrix h = trunk.layers.empty() ? x : trunk.forward_plain(x);
  Matrix mean = layer_forward_plain(mean_head, h);
  Matrix logvar = layer_forward_plain(logvar_head, h);
  for (double& v : logvar.a) v = std::min(kLogVarHi, std::max(kLogVarLo, v));
  return {mean, logvar};
}

std::vector<const Tensor*> Encoder::params() const {
  std::vector<const Tensor*> ps = trunk.params();
  ps.push_back(&mean_head.w);
  ps.push_back(&mean_head.b);
  ps.push_back(&logvar_head.w);
  ps.push_back(&logvar_head.b);
  return ps;
}

std::vector<Tensor*> Encoder::params() {
  std::vector<Tensor*> ps = trunk.params();
  ps.push_back(&mean_head.w);
  ps.push_back(&mean_head.b);
  ps.push_back(&logvar_head.w);
  ps.push_back(&logvar_head.b);
  return ps;
}

int Decoder::data_dim() const {
  switch (kind) {
    case Kind::CholLinear:
    case Kind::CholCubic: return a.dim(0);
    case Kind::LinearMap: return a.dim(1);
    case Kind::Mlp: return mlp.out_dim();
  }
  throw Error("decoder: bad kind");
}

int Decoder::latent_dim() const {
  switch (kind) {
    case Kind::CholLinear:
    case Kind::CholCubic: return a.dim(0);
    case Kind::LinearMap: return a.dim(0);
    case Kind::Mlp: return mlp.in_dim();
  }
  throw Error("decoder: bad kind");
}

Vector Decoder::noise_var() const {
  int d = data_dim();
  Vector v(static_cast<size_t>(d), sigma2);
  if (kind == Kind::CholLinear || kind == Kind::CholCubic) {
    for (int i = 0; i < d; ++i) v[static_cast<size_t>(i)] = sigma2 - b_diag[static_cast<size_t>(i)];
  }
  return v;
}

Node Decoder::forward(Graph& g, const Bound& bound, Node z) const {
  switch (kind) {
    case Kind::CholLinear:
    case Kind::CholCubic: {
      Node an = bound.at(a);
      Node m = ng::matmul(an, ng::transpose(an));
      m = ng::add(m, g.leaf(Tensor::from_matrix(linalg::diag(b_diag)), false));
      Node w = ng::cholesky(m);
      Node out = ng::matmul(z, ng::transpose(w));
      if (kind == Kind::CholCubic) out = ng::pow_const(out, 3.0);
      return out;
    }
    case Kind::LinearMap:
      return ng::matmul(z, bound.at(a));
    case Kind::Mlp:
      return mlp.forward(g, bound, z);
  }
  throw Error("decoder: bad kind");
}

Matrix Decoder::forward_plain(const Matrix& z) const {
  switch (kind) {
    case Kind::CholLinear:
    case Kind::CholCubic: {
      Matrix am = a.to_matrix();
      Matrix m = linalg::add(linalg::matmul(am, linalg::transpose(am)), linalg::diag(b_diag));
      Matrix w = linalg::cholesky(m);
      Matrix out = linalg::matmul(z, linalg::transpose(w));
      if (kind == Kind::CholCubic)
        for (double& v : out.a) v = v * v * v;
      return out;
    }
    case Kind::LinearMap:
      return linalg::matmul(z, a.to_matrix());
    case Kind::Mlp:
      return mlp.forward_plain(z);
  }
  throw Error("decoder: bad kind");
}

std::vector<const Tensor*> Decoder::params() const {
  if (kind == Kind::Mlp) return mlp.params();
  return {&a};
}

std::vector<Tensor*> Decoder::params() {
  if (kind == Kind::Mlp) return mlp.params();
  return {&a};
}

double fit_mse(Mlp& net, const Matrix& x, const Matrix& y, const FitOptions& opt, Rng& rng) {
  (void)rng;
  ng::AdamState st;
  st.cfg.lr = opt.lr;
  Tensor xt = Tensor::from_matrix(x);
  Tensor yt = Tensor::from_matrix(y);
  double mse = 0.0;
  for (int step = 0; step < opt.max_steps; ++step) {
    Graph g;
    Bound bound = bind(g, static_cast<const Mlp&>(net).params(), true);
    Node xn = g.leaf(xt, false);
    Node pred = net.forward(g, bound, xn);
    Node loss = ng::mean(ng::square(ng::sub(pred, g.leaf(yt, false))));
    mse = g.value(loss).item();
    if (mse <= opt.stop_mse) return mse;
    g.backward(loss);
    std::vector<Tensor*> ps = net.params();
    std::vector<Tensor> grads;
    grads.reserve(ps.size());
    for (Tensor* p : ps) grads.push_back(g.grad(bound.at(*p)));
    ng::adam_step(st, ps, grads);
  }
  return mse;
}

// --- serialization -----------------------------------------------------------

nlohmann::json tensor_to_json(const Tensor& t) {
  nlohmann::json j;
  j["shape"] = t.shape();
  j["data"] = std::vector<double>(t.data(), t.data() + t.numel());
  return j;
}

Tensor tensor_from_json(const nlohmann::json& j) {
  return Tensor(j.at("shape").get<std::vector<int>>(), j.at("data").get<std::vector<double>>());
}

nlohmann::json layer_to_json(const Layer& l) {
  nlohmann::json j;
  j["w"] = tensor_to_json(l.w);
  j["b"] = tensor_to_json(l.b);
  std::vector<std::string> acts;
  for (Act a : l.acts) acts.push_back(act_name(a));
  j["acts"] = acts;
  return j;
}

Layer layer_from_json(const nlohmann::json& j) {
  Layer l;
  l.w = tensor_from_json(j.at("w"));
  l.b = tensor_from_json(j.at("b"));
  for (const auto& s : j.at("acts")) l.acts.push_back(act_from(s.get<std::string>()));
  return l;
}

nlohmann::json mlp_to_json(const Mlp& m) {
  nlohmann::json layers = nlohmann::json::array();
  for (const Layer& l : m.layers) layers.push_back(layer_to_json(l));
  return nlohmann::json{{"layers", layers}};
}

Mlp mlp_from_json(const nlohmann::json& j) {
  Mlp m;
  for (const auto& l : j.at("layers")) m.layers.push_back(layer_from_json(l));
  return m;
}

nlohmann::json encoder_to_json(const Encoder& e) {
  nlohmann::json j;
  j["trunk"] = mlp_to_json(e.trunk);
  j["mean_head"] = layer_to_json(e.mean_head);
  j["logvar_head"] = layer_to_json(e.logvar_head);
  return j;
}

Encoder encoder_from_json(const nlohmann::json& j) {
  Encoder e;
  e.trunk = mlp_from_json(j.at("trunk"));
  e.mean_head = layer_from_json(j.at("mean_head"));
  e.logvar_head = layer_from_json(j.at("logvar_head"));
  return e;
}

nlohmann::json decoder_to_json(const Decoder& d) {
  nlohmann::json j;
  const char* kind = d.kind == Decoder::Kind::CholLinear   ? "chol_linear"
                     : d.kind == Decoder::Kind::CholCubic  ? "chol_cubic"
                     : d.kind == Decoder::Kind::LinearMap  ? "linear_map"
                                                           : "mlp";
  j["kind"] = kind;
  j["sigma2"] = d.sigma2;
  j["b_diag"] = d.b_diag;
  if (d.kind == Decoder::Kind::Mlp) j["mlp"] = mlp_to_json(d.mlp);
  else j["a"] = tensor_to_json(d.a);
  return j;
}

Decoder decoder_from_json(const nlohmann::json& j) {
  Decoder d;
  std::string kind = j.at("kind").get<std::string>();
  d.kind = kind == "chol_linear"  ? Decoder::Kind::CholLinear
           : kind == "chol_cubic" ? Decoder::Kind::CholCubic
           : kind == "linear_map" ? Decoder::Kind::LinearMap
                                  : Decoder::Kind::Mlp;
  d.sigma2 = j.at("sigma2").get<double>();
  d.b_diag = j.at("b_diag").get<Vector>();
  if (d.kind == Decoder::Kind::Mlp) d.mlp = mlp_from_json(j.at("mlp"));
  else d.a = tensor_from_json(j.at("a"));
  return d;
}

}  // namespace vaelab::nets
