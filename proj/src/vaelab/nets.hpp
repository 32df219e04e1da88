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

#include <json.hpp>
#include <unordered_map>

#include "vaelab/numgrad.hpp"

// Small dense networks on top of the autodiff engine: layers with
// per-unit activations (the cube-root/sigmoid split encoder needs mixed
// activations in one layer), Gaussian encoders with mean and log-variance
// heads, and the decoder families used by the synthetic worlds.
//
// Every net has two forward paths: a graph path for training and a plain
// batched path for evaluation. A property test keeps them in agreement.

namespace vaelab::nets {

using linalg::Matrix;
using linalg::Vector;
using numgrad::Graph;
using numgrad::Node;
using numgrad::Tensor;

enum class Act { Linear, Relu, Sigmoid, Cbrt };

std::string act_name(Act a);
Act act_from(const std::string& s);

// Maps parameter tensors to their leaf nodes on the current graph.
class Bound {
 public:
  Node at(const Tensor& t) const;
  void put(const Tensor& t, Node n) { map_[&t] = n; }

 private:
  std::unordered_map<const Tensor*, Node> map_;
};

// Registers all parameters as graph leaves (trainable or frozen).
Bound bind(Graph& g, const std::vector<const Tensor*>& params, bool trainable);

struct Layer {
  Tensor w;                // (out, in)
  Tensor b;                // (out)
  std::vector<Act> acts;   // one entry per output unit, or a single shared entry

  int in_dim() const { return w.dim(1); }
  int out_dim() const { return w.dim(0); }
};

Layer make_layer(int in, int out, std::vector<Act> acts, Rng& rng, double init_stddev = 0.05);

// x: (n, in) -> (n, out)
Node layer_forward(Graph& g, const Bound& bound, const Layer& layer, Node x);
Matrix layer_forward_plain(const Layer& layer, const Matrix& x);

struct Mlp {
  std::vector<Layer> layers;

  int in_dim() const { return layers.front().in_dim(); }
  int out_dim() const { return layers.back().out_dim(); }
  Node forward(Graph& g, const Bound& bound, Node x) const;
  Matrix forward_plain(const Matrix& x) const;
  std::vector<const Tensor*> params() const;
  std::vector<Tensor*> params();
};

// Trunk plus Gaussian heads. Log-variances are clamped to [-15, 15] so the
// ELBO is finite at any initialization.
struct Encoder {
  Mlp trunk;           // may be empty (affine encoder)
  Layer mean_head;
  Layer logvar_head;

  static constexpr double kLogVarLo = -15.0;
  static constexpr double kLogVarHi = 15.0;

  int latent_dim() const { return mean_head.out_dim(); }
  // x: (n, data) -> mean (n, latent), logvar (n, latent)
  std::pair<Node, Node> forward(Graph& g, const Bound& bound, Node x) const;
  std::pair<Matrix, Matrix> forward_plain(const Matrix& x) const;
  std::vector<const Tensor*> params() const;
  std::vector<Tensor*> params();
};

// Decoder families. CholLinear/CholCubic share the latent-noise-split
// parameterization f(z) = chol(A A' + B) z (optionally cubed elementwise);
// B and sigma2 are frozen buffers, only A trains. LinearMap is f(z) = z A.
struct Decoder {
  enum class Kind { CholLinear, CholCubic, LinearMap, Mlp };

  Kind kind;
  Tensor a;            // CholLinear/CholCubic: (d,d); LinearMap: (latent, data)
  Vector b_diag;       // frozen (CholLinear/CholCubic)
  double sigma2 = 0.0; // frozen observation noise scale
  Mlp mlp;             // Mlp kind only

  int data_dim() const;
  int latent_dim() const;
  // Diagonal of the (frozen) observation noise covariance.
  Vector noise_var() const;
  // z: (n, latent) -> mean of x (n, data)
  Node forward(Graph& g, const Bound& bound, Node z) const;
  Matrix forward_plain(const Matrix& z) const;
  std::vector<const Tensor*> params() const;
  std::vector<Tensor*> params();
};

// Full-batch Adam regression of net(x) onto y. Stops early once the batch
// MSE drops below stop_mse. Returns the final MSE.
struct FitOptions {
  int max_steps = 500;
  double lr = 0.01;
  double stop_mse = 0.0;
};
double fit_mse(Mlp& net, const Matrix& x, const Matrix& y, const FitOptions& opt, Rng& rng);

nlohmann::json tensor_to_json(const Tensor& t);
Tensor tensor_from_json(const nlohmann::json& j);
nlohmann::json layer_to_json(const Layer& l);
Layer layer_from_json(const nlohmann::json& j);
nlohmann::json mlp_to_json(const Mlp& m);
Mlp mlp_from_json(const nlohmann::json& j);
nlohmann::json encoder_to_json(const Encoder& e);
Encoder encoder_from_json(const nlohmann::json& j);
nlohmann::json decoder_to_json(const Decoder& d);
Decoder decoder_from_json(const nlohmann::json& j);

}  // namespace vaelab::nets
