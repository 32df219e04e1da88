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
#include <stdexcept>
#include <string>
#include <vector>

namespace vaelab {

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Operand shapes did not line up; message names both shapes.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Cholesky factorization hit a non-positive pivot.
class CholeskyError : public Error {
 public:
  CholeskyError(const std::string& msg, int pivot) : Error(msg), pivot_(pivot) {}
  int pivot() const { return pivot_; }

 private:
  int pivot_ = -1;
};

// A training loss or gradient went non-finite.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

// Counter-based deterministic RNG (splitmix64 core). Distributions are
// implemented by hand so streams are reproducible across standard libraries.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next_u64();
  // Uniform in [0, 1).
  double uniform();
  // Standard normal via Box-Muller (two uniforms per draw, no cached state).
  double normal();
  // Uniform integer in [0, n).
  uint64_t below(uint64_t n);
  // Child stream derived from this stream's seed and a label.
  Rng split(const std::string& label) const;

  uint64_t seed() const { return state_; }

 private:
  uint64_t state_;
};

uint64_t splitmix64(uint64_t x);
uint64_t fnv1a64(const void* data, size_t len);
uint64_t fnv1a64(const std::string& s);

// seed <- hash(master, label); used to derive independent per-job streams.
uint64_t derive_seed(uint64_t master, const std::string& label);

// printf-style formatting into std::string.
std::string strf(const char* fmt, ...);

std::string shape_str(const std::vector<int>& shape);

// Sample mean/stddev (stddev over n-1; returns 0 for n < 2).
double mean_of(const std::vector<double>& v);
double stddev_of(const std::vector<double>& v);

}  // namespace vaelab
