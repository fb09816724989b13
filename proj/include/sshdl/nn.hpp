// Copyright 2026 The sshdl Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef SSHDL_NN_HPP_
#define SSHDL_NN_HPP_

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "sshdl/fixed_point.hpp"
#include "sshdl/model.hpp"

namespace sshdl {

// Multilayer perceptron with one shared hidden-layer shape.
struct NNSpec {
  int inputs = 0;   // L
  int layers = 0;   // N
  int nodes = 0;    // M
  int outputs = 0;  // P
  ActivationKind activation = ActivationKind::kTanh;
  ActivationKind output_activation = ActivationKind::kIdentity;
  Matrix input_weights;                     // L x M
  std::vector<Matrix> hidden_weights;       // N-1 matrices, M x M
  std::vector<std::vector<double>> biases;  // N vectors of M
  Matrix output_weights;                    // P x M

  // Per-tensor format overrides read from the weights document; keys are
  // "weight", "bias" and "output_weight".
  std::map<std::string, FixedPointFormat> tensor_formats;

  friend bool operator==(const NNSpec&, const NNSpec&) = default;
};

// Throws ValidationError naming the first tensor with a wrong shape.
void validate_nn(const NNSpec& nn);

StateSpaceModel build_state_space(const NNSpec& nn);

// Plain layer-by-layer forward pass in double precision.
std::vector<double> mlp_forward(const NNSpec& nn, const std::vector<double>& u);

// Parses a weights document. Syntax errors carry the byte offset; shape
// errors name the tensor.
NNSpec parse_weights(const std::string& text);
std::string serialize_weights(const NNSpec& nn);

NNSpec load_weights(const std::string& path);
void save_weights(const NNSpec& nn, const std::string& path);

// Weights and biases uniform in [-1, 1), deterministic in seed.
NNSpec random_nn(int inputs, int layers, int nodes, int outputs,
                 std::uint64_t seed);

// Uniform [-1, 1) stream shared by every seeded generator in the project.
class UniformSource {
 public:
  explicit UniformSource(std::uint64_t seed);
  double next();
  std::vector<double> vector(std::size_t n);

 private:
  std::mt19937_64 rng_;
};

}  // namespace sshdl

#endif  // SSHDL_NN_HPP_
