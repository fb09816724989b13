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

#ifndef SSHDL_MODEL_HPP_
#define SSHDL_MODEL_HPP_

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace sshdl {

enum class ActivationKind { kIdentity, kTanh };

std::string_view activation_name(ActivationKind kind);
std::optional<ActivationKind> parse_activation(std::string_view name);
double apply_activation(ActivationKind kind, double x);

// Dense row-major real matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}

  static Matrix identity(std::size_t n);

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const {
    return data[r * cols + c];
  }
  std::span<const double> row(std::size_t r) const {
    return {data.data() + r * cols, cols};
  }
  bool is_zero() const;
  Matrix transposed() const;
  Matrix operator*(const Matrix& rhs) const;
  std::vector<double> apply(std::span<const double> x) const;

  friend bool operator==(const Matrix&, const Matrix&) = default;
};

// Per-step parameter table. A single entry is time invariant and serves
// every step index.
struct ParamTable {
  std::vector<Matrix> steps;

  const Matrix& at(int k) const {
    return steps.size() == 1 ? steps.front() : steps.at(k);
  }
  bool time_varying() const { return steps.size() > 1; }
  std::size_t rows() const { return steps.empty() ? 0 : steps.front().rows; }
  std::size_t cols() const { return steps.empty() ? 0 : steps.front().cols; }
};

enum class DfOp {
  kInput,       // scalar input wire u_i
  kStateIn,     // scalar state wire x_i
  kConst,       // constant vector
  kMatVec,      // param-table matrix times the concatenated operands
  kVecAdd,
  kScalarAdd,
  kScalarMul,
  kActivation,  // elementwise
  kDelay,       // operand value from the previous step (zero at k = 0)
};

std::string_view df_op_name(DfOp op);

struct DfNode {
  DfOp op = DfOp::kConst;
  int index = 0;               // kInput / kStateIn
  std::vector<double> value;   // kConst
  std::string table;           // kMatVec
  ActivationKind activation = ActivationKind::kIdentity;
  std::vector<int> operands;
};

// Vector-valued dataflow graph computing one of the model maps. Operands may
// reference nodes added later so that loops through kDelay can be built.
class DataflowGraph {
 public:
  int add_input(int i);
  int add_state(int i);
  int add_const(std::vector<double> value);
  int add_matvec(std::string table, std::vector<int> operands);
  int add_vec_add(int a, int b);
  int add_scalar_add(int a, int b);
  int add_scalar_mul(int a, int b);
  int add_activation(ActivationKind kind, int a);
  int add_delay(int a);
  int add(DfNode node);

  void set_operand(int node, std::size_t slot, int operand) {
    nodes_.at(node).operands.at(slot) = operand;
  }
  void set_outputs(std::vector<int> outputs) { outputs_ = std::move(outputs); }

  const std::vector<DfNode>& nodes() const { return nodes_; }
  const DfNode& node(int id) const { return nodes_.at(id); }
  const std::vector<int>& outputs() const { return outputs_; }
  std::size_t size() const { return nodes_.size(); }

 private:
  std::vector<DfNode> nodes_;
  std::vector<int> outputs_;
};

// x[k+1] = f(x[k], u, k); y = g(x[N], u, N). The input vector is held for the
// whole horizon; models that inject it once gate it with step-indexed tables.
struct StateSpaceModel {
  std::string name;
  int state_dim = 0;   // M
  int input_dim = 0;   // L
  int output_dim = 0;  // P
  int horizon = 0;     // N
  std::vector<double> initial_state;
  DataflowGraph update_graph;
  DataflowGraph output_graph;
  std::map<std::string, ParamTable> params;
};

struct Diagnostic {
  std::string graph;  // "model", "update" or "output"
  int node = -1;
  std::string message;

  std::string to_string() const;
};

// Empty iff every model and graph invariant holds.
std::vector<Diagnostic> validate_model(const StateSpaceModel& m);

// Throws ValidationError listing the diagnostics when the model is invalid.
void require_valid(const StateSpaceModel& m);

// Stateful evaluator of one graph across steps; holds Delay registers.
class GraphEvaluator {
 public:
  GraphEvaluator(const StateSpaceModel& model, const DataflowGraph& graph);

  std::vector<double> evaluate(std::span<const double> state,
                               std::span<const double> input, int k);

 private:
  const StateSpaceModel& model_;
  const DataflowGraph& graph_;
  std::vector<int> order_;
  std::vector<std::vector<double>> values_;
  std::vector<std::vector<double>> delayed_;
};

// Canonical single-shared-layer form recognised by the fixed-point
// simulator and the elaborator:
//   z_k = A_k * v_k + b_k,  x[k+1] = act(z_k),  y = act_end(C * x[N])
// where v_0 is the input vector (zero padded to K) and v_k = x[k] for k >= 1.
struct LayeredNetwork {
  int inputs = 0;         // L
  int nodes = 0;          // M
  int layers = 0;         // N
  int outputs = 0;        // P
  int operand_width = 0;  // K = max(L, M)
  ActivationKind hidden_activation = ActivationKind::kTanh;
  ActivationKind output_activation = ActivationKind::kIdentity;
  std::vector<Matrix> weights;               // N matrices, M x K
  std::vector<std::vector<double>> biases;   // N vectors of M
  Matrix output_weights;                     // P x M
};

// Throws ValidationError naming the first node that does not fit the
// layered pattern.
LayeredNetwork extract_layered(const StateSpaceModel& m);

}  // namespace sshdl

#endif  // SSHDL_MODEL_HPP_
