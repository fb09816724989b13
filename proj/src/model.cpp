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

#include "sshdl/model.hpp"

#include <cmath>
#include <queue>
#include <stdexcept>

#include <fmt/format.h>

#include "sshdl/errors.hpp"
#include "sshdl/kernels.hpp"

namespace sshdl {

std::string_view activation_name(ActivationKind kind) {
  switch (kind) {
    case ActivationKind::kIdentity:
      return "identity";
    case ActivationKind::kTanh:
      return "tanh";
  }
  return "?";
}

std::optional<ActivationKind> parse_activation(std::string_view name) {
  if (name == "identity" || name == "linear") return ActivationKind::kIdentity;
  if (name == "tanh") return ActivationKind::kTanh;
  return std::nullopt;
}

double apply_activation(ActivationKind kind, double x) {
  return kind == ActivationKind::kTanh ? std::tanh(x) : x;
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

bool Matrix::is_zero() const {
  for (double v : data) {
    if (v != 0.0) return false;
  }
  return true;
}

Matrix Matrix::transposed() const {
  Matrix t(cols, rows);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) t(c, r) = (*this)(r, c);
  }
  return t;
}

Matrix Matrix::operator*(const Matrix& rhs) const {
  if (cols != rhs.rows) throw std::invalid_argument("matrix shape mismatch");
  Matrix out(rows, rhs.cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t k = 0; k < cols; ++k) {
      const double a = (*this)(r, k);
      for (std::size_t c = 0; c < rhs.cols; ++c) out(r, c) += a * rhs(k, c);
    }
  }
  return out;
}

std::vector<double> Matrix::apply(std::span<const double> x) const {
  if (x.size() != cols) throw std::invalid_argument("matrix/vector mismatch");
  std::vector<double> y(rows);
  for (std::size_t r = 0; r < rows; ++r) y[r] = kernels::dot_f64(row(r), x);
  return y;
}

std::string_view df_op_name(DfOp op) {
  switch (op) {
    case DfOp::kInput:
      return "Input";
    case DfOp::kStateIn:
      return "StateIn";
    case DfOp::kConst:
      return "Const";
    case DfOp::kMatVec:
      return "MatVec";
    case DfOp::kVecAdd:
      return "VecAdd";
    case DfOp::kScalarAdd:
      return "ScalarAdd";
    case DfOp::kScalarMul:
      return "ScalarMul";
    case DfOp::kActivation:
      return "Activation";
    case DfOp::kDelay:
      return "Delay";
  }
  return "?";
}

int DataflowGraph::add(DfNode node) {
  nodes_.push_back(std::move(node));
  return static_cast<int>(nodes_.size()) - 1;
}
namespace {

DfNode make_node(DfOp op, std::vector<int> operands = {}) {
  DfNode n;
  n.op = op;
  n.operands = std::move(operands);
  return n;
}

}  // namespace

int DataflowGraph::add_input(int i) {
  DfNode n = make_node(DfOp::kInput);
  n.index = i;
  return add(std::move(n));
}
int DataflowGraph::add_state(int i) {
  DfNode n = make_node(DfOp::kStateIn);
  n.index = i;
  return add(std::move(n));
}
int DataflowGraph::add_const(std::vector<double> value) {
  DfNode n = make_node(DfOp::kConst);
  n.value = std::move(value);
  return add(std::move(n));
}
int DataflowGraph::add_matvec(std::string table, std::vector<int> operands) {
  DfNode n = make_node(DfOp::kMatVec, std::move(operands));
  n.table = std::move(table);
  return add(std::move(n));
}
int DataflowGraph::add_vec_add(int a, int b) {
  return add(make_node(DfOp::kVecAdd, {a, b}));
}
int DataflowGraph::add_scalar_add(int a, int b) {
  return add(make_node(DfOp::kScalarAdd, {a, b}));
}
int DataflowGraph::add_scalar_mul(int a, int b) {
  return add(make_node(DfOp::kScalarMul, {a, b}));
}
int DataflowGraph::add_activation(ActivationKind kind, int a) {
  DfNode n = make_node(DfOp::kActivation, {a});
  n.activation = kind;
  return add(std::move(n));
}
int DataflowGraph::add_delay(int a) {
  return add(make_node(DfOp::kDelay, {a}));
}

std::string Diagnostic::to_string() const {
  if (node < 0) return fmt::format("{}: {}", graph, message);
  return fmt::format("{} graph node {}: {}", graph, node, message);
}

namespace {

std::size_t expected_arity(DfOp op) {
  switch (op) {
    case DfOp::kInput:
    case DfOp::kStateIn:
    case DfOp::kConst:
      return 0;
    case DfOp::kVecAdd:
    case DfOp::kScalarAdd:
    case DfOp::kScalarMul:
      return 2;
    case DfOp::kActivation:
    case DfOp::kDelay:
      return 1;
    case DfOp::kMatVec:
      return 0;  // variadic, checked separately
  }
  return 0;
}

// Topological order ignoring Delay operand edges. Returns nullopt and the
// first node found on a cycle when the graph has a combinational loop.
std::optional<std::vector<int>> topo_order(const DataflowGraph& g,
                                           int* cycle_node) {
  const int n = static_cast<int>(g.size());
  std::vector<int> indeg(n, 0);
  std::vector<std::vector<int>> users(n);
  for (int v = 0; v < n; ++v) {
    const DfNode& node = g.node(v);
    if (node.op == DfOp::kDelay) continue;
    for (int o : node.operands) {
      if (o < 0 || o >= n) continue;
      ++indeg[v];
      users[o].push_back(v);
    }
  }
  std::queue<int> ready;
  for (int v = 0; v < n; ++v) {
    if (indeg[v] == 0) ready.push(v);
  }
  std::vector<int> order;
  while (!ready.empty()) {
    int v = ready.front();
    ready.pop();
    order.push_back(v);
    for (int u : users[v]) {
      if (--indeg[u] == 0) ready.push(u);
    }
  }
  if (static_cast<int>(order.size()) == n) return order;
  for (int v = 0; v < n; ++v) {
    if (indeg[v] > 0) {
      *cycle_node = v;
      break;
    }
  }
  return std::nullopt;
}

// Validates one graph and computes node widths (-1 where unknown).
std::vector<int> check_graph(const StateSpaceModel& m, const DataflowGraph& g,
                             const std::string& name, bool is_update,
                             std::vector<Diagnostic>& diags) {
  const int n = static_cast<int>(g.size());
  std::vector<int> width(n, -1);
  auto diag = [&](int node, std::string msg) {
    diags.push_back(Diagnostic{name, node, std::move(msg)});
  };

  bool operands_ok = true;
  for (int v = 0; v < n; ++v) {
    const DfNode& node = g.node(v);
    for (int o : node.operands) {
      if (o < 0 || o >= n) {
        diag(v, fmt::format("operand {} does not exist", o));
        operands_ok = false;
      }
    }
    if (node.op != DfOp::kMatVec &&
        node.operands.size() != expected_arity(node.op)) {
      diag(v, fmt::format("{} expects {} operands, has {}",
                          df_op_name(node.op), expected_arity(node.op),
                          node.operands.size()));
      operands_ok = false;
    }
    if (node.op == DfOp::kMatVec && node.operands.empty()) {
      diag(v, "MatVec has no operands");
      operands_ok = false;
    }
  }
  if (!operands_ok) return width;

  int cycle_node = -1;
  auto order = topo_order(g, &cycle_node);
  if (!order) {
    diag(cycle_node, "combinational cycle not cut by a Delay");
    return width;
  }

  std::vector<int> seen_state(m.state_dim, -1), seen_input(m.input_dim, -1);
  // Delay widths resolve after their operands, which may come later in the
  // order; iterate until stable.
  for (int pass = 0; pass < 2; ++pass) {
    for (int v : *order) {
      const DfNode& node = g.node(v);
      auto w = [&](int i) { return width[node.operands[i]]; };
      switch (node.op) {
        case DfOp::kInput:
          if (pass == 0) {
            if (node.index < 0 || node.index >= m.input_dim) {
              diag(v, fmt::format("input index {} outside [0, {})", node.index,
                                  m.input_dim));
            } else if (seen_input[node.index] >= 0) {
              diag(v, fmt::format("input {} already read by node {}",
                                  node.index, seen_input[node.index]));
            } else {
              seen_input[node.index] = v;
            }
          }
          width[v] = 1;
          break;
        case DfOp::kStateIn:
          if (pass == 0) {
            if (node.index < 0 || node.index >= m.state_dim) {
              diag(v, fmt::format("state index {} outside [0, {})", node.index,
                                  m.state_dim));
            } else if (seen_state[node.index] >= 0) {
              diag(v, fmt::format("state {} already read by node {}",
                                  node.index, seen_state[node.index]));
            } else {
              seen_state[node.index] = v;
            }
          }
          width[v] = 1;
          break;
        case DfOp::kConst:
          if (node.value.empty() && pass == 0) diag(v, "empty constant");
          width[v] = static_cast<int>(node.value.size());
          break;
        case DfOp::kMatVec: {
          auto it = m.params.find(node.table);
          if (it == m.params.end()) {
            if (pass == 0) diag(v, fmt::format("unknown table '{}'", node.table));
            break;
          }
          const ParamTable& t = it->second;
          int cols = 0;
          bool known = true;
          for (std::size_t i = 0; i < node.operands.size(); ++i) {
            if (w(i) < 0) known = false;
            cols += w(i);
          }
          if (pass == 1 && known && static_cast<std::size_t>(cols) != t.cols()) {
            diag(v, fmt::format("table '{}' has {} columns, operands supply {}",
                                node.table, t.cols(), cols));
          }
          width[v] = static_cast<int>(t.rows());
          break;
        }
        case DfOp::kVecAdd:
          if (pass == 1 && w(0) >= 0 && w(1) >= 0 && w(0) != w(1)) {
            diag(v, fmt::format("VecAdd width mismatch {} vs {}", w(0), w(1)));
          }
          width[v] = w(0) >= 0 ? w(0) : w(1);
          break;
        case DfOp::kScalarAdd:
        case DfOp::kScalarMul:
          if (pass == 1 && ((w(0) >= 0 && w(0) != 1) || (w(1) >= 0 && w(1) != 1))) {
            diag(v, fmt::format("{} needs scalar operands", df_op_name(node.op)));
          }
          width[v] = 1;
          break;
        case DfOp::kActivation:
        case DfOp::kDelay:
          width[v] = w(0);
          break;
      }
    }
  }

  int produced = 0;
  for (int o : g.outputs()) {
    if (o < 0 || o >= n) {
      diag(-1, fmt::format("output references missing node {}", o));
      return width;
    }
    produced += std::max(width[o], 0);
  }
  const int expected = is_update ? m.state_dim : m.output_dim;
  if (produced != expected) {
    diag(g.outputs().empty() ? -1 : g.outputs().back(),
         fmt::format("graph produces {} wires, expected {}", produced, expected));
  }

  // Every node must feed an output (directly or through others).
  std::vector<bool> live(n, false);
  std::vector<int> stack(g.outputs().begin(), g.outputs().end());
  while (!stack.empty()) {
    int v = stack.back();
    stack.pop_back();
    if (live[v]) continue;
    live[v] = true;
    for (int o : g.node(v).operands) stack.push_back(o);
  }
  for (int v = 0; v < n; ++v) {
    if (!live[v]) diag(v, "dangling node: result is never used");
  }
  return width;
}

}  // namespace

std::vector<Diagnostic> validate_model(const StateSpaceModel& m) {
  std::vector<Diagnostic> diags;
  auto model_diag = [&](std::string msg) {
    diags.push_back(Diagnostic{"model", -1, std::move(msg)});
  };
  if (m.state_dim < 1) model_diag("state dimension must be >= 1");
  if (m.input_dim < 1) model_diag("input dimension must be >= 1");
  if (m.output_dim < 1) model_diag("output dimension must be >= 1");
  if (m.horizon < 1) model_diag("horizon must be >= 1");
  if (static_cast<int>(m.initial_state.size()) != m.state_dim) {
    model_diag(fmt::format("initial state has {} entries, expected {}",
                           m.initial_state.size(), m.state_dim));
  }
  for (const auto& [name, table] : m.params) {
    if (table.steps.empty()) {
      model_diag(fmt::format("table '{}' is empty", name));
      continue;
    }
    for (const Matrix& s : table.steps) {
      if (s.rows != table.rows() || s.cols != table.cols() ||
          s.data.size() != s.rows * s.cols) {
        model_diag(fmt::format("table '{}' has inconsistent step shapes", name));
        break;
      }
    }
    if (table.time_varying() &&
        static_cast<int>(table.steps.size()) < m.horizon) {
      model_diag(fmt::format("table '{}' covers {} steps, horizon is {}", name,
                             table.steps.size(), m.horizon));
    }
  }
  if (m.state_dim < 1 || m.input_dim < 1 || m.output_dim < 1) return diags;
  check_graph(m, m.update_graph, "update", true, diags);
  check_graph(m, m.output_graph, "output", false, diags);
  return diags;
}

void require_valid(const StateSpaceModel& m) {
  auto diags = validate_model(m);
  if (diags.empty()) return;
  std::string msg = "invalid model";
  for (const Diagnostic& d : diags) msg += "\n  " + d.to_string();
  throw ValidationError(msg);
}

GraphEvaluator::GraphEvaluator(const StateSpaceModel& model,
                               const DataflowGraph& graph)
    : model_(model), graph_(graph) {
  int cycle_node = -1;
  auto order = topo_order(graph, &cycle_node);
  if (!order) {
    throw ValidationError(
        fmt::format("combinational cycle through node {}", cycle_node));
  }
  order_ = std::move(*order);
  values_.resize(graph.size());
  delayed_.resize(graph.size());
  std::vector<Diagnostic> ignored;
  const std::vector<int> width = check_graph(model, graph, "graph", false, ignored);
  for (std::size_t v = 0; v < graph.size(); ++v) {
    if (graph.node(static_cast<int>(v)).op == DfOp::kDelay && width[v] > 0) {
      delayed_[v].assign(width[v], 0.0);
    }
  }
}

std::vector<double> GraphEvaluator::evaluate(std::span<const double> state,
                                             std::span<const double> input,
                                             int k) {
  for (int v : order_) {
    const DfNode& node = graph_.node(v);
    std::vector<double>& out = values_[v];
    switch (node.op) {
      case DfOp::kInput:
        out.assign(1, input[node.index]);
        break;
      case DfOp::kStateIn:
        out.assign(1, state[node.index]);
        break;
      case DfOp::kConst:
        out = node.value;
        break;
      case DfOp::kMatVec: {
        std::vector<double> operand;
        for (int o : node.operands) {
          operand.insert(operand.end(), values_[o].begin(), values_[o].end());
        }
        out = model_.params.at(node.table).at(k).apply(operand);
        break;
      }
      case DfOp::kVecAdd: {
        const auto& a = values_[node.operands[0]];
        const auto& b = values_[node.operands[1]];
        out.resize(a.size());
        for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
        break;
      }
      case DfOp::kScalarAdd:
        out.assign(1, values_[node.operands[0]][0] + values_[node.operands[1]][0]);
        break;
      case DfOp::kScalarMul:
        out.assign(1, values_[node.operands[0]][0] * values_[node.operands[1]][0]);
        break;
      case DfOp::kActivation: {
        const auto& a = values_[node.operands[0]];
        out.resize(a.size());
        for (std::size_t i = 0; i < a.size(); ++i) {
          out[i] = apply_activation(node.activation, a[i]);
        }
        break;
      }
      case DfOp::kDelay:
        out = delayed_[v];
        break;
    }
  }
  for (int v : order_) {
    const DfNode& node = graph_.node(v);
    if (node.op != DfOp::kDelay) continue;
    delayed_[v] = values_[node.operands[0]];
  }
  std::vector<double> result;
  for (int o : graph_.outputs()) {
    result.insert(result.end(), values_[o].begin(), values_[o].end());
  }
  return result;
}

namespace {

struct TermSet {
  std::optional<std::string> state_table;
  std::optional<std::string> input_table;
  std::optional<std::string> bias_table;
};

[[noreturn]] void not_layered(const std::string& graph, int node,
                              const std::string& why) {
  throw ValidationError(fmt::format(
      "model is not in layered form: {} graph node {}: {}", graph, node, why));
}

// Operands must be exactly StateIn(0..n-1) (or Input(0..n-1)) in order.
bool reads_all_in_order(const DataflowGraph& g, const DfNode& mv, DfOp kind,
                        int n) {
  if (static_cast<int>(mv.operands.size()) != n) return false;
  for (int i = 0; i < n; ++i) {
    const DfNode& o = g.node(mv.operands[i]);
    if (o.op != kind || o.index != i) return false;
  }
  return true;
}

void collect_terms(const StateSpaceModel& m, const DataflowGraph& g, int v,
                   TermSet& terms, const std::string& graph) {
  const DfNode& node = g.node(v);
  if (node.op == DfOp::kVecAdd) {
    collect_terms(m, g, node.operands[0], terms, graph);
    collect_terms(m, g, node.operands[1], terms, graph);
    return;
  }
  if (node.op != DfOp::kMatVec) {
    not_layered(graph, v, fmt::format("expected MatVec or VecAdd, found {}",
                                      df_op_name(node.op)));
  }
  std::optional<std::string>* slot = nullptr;
  if (reads_all_in_order(g, node, DfOp::kStateIn, m.state_dim)) {
    slot = &terms.state_table;
  } else if (reads_all_in_order(g, node, DfOp::kInput, m.input_dim)) {
    slot = &terms.input_table;
  } else if (node.operands.size() == 1 &&
             g.node(node.operands[0]).op == DfOp::kConst &&
             g.node(node.operands[0]).value == std::vector<double>{1.0}) {
    slot = &terms.bias_table;
  } else {
    not_layered(graph, v,
                "MatVec operands must be the full state, the full input, or "
                "the constant 1");
  }
  if (slot->has_value()) not_layered(graph, v, "duplicate term kind");
  *slot = node.table;
}

}  // namespace

LayeredNetwork extract_layered(const StateSpaceModel& m) {
  require_valid(m);
  for (double x0 : m.initial_state) {
    if (x0 != 0.0) {
      throw ValidationError(
          "model is not in layered form: initial state must be zero");
    }
  }
  LayeredNetwork net;
  net.inputs = m.input_dim;
  net.nodes = m.state_dim;
  net.layers = m.horizon;
  net.outputs = m.output_dim;
  net.operand_width = std::max(net.inputs, net.nodes);

  const DataflowGraph& ug = m.update_graph;
  if (ug.outputs().size() != 1) not_layered("update", -1, "expected one output");
  int root = ug.outputs()[0];
  if (ug.node(root).op == DfOp::kActivation) {
    net.hidden_activation = ug.node(root).activation;
    root = ug.node(root).operands[0];
  } else {
    net.hidden_activation = ActivationKind::kIdentity;
  }
  TermSet terms;
  collect_terms(m, ug, root, terms, "update");
  if (!terms.input_table) not_layered("update", root, "no input term");

  const int M = net.nodes, L = net.inputs, K = net.operand_width;
  for (int k = 0; k < m.horizon; ++k) {
    Matrix layer(M, K);
    if (k == 0) {
      const Matrix& in = m.params.at(*terms.input_table).at(0);
      for (int i = 0; i < M; ++i) {
        for (int j = 0; j < L; ++j) layer(i, j) = in(i, j);
      }
    } else {
      const Matrix& in = m.params.at(*terms.input_table).at(k);
      if (!in.is_zero()) {
        throw ValidationError(fmt::format(
            "model is not in layered form: input table '{}' is nonzero at "
            "step {} (input may only enter at step 0)",
            *terms.input_table, k));
      }
      if (terms.state_table) {
        const Matrix& st = m.params.at(*terms.state_table).at(k);
        for (int i = 0; i < M; ++i) {
          for (int j = 0; j < M; ++j) layer(i, j) = st(i, j);
        }
      }
    }
    net.weights.push_back(std::move(layer));
    std::vector<double> bias(M, 0.0);
    if (terms.bias_table) {
      const Matrix& b = m.params.at(*terms.bias_table).at(k);
      for (int i = 0; i < M; ++i) bias[i] = b(i, 0);
    }
    net.biases.push_back(std::move(bias));
  }

  const DataflowGraph& og = m.output_graph;
  if (og.outputs().size() != 1) not_layered("output", -1, "expected one output");
  int oroot = og.outputs()[0];
  if (og.node(oroot).op == DfOp::kActivation) {
    net.output_activation = og.node(oroot).activation;
    oroot = og.node(oroot).operands[0];
  }
  const DfNode& cnode = og.node(oroot);
  if (cnode.op != DfOp::kMatVec ||
      !reads_all_in_order(og, cnode, DfOp::kStateIn, M)) {
    not_layered("output", oroot, "expected MatVec over the full state");
  }
  const ParamTable& ct = m.params.at(cnode.table);
  if (ct.time_varying()) {
    not_layered("output", oroot, "output table must be time invariant");
  }
  net.output_weights = ct.at(0);
  return net;
}

}  // namespace sshdl
