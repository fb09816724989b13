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

#include "sshdl/nn.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "sshdl/errors.hpp"

namespace sshdl {

using nlohmann::json;

namespace {

constexpr int kWeightsVersion = 1;

void check_shape(const Matrix& m, std::size_t rows, std::size_t cols,
                 const std::string& name) {
  if (m.rows != rows || m.cols != cols || m.data.size() != rows * cols) {
    throw ValidationError(fmt::format("tensor {} has shape {}x{}, expected {}x{}",
                                      name, m.rows, m.cols, rows, cols));
  }
}

bool finite(const Matrix& m) {
  for (double v : m.data) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

}  // namespace

void validate_nn(const NNSpec& nn) {
  if (nn.inputs < 1 || nn.layers < 1 || nn.nodes < 1 || nn.outputs < 1) {
    throw ValidationError(fmt::format(
        "network dimensions must be >= 1 (L={}, N={}, M={}, P={})", nn.inputs,
        nn.layers, nn.nodes, nn.outputs));
  }
  const auto L = static_cast<std::size_t>(nn.inputs);
  const auto M = static_cast<std::size_t>(nn.nodes);
  const auto P = static_cast<std::size_t>(nn.outputs);
  check_shape(nn.input_weights, L, M, "beta");
  if (nn.hidden_weights.size() != static_cast<std::size_t>(nn.layers - 1)) {
    throw ValidationError(fmt::format("tensor W holds {} matrices, expected {}",
                                      nn.hidden_weights.size(), nn.layers - 1));
  }
  for (std::size_t k = 0; k < nn.hidden_weights.size(); ++k) {
    check_shape(nn.hidden_weights[k], M, M, fmt::format("W[{}]", k + 1));
  }
  if (nn.biases.size() != static_cast<std::size_t>(nn.layers)) {
    throw ValidationError(fmt::format("tensor b holds {} vectors, expected {}",
                                      nn.biases.size(), nn.layers));
  }
  for (std::size_t k = 0; k < nn.biases.size(); ++k) {
    if (nn.biases[k].size() != M) {
      throw ValidationError(fmt::format("tensor b[{}] has {} entries, expected {}",
                                        k, nn.biases[k].size(), M));
    }
    for (double v : nn.biases[k]) {
      if (!std::isfinite(v)) {
        throw ValidationError(fmt::format("tensor b[{}] is not finite", k));
      }
    }
  }
  check_shape(nn.output_weights, P, M, "C");
  if (!finite(nn.input_weights)) throw ValidationError("tensor beta is not finite");
  for (std::size_t k = 0; k < nn.hidden_weights.size(); ++k) {
    if (!finite(nn.hidden_weights[k])) {
      throw ValidationError(fmt::format("tensor W[{}] is not finite", k + 1));
    }
  }
  if (!finite(nn.output_weights)) throw ValidationError("tensor C is not finite");
  for (const auto& [key, f] : nn.tensor_formats) {
    if (key != "weight" && key != "bias" && key != "output_weight") {
      throw ValidationError(fmt::format("unknown format override '{}'", key));
    }
    if (!f.valid()) {
      throw ValidationError(fmt::format("format override '{}' is invalid: {}",
                                        key, f.to_string()));
    }
  }
}

StateSpaceModel build_state_space(const NNSpec& nn) {
  validate_nn(nn);
  const int L = nn.inputs, M = nn.nodes, N = nn.layers, P = nn.outputs;
  StateSpaceModel m;
  m.name = fmt::format("mlp_{}x{}x{}x{}", L, N, M, P);
  m.state_dim = M;
  m.input_dim = L;
  m.output_dim = P;
  m.horizon = N;
  m.initial_state.assign(M, 0.0);

  // The input enters through a table that is zero after step 0 and the
  // recurrent weights through one that is zero at step 0.
  ParamTable beta_in, w, b;
  const Matrix beta_t = nn.input_weights.transposed();
  for (int k = 0; k < N; ++k) {
    beta_in.steps.push_back(k == 0 ? beta_t : Matrix(M, L));
    w.steps.push_back(k == 0 ? Matrix(M, M) : nn.hidden_weights[k - 1]);
    Matrix bias(M, 1);
    for (int i = 0; i < M; ++i) bias(i, 0) = nn.biases[k][i];
    b.steps.push_back(std::move(bias));
  }
  m.params["beta_in"] = std::move(beta_in);
  m.params["W"] = std::move(w);
  m.params["b"] = std::move(b);
  m.params["C"] = ParamTable{{nn.output_weights}};

  DataflowGraph& ug = m.update_graph;
  std::vector<int> states, inputs;
  for (int i = 0; i < M; ++i) states.push_back(ug.add_state(i));
  for (int j = 0; j < L; ++j) inputs.push_back(ug.add_input(j));
  const int one = ug.add_const({1.0});
  const int recur = ug.add_matvec("W", states);
  const int inject = ug.add_matvec("beta_in", inputs);
  const int bias = ug.add_matvec("b", {one});
  const int pre = ug.add_vec_add(ug.add_vec_add(recur, inject), bias);
  ug.set_outputs({ug.add_activation(nn.activation, pre)});

  DataflowGraph& og = m.output_graph;
  std::vector<int> ostates;
  for (int i = 0; i < M; ++i) ostates.push_back(og.add_state(i));
  int y = og.add_matvec("C", ostates);
  if (nn.output_activation != ActivationKind::kIdentity) {
    y = og.add_activation(nn.output_activation, y);
  }
  og.set_outputs({y});
  return m;
}

std::vector<double> mlp_forward(const NNSpec& nn, const std::vector<double>& u) {
  std::vector<double> h(nn.nodes);
  for (int i = 0; i < nn.nodes; ++i) {
    double s = nn.biases[0][i];
    for (int j = 0; j < nn.inputs; ++j) s += nn.input_weights(j, i) * u[j];
    h[i] = apply_activation(nn.activation, s);
  }
  for (int k = 1; k < nn.layers; ++k) {
    std::vector<double> next(nn.nodes);
    const Matrix& w = nn.hidden_weights[k - 1];
    for (int i = 0; i < nn.nodes; ++i) {
      double s = nn.biases[k][i];
      for (int j = 0; j < nn.nodes; ++j) s += w(i, j) * h[j];
      next[i] = apply_activation(nn.activation, s);
    }
    h = std::move(next);
  }
  std::vector<double> y(nn.outputs);
  for (int i = 0; i < nn.outputs; ++i) {
    double s = 0.0;
    for (int j = 0; j < nn.nodes; ++j) s += nn.output_weights(i, j) * h[j];
    y[i] = apply_activation(nn.output_activation, s);
  }
  return y;
}

namespace {

const json& require(const json& doc, const char* key) {
  auto it = doc.find(key);
  if (it == doc.end()) {
    throw ValidationError(fmt::format("weights document: missing field '{}'", key));
  }
  return *it;
}

int require_dim(const json& doc, const char* key) {
  const json& v = require(doc, key);
  if (!v.is_number_integer()) {
    throw ValidationError(
        fmt::format("weights document: field '{}' must be an integer", key));
  }
  return v.get<int>();
}

ActivationKind parse_act(const json& v, const char* key) {
  if (!v.is_string()) {
    throw ValidationError(fmt::format("weights document: '{}' must be a string", key));
  }
  auto kind = parse_activation(v.get<std::string>());
  if (!kind) {
    throw ValidationError(fmt::format("weights document: unknown activation '{}'",
                                      v.get<std::string>()));
  }
  return *kind;
}

std::vector<double> parse_vector(const json& v, const std::string& name) {
  if (!v.is_array()) {
    throw ValidationError(fmt::format("tensor {} must be an array", name));
  }
  std::vector<double> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_number()) {
      throw ValidationError(fmt::format("tensor {} entry {} is not a number", name, i));
    }
    out.push_back(v[i].get<double>());
  }
  return out;
}

Matrix parse_matrix(const json& v, const std::string& name) {
  if (!v.is_array() || v.empty()) {
    throw ValidationError(fmt::format("tensor {} must be a nonempty array of rows", name));
  }
  Matrix m;
  m.rows = v.size();
  for (std::size_t r = 0; r < v.size(); ++r) {
    std::vector<double> row = parse_vector(v[r], fmt::format("{} row {}", name, r));
    if (r == 0) m.cols = row.size();
    if (row.size() != m.cols) {
      throw ValidationError(fmt::format("tensor {} row {} has {} entries, expected {}",
                                        name, r, row.size(), m.cols));
    }
    m.data.insert(m.data.end(), row.begin(), row.end());
  }
  return m;
}

std::string row_text(std::span<const double> row) {
  return json(std::vector<double>(row.begin(), row.end())).dump();
}

void append_matrix(std::string& out, const Matrix& m, const char* indent) {
  out += "[\n";
  for (std::size_t r = 0; r < m.rows; ++r) {
    out += fmt::format("{}  {}{}\n", indent, row_text(m.row(r)),
                       r + 1 < m.rows ? "," : "");
  }
  out += fmt::format("{}]", indent);
}

}  // namespace

NNSpec parse_weights(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(
        fmt::format("weights document: parse error at byte {}: {}", e.byte, e.what()));
  }
  if (!doc.is_object()) throw ValidationError("weights document must be an object");
  const json& version = require(doc, "version");
  if (!version.is_number_integer() || version.get<int>() != kWeightsVersion) {
    throw ValidationError(fmt::format("weights document: unsupported version {}",
                                      version.dump()));
  }
  NNSpec nn;
  nn.inputs = require_dim(doc, "L");
  nn.layers = require_dim(doc, "N");
  nn.nodes = require_dim(doc, "M");
  nn.outputs = require_dim(doc, "P");
  nn.activation = parse_act(require(doc, "activation"), "activation");
  if (doc.contains("output_activation")) {
    nn.output_activation = parse_act(doc["output_activation"], "output_activation");
  }
  nn.input_weights = parse_matrix(require(doc, "beta"), "beta");
  const json& w = require(doc, "W");
  if (!w.is_array()) throw ValidationError("tensor W must be an array of matrices");
  for (std::size_t k = 0; k < w.size(); ++k) {
    nn.hidden_weights.push_back(parse_matrix(w[k], fmt::format("W[{}]", k + 1)));
  }
  const json& b = require(doc, "b");
  if (!b.is_array()) throw ValidationError("tensor b must be an array of vectors");
  for (std::size_t k = 0; k < b.size(); ++k) {
    nn.biases.push_back(parse_vector(b[k], fmt::format("b[{}]", k)));
  }
  nn.output_weights = parse_matrix(require(doc, "C"), "C");
  if (doc.contains("formats")) {
    const json& f = doc["formats"];
    if (!f.is_object()) throw ValidationError("weights document: 'formats' must be an object");
    for (const auto& [key, value] : f.items()) {
      if (!value.is_object() || !value.contains("word") || !value.contains("frac")) {
        throw ValidationError(
            fmt::format("format override '{}' needs 'word' and 'frac'", key));
      }
      nn.tensor_formats[key] =
          FixedPointFormat{value["word"].get<int>(), value["frac"].get<int>()};
    }
  }
  validate_nn(nn);
  return nn;
}

std::string serialize_weights(const NNSpec& nn) {
  std::string out = "{\n";
  out += fmt::format("  \"version\": {},\n", kWeightsVersion);
  out += fmt::format("  \"L\": {},\n  \"N\": {},\n  \"M\": {},\n  \"P\": {},\n",
                     nn.inputs, nn.layers, nn.nodes, nn.outputs);
  out += fmt::format("  \"activation\": \"{}\",\n", activation_name(nn.activation));
  if (nn.output_activation != ActivationKind::kIdentity) {
    out += fmt::format("  \"output_activation\": \"{}\",\n",
                       activation_name(nn.output_activation));
  }
  out += "  \"beta\": ";
  append_matrix(out, nn.input_weights, "  ");
  out += ",\n  \"W\": [";
  for (std::size_t k = 0; k < nn.hidden_weights.size(); ++k) {
    out += k == 0 ? "\n    " : ",\n    ";
    append_matrix(out, nn.hidden_weights[k], "    ");
  }
  out += nn.hidden_weights.empty() ? "],\n" : "\n  ],\n";
  out += "  \"b\": [\n";
  for (std::size_t k = 0; k < nn.biases.size(); ++k) {
    out += fmt::format("    {}{}\n", row_text(nn.biases[k]),
                       k + 1 < nn.biases.size() ? "," : "");
  }
  out += "  ],\n  \"C\": ";
  append_matrix(out, nn.output_weights, "  ");
  if (!nn.tensor_formats.empty()) {
    out += ",\n  \"formats\": {";
    bool first = true;
    for (const auto& [key, f] : nn.tensor_formats) {
      out += fmt::format("{}\n    \"{}\": {{\"word\": {}, \"frac\": {}}}",
                         first ? "" : ",", key, f.word_length, f.frac_length);
      first = false;
    }
    out += "\n  }";
  }
  out += "\n}\n";
  return out;
}

NNSpec load_weights(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot read weights file '{}'", path));
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_weights(ss.str());
  } catch (const ValidationError& e) {
    throw ValidationError(fmt::format("{}: {}", path, e.what()));
  }
}

void save_weights(const NNSpec& nn, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(fmt::format("cannot write weights file '{}'", path));
  out << serialize_weights(nn);
  if (!out) throw IoError(fmt::format("write to '{}' failed", path));
}

UniformSource::UniformSource(std::uint64_t seed) : rng_(seed) {}

double UniformSource::next() {
  // 53 random bits scaled to [0, 1), then mapped to [-1, 1).
  return std::ldexp(static_cast<double>(rng_() >> 11), -53) * 2.0 - 1.0;
}

std::vector<double> UniformSource::vector(std::size_t n) {
  std::vector<double> v(n);
  for (double& x : v) x = next();
  return v;
}

NNSpec random_nn(int inputs, int layers, int nodes, int outputs,
                 std::uint64_t seed) {
  if (inputs < 1 || layers < 1 || nodes < 1 || outputs < 1) {
    throw ValidationError("random network dimensions must be >= 1");
  }
  UniformSource src(seed);
  auto fill = [&](std::size_t r, std::size_t c) {
    Matrix m(r, c);
    for (double& v : m.data) v = src.next();
    return m;
  };
  NNSpec nn;
  nn.inputs = inputs;
  nn.layers = layers;
  nn.nodes = nodes;
  nn.outputs = outputs;
  nn.input_weights = fill(inputs, nodes);
  for (int k = 1; k < layers; ++k) nn.hidden_weights.push_back(fill(nodes, nodes));
  for (int k = 0; k < layers; ++k) nn.biases.push_back(src.vector(nodes));
  nn.output_weights = fill(outputs, nodes);
  return nn;
}

}  // namespace sshdl
