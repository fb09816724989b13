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
#include <filesystem>
#include <fstream>
#include <numeric>

#include <gtest/gtest.h>

#include "sshdl/errors.hpp"
#include "sshdl/simkit.hpp"

namespace sshdl {
namespace {

// Independent forward pass: column-vector form h' = tanh(W h + b) with the
// input layer applied as beta^T u.
std::vector<double> feed_forward(const NNSpec& nn, const std::vector<double>& u) {
  std::vector<double> h(nn.nodes);
  for (int i = 0; i < nn.nodes; ++i) {
    std::vector<double> col(nn.inputs);
    for (int j = 0; j < nn.inputs; ++j) col[j] = nn.input_weights(j, i);
    h[i] = std::tanh(std::inner_product(col.begin(), col.end(), u.begin(), nn.biases[0][i]));
  }
  for (const Matrix& w : nn.hidden_weights) {
    const std::size_t k = &w - nn.hidden_weights.data() + 1;
    std::vector<double> next(nn.nodes);
    for (int i = 0; i < nn.nodes; ++i) {
      const auto r = w.row(i);
      next[i] = std::tanh(std::inner_product(r.begin(), r.end(), h.begin(), nn.biases[k][i]));
    }
    h = next;
  }
  std::vector<double> y(nn.outputs);
  for (int p = 0; p < nn.outputs; ++p) {
    const auto r = nn.output_weights.row(p);
    y[p] = std::inner_product(r.begin(), r.end(), h.begin(), 0.0);
  }
  return y;
}

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("sshdl_nn_test_" + name);
}

TEST(RandomNn, ShapesAndRange) {
  const NNSpec nn = random_nn(3, 4, 4, 2, 7);
  EXPECT_EQ(nn.inputs, 3);
  EXPECT_EQ(nn.layers, 4);
  EXPECT_EQ(nn.nodes, 4);
  EXPECT_EQ(nn.outputs, 2);
  EXPECT_EQ(nn.input_weights.rows, 3u);
  EXPECT_EQ(nn.input_weights.cols, 4u);
  EXPECT_EQ(nn.hidden_weights.size(), 3u);
  EXPECT_EQ(nn.biases.size(), 4u);
  EXPECT_EQ(nn.output_weights.rows, 2u);
  for (double v : nn.input_weights.data) {
    EXPECT_GE(v, -1.0);
    EXPECT_LT(v, 1.0);
  }
  EXPECT_NO_THROW(validate_nn(nn));
}

TEST(RandomNn, Deterministic) {
  EXPECT_EQ(random_nn(3, 4, 4, 2, 7), random_nn(3, 4, 4, 2, 7));
  EXPECT_NE(random_nn(3, 4, 4, 2, 7).input_weights, random_nn(3, 4, 4, 2, 8).input_weights);
}

TEST(BuildStateSpace, FigureFiveShape) {
  const StateSpaceModel m = build_state_space(random_nn(3, 4, 4, 2, 7));
  EXPECT_EQ(m.state_dim, 4);
  EXPECT_EQ(m.horizon, 4);
  EXPECT_EQ(m.output_dim, 2);
  EXPECT_EQ(m.input_dim, 3);
  EXPECT_TRUE(validate_model(m).empty());
}

TEST(BuildStateSpace, ZeroNetworkGivesZero) {
  NNSpec nn = random_nn(3, 4, 4, 2, 1);
  for (double& v : nn.input_weights.data) v = 0;
  for (Matrix& w : nn.hidden_weights) std::fill(w.data.begin(), w.data.end(), 0.0);
  for (auto& b : nn.biases) std::fill(b.begin(), b.end(), 0.0);
  for (double& v : nn.output_weights.data) v = 0;
  const StateSpaceModel m = build_state_space(nn);
  for (const auto& u : random_inputs(3, 20, 2)) {
    for (double y : simulate_reference(m, u)) EXPECT_EQ(y, 0.0);
  }
}

TEST(BuildStateSpace, ReferenceMatchesFeedForward) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const NNSpec nn = random_nn(1 + seed % 5, 1 + seed % 4, 2 + seed % 6, 1 + seed % 3, seed);
    const StateSpaceModel m = build_state_space(nn);
    for (const auto& u : random_inputs(nn.inputs, 20, seed + 100)) {
      const auto want = feed_forward(nn, u);
      const auto got = simulate_reference(m, u);
      const auto mlp = mlp_forward(nn, u);
      ASSERT_EQ(got.size(), want.size());
      for (std::size_t i = 0; i < want.size(); ++i) {
        EXPECT_NEAR(got[i], want[i], 1e-12 * std::max(1.0, std::abs(want[i])));
        EXPECT_NEAR(mlp[i], want[i], 1e-12 * std::max(1.0, std::abs(want[i])));
      }
    }
  }
}

TEST(BuildStateSpace, RejectsBadShape) {
  NNSpec nn = random_nn(3, 4, 4, 2, 7);
  nn.hidden_weights[0] = Matrix(3, 4);
  try {
    build_state_space(nn);
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("W[1]"), std::string::npos) << e.what();
  }
}

TEST(Weights, RoundTrip) {
  NNSpec nn = random_nn(3, 4, 4, 2, 7);
  nn.output_activation = ActivationKind::kTanh;
  nn.tensor_formats["weight"] = FixedPointFormat{12, 10};
  const std::string text = serialize_weights(nn);
  EXPECT_EQ(parse_weights(text), nn);
  EXPECT_EQ(serialize_weights(parse_weights(text)), text);
}

TEST(Weights, FileRoundTripIsByteStable) {
  const auto a = temp_path("a.json");
  const auto b = temp_path("b.json");
  save_weights(random_nn(3, 4, 4, 2, 7), a.string());
  save_weights(load_weights(a.string()), b.string());
  std::ifstream fa(a), fb(b);
  const std::string ta((std::istreambuf_iterator<char>(fa)), {});
  const std::string tb((std::istreambuf_iterator<char>(fb)), {});
  EXPECT_EQ(ta, tb);
  EXPECT_EQ(load_weights(a.string()), random_nn(3, 4, 4, 2, 7));
  std::filesystem::remove(a);
  std::filesystem::remove(b);
}

TEST(Weights, ShapeErrorNamesTensor) {
  NNSpec nn = random_nn(3, 4, 4, 2, 7);
  // W[1] becomes 3 x 4 for M = 4.
  nn.hidden_weights[0] = Matrix(3, 4);
  EXPECT_THROW(validate_nn(nn), ValidationError);
  try {
    parse_weights(serialize_weights(nn));
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("W[1]"), std::string::npos) << e.what();
  }
}

TEST(Weights, SyntaxErrorCarriesOffset) {
  try {
    parse_weights("{\"version\": 1, \"L\": 3,, }");
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("byte 23"), std::string::npos) << e.what();
  }
}

TEST(Weights, MissingFieldAndVersion) {
  EXPECT_THROW(parse_weights("{\"version\": 1}"), ValidationError);
  std::string text = serialize_weights(random_nn(1, 1, 1, 1, 1));
  text.replace(text.find("\"version\": 1"), 12, "\"version\": 9");
  EXPECT_THROW(parse_weights(text), ValidationError);
  EXPECT_THROW(parse_weights("[1, 2]"), ValidationError);
}

TEST(Weights, MissingFileIsIoError) {
  try {
    load_weights("/nonexistent/dir/w.json");
    FAIL();
  } catch (const IoError& e) {
    EXPECT_EQ(e.exit_code(), 4);
  }
}

TEST(UniformSource, RangeAndDeterminism) {
  UniformSource a(42), b(42);
  for (int i = 0; i < 1000; ++i) {
    const double x = a.next();
    EXPECT_EQ(x, b.next());
    EXPECT_GE(x, -1.0);
    EXPECT_LT(x, 1.0);
  }
}

}  // namespace
}  // namespace sshdl
