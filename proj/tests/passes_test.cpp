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

#include "sshdl/passes.hpp"

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "netlist_gen.hpp"
#include "sshdl/elaborator.hpp"
#include "sshdl/errors.hpp"
#include "sshdl/nn.hpp"
#include "sshdl/rtl_sim.hpp"

namespace sshdl {
namespace {

using testing::GenOptions;
using testing::path_register_counts;
using testing::random_netlist;
using testing::random_stream;
using testing::simulate_stream;

Matrix random_matrix(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  Matrix m(n, n);
  for (double& v : m.data) v = dist(rng);
  return m;
}

// x[k+1] = A[k] x[k] with y = x[N].
StateSpaceModel linear_system(ParamTable a, int dim, int horizon,
                              std::vector<double> x0) {
  StateSpaceModel m;
  m.name = "lin";
  m.state_dim = dim;
  m.input_dim = 1;
  m.output_dim = dim;
  m.horizon = horizon;
  m.initial_state = std::move(x0);
  m.params["A"] = std::move(a);
  m.params["I"] = ParamTable{{Matrix::identity(dim)}};
  std::vector<int> s, t;
  for (int i = 0; i < dim; ++i) s.push_back(m.update_graph.add_state(i));
  m.update_graph.set_outputs({m.update_graph.add_matvec("A", s)});
  for (int i = 0; i < dim; ++i) t.push_back(m.output_graph.add_state(i));
  m.output_graph.set_outputs({m.output_graph.add_matvec("I", t)});
  return m;
}

TEST(TransitionMatrix, IdentityAndRotation) {
  const ParamTable id{{Matrix::identity(3)}};
  EXPECT_EQ(transition_matrix(id, 0, 5), Matrix::identity(3));
  Matrix rot(2, 2);
  rot.data = {0, 1, -1, 0};
  EXPECT_EQ(transition_matrix(ParamTable{{rot}}, 0, 4), Matrix::identity(2));
  Matrix half(2, 2);
  half.data = {0, -1, 1, 0};
  EXPECT_EQ(transition_matrix(ParamTable{{rot}}, 0, 2) * transition_matrix(ParamTable{{rot}}, 0, 1),
            half);
  EXPECT_THROW(transition_matrix(id, 0, 0), ValidationError);
}

TEST(TransitionMatrix, LatestFactorOnTheLeft) {
  Matrix p(2, 2), q(2, 2);
  p.data = {1, 1, 0, 1};
  q.data = {1, 0, 1, 1};
  const ParamTable t{{p, q}};
  EXPECT_EQ(transition_matrix(t, 0, 2), q * p);
  const LinearBlock blk = make_linear_block(t, 0, 2);
  EXPECT_EQ(blk.span, 2);
  EXPECT_EQ(blk.steps.size(), 2u);
  EXPECT_EQ(blk.fused, q * p);
}

TEST(Fuse, RotationFusesToIdentity) {
  Matrix rot(2, 2);
  rot.data = {0, 1, -1, 0};
  const StateSpaceModel m = linear_system(ParamTable{{rot}}, 2, 8, {0.3, -0.7});
  const StateSpaceModel f = fuse_state_transition(m, 3);
  EXPECT_EQ(f.horizon, 2);
  const auto& phi = f.params.at("A_fused");
  EXPECT_EQ(phi.at(0), Matrix::identity(2));
  const auto y = simulate_reference(f, {0.0});
  EXPECT_DOUBLE_EQ(y[0], 0.3);
  EXPECT_DOUBLE_EQ(y[1], -0.7);
}

TEST(Fuse, RandomTimeVaryingMatchesSequential) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 30; ++trial) {
    const int dim = 1 + static_cast<int>(rng() % 8);
    const int horizon = 1 + static_cast<int>(rng() % 12);
    const int j = static_cast<int>(rng() % 6);
    ParamTable a;
    for (int k = 0; k < horizon; ++k) a.steps.push_back(random_matrix(rng, dim));
    std::vector<double> x0(dim);
    for (double& v : x0) v = std::uniform_real_distribution<double>(-1, 1)(rng);
    const StateSpaceModel m = linear_system(a, dim, horizon, x0);
    const StateSpaceModel f = fuse_state_transition(m, j);
    const auto seq = state_trajectory(m, {0.0});
    const auto fused = state_trajectory(f, {0.0});
    ASSERT_EQ(static_cast<int>(fused.size()), (horizon + j) / (j + 1) + 1);
    for (std::size_t s = 0; s < fused.size(); ++s) {
      const std::size_t step = std::min<std::size_t>(s * (j + 1), horizon);
      for (int i = 0; i < dim; ++i) {
        const double want = seq[step][i];
        EXPECT_NEAR(fused[s][i], want, 1e-12 * std::max(1.0, std::abs(want)));
      }
    }
  }
}

TEST(Fuse, ZeroDepthKeepsHorizon) {
  std::mt19937_64 rng(1);
  ParamTable a{{random_matrix(rng, 3), random_matrix(rng, 3)}};
  const StateSpaceModel m = linear_system(a, 3, 2, {1, 0, 0});
  const StateSpaceModel f = fuse_state_transition(m, 0);
  EXPECT_EQ(f.horizon, 2);
  EXPECT_EQ(simulate_reference(f, {0}), simulate_reference(m, {0}));
}

TEST(Fuse, RejectsNonlinearUpdate) {
  const StateSpaceModel m = build_state_space(random_nn(3, 4, 4, 2, 7));
  try {
    fuse_state_transition(m, 2);
    FAIL();
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("Activation"), std::string::npos) << msg;
    EXPECT_NE(msg.find("not linear"), std::string::npos) << msg;
  }
  EXPECT_THROW(fuse_state_transition(linear_system(ParamTable{{Matrix::identity(2)}}, 2, 2,
                                                   {0, 0}),
                                     -1),
               ValidationError);
}

// a, b -> mul -> requant -> y
Netlist product_chain() {
  Netlist n;
  const int a = n.add_input("a", 8, true, Group::kHiddenLayer);
  const int b = n.add_input("b", 8, true, Group::kHiddenLayer);
  const int m = n.add_op(Op::kMul, {{a, 0}, {b, 0}}, 16, true, Group::kHiddenLayer, "m");
  const int q = n.add_op(Op::kRequant, {{m, 0}}, 8, true, Group::kHiddenLayer, "q");
  n.node(q).frac_from = 6;
  n.node(q).fmt = FixedPointFormat{8, 2};
  n.node(q).regs = {0};
  n.add_output("y", {q, 1});
  return n;
}

TEST(PipelineMultiplier, ZeroStagesIsIdentity) {
  const Netlist n = product_chain();
  const Netlist p = pipeline_multiplier(n, 2, 0);
  EXPECT_EQ(p.register_count(), n.register_count());
  EXPECT_EQ(p.node(3).in, n.node(3).in);
}

TEST(PipelineMultiplier, RealignedStreamsMatch) {
  const Netlist n = product_chain();
  const Netlist p = pipeline_multiplier(n, 2, 2);
  EXPECT_EQ(p.register_count(), n.register_count() + 2);
  const auto stream = random_stream(2, 100, 3);
  const auto a = simulate_stream(n, stream);
  const auto b = simulate_stream(p, stream);
  EXPECT_EQ(b[0][0], 0);
  EXPECT_EQ(b[1][0], 0);
  for (std::size_t c = 2; c < a.size(); ++c) EXPECT_EQ(b[c], a[c - 2]);
}

TEST(PipelineMultiplier, EveryPathThroughTheNodeGainsStages) {
  GenOptions o;
  o.feedback = false;
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const Netlist n = random_netlist(seed, o);
    int mul = -1;
    for (std::size_t v = 0; v < n.size(); ++v) {
      if (n.node(static_cast<int>(v)).op == Op::kMul) mul = static_cast<int>(v);
    }
    if (mul < 0) continue;
    const Netlist p = pipeline_multiplier(n, mul, 2);
    // Each edge out of the multiplier carries exactly two more registers.
    for (std::size_t v = 0; v < n.size(); ++v) {
      for (std::size_t i = 0; i < n.node(static_cast<int>(v)).in.size(); ++i) {
        const Edge& e = n.node(static_cast<int>(v)).in[i];
        const Edge& f = p.node(static_cast<int>(v)).in[i];
        EXPECT_EQ(f.delay, e.delay + (e.src == mul ? 2 : 0));
      }
    }
    EXPECT_EQ(p.register_count(), n.register_count() + 2);
  }
}

TEST(PipelineMultiplier, RejectsOtherNodes) {
  EXPECT_THROW(pipeline_multiplier(product_chain(), 3, 1), ValidationError);
  EXPECT_THROW(pipeline_multiplier(product_chain(), 99, 1), ValidationError);
}

TEST(Timing, DelayModel) {
  const DelayModel d;
  EXPECT_EQ(d.delay(Op::kMul), 3);
  EXPECT_EQ(d.delay(Op::kAdd), 1);
  EXPECT_EQ(d.delay(Op::kRom), 1);
  EXPECT_EQ(d.delay(Op::kConst), 0);
  EXPECT_EQ(d.delay(Op::kSelect), 1);
  EXPECT_EQ(critical_path(product_chain()), 4);
  const TimingReport r = analyze_timing(product_chain());
  EXPECT_EQ(r.endpoints, 1);
}

// x, y -> add -> mul -> add(+y) -> register -> out
Netlist add_mul_add() {
  Netlist n;
  const int x = n.add_input("x", 8, true, Group::kHiddenLayer);
  const int y = n.add_input("y", 8, true, Group::kHiddenLayer);
  const int a1 = n.add_op(Op::kAdd, {{x, 0}, {y, 0}}, 8, true, Group::kHiddenLayer, "a1");
  const int m = n.add_op(Op::kMul, {{a1, 0}, {a1, 0}}, 12, true, Group::kHiddenLayer, "m");
  const int a2 = n.add_op(Op::kAdd, {{m, 0}, {y, 0}}, 12, true, Group::kHiddenLayer, "a2");
  n.node(a2).regs = {0};
  n.add_output("out", {a2, 1});
  return n;
}

TEST(Retime, MovesRegisterBeforeFinalAdd) {
  const Netlist n = add_mul_add();
  EXPECT_EQ(critical_path(n), 5);
  const Netlist r = retime(n);
  EXPECT_LE(critical_path(r), 4);
  EXPECT_EQ(r.node(4).regs.size(), 0u);
  const auto lags = retiming_lags(n, r);
  ASSERT_TRUE(lags.has_value());
  EXPECT_NE((*lags)[4], 0);
  const auto stream = random_stream(2, 200, 1);
  EXPECT_EQ(simulate_stream(n, stream), simulate_stream(r, stream));
}

TEST(Retime, ShortensProductChain) {
  const Netlist n = product_chain();
  const Netlist r = retime(n);
  EXPECT_EQ(critical_path(r), 3);
  const auto stream = random_stream(2, 100, 4);
  EXPECT_EQ(simulate_stream(n, stream), simulate_stream(r, stream));
}

TEST(Retime, BalancedNetlistIsFixedPoint) {
  Netlist n = product_chain();
  n.node(2).regs = {0};
  n.node(3).regs.clear();
  n.node(3).in[0].delay = 1;
  n.outputs()[0].edge.delay = 0;
  EXPECT_EQ(critical_path(n), 3);
  const Netlist r = retime(n);
  EXPECT_EQ(critical_path(r), 3);
  EXPECT_EQ(r.register_count(), n.register_count());
  for (std::size_t v = 0; v < n.size(); ++v) {
    EXPECT_EQ(r.node(static_cast<int>(v)).in, n.node(static_cast<int>(v)).in);
  }
}

TEST(Retime, RandomNetlistsStayEquivalent) {
  int improved = 0;
  for (std::uint64_t seed = 0; seed < 60; ++seed) {
    const Netlist n = random_netlist(seed);
    const Netlist r = retime(n);
    EXPECT_LE(critical_path(r), critical_path(n)) << seed;
    improved += critical_path(r) < critical_path(n);
    EXPECT_TRUE(retiming_lags(n, r).has_value()) << seed;
    const auto stream = random_stream(n.inputs().size(), 60, seed);
    EXPECT_EQ(simulate_stream(n, stream), simulate_stream(r, stream)) << seed;
  }
  EXPECT_GT(improved, 0);
}

TEST(Retime, PathRegisterCountsPreserved) {
  GenOptions o;
  o.feedback = false;
  o.nodes = 10;
  for (std::uint64_t seed = 100; seed < 150; ++seed) {
    const Netlist n = random_netlist(seed, o);
    const Netlist r = retime(n);
    EXPECT_EQ(path_register_counts(n), path_register_counts(r)) << seed;
  }
}

TEST(Retime, LagsRejectIllegalEdit) {
  const Netlist n = add_mul_add();
  Netlist bad = n;
  bad.node(3).in[0].delay = 1;  // one register on only one operand of mul
  bad.node(2).regs = {0};
  EXPECT_FALSE(retiming_lags(n, bad).has_value());
}

TEST(CSlow, UnitFactorIsIdentity) {
  const Netlist n = random_netlist(5);
  const Netlist c = c_slow(n, 1);
  EXPECT_EQ(c.register_count(), n.register_count());
  const auto stream = random_stream(n.inputs().size(), 30, 5);
  EXPECT_EQ(simulate_stream(n, stream), simulate_stream(c, stream));
  EXPECT_THROW(c_slow(n, 0), ValidationError);
}

TEST(CSlow, InterleavedStreamsDeinterleave) {
  for (int C : {2, 3}) {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
      const Netlist n = random_netlist(seed);
      const Netlist c = c_slow(n, C);
      EXPECT_EQ(c.register_count(), n.register_count() * C);
      std::vector<std::vector<std::vector<int128>>> streams;
      for (int s = 0; s < C; ++s) {
        streams.push_back(random_stream(n.inputs().size(), 40, seed * 10 + s));
      }
      std::vector<std::vector<int128>> mixed;
      for (std::size_t t = 0; t < 40; ++t) {
        for (int s = 0; s < C; ++s) mixed.push_back(streams[s][t]);
      }
      const auto out = simulate_stream(c, mixed);
      for (int s = 0; s < C; ++s) {
        const auto want = simulate_stream(n, streams[s]);
        for (std::size_t t = 0; t < 40; ++t) {
          ASSERT_EQ(out[t * C + s], want[t]) << "C " << C << " seed " << seed;
        }
      }
    }
  }
}

TEST(CSlow, LayeredNetlistDoublesLatency) {
  const StateSpaceModel m = build_state_space(random_nn(3, 4, 4, 2, 7));
  const Netlist n = elaborate(m, {}, uniform_formats(12, 8));
  const Netlist c = c_slow(n, 2);
  EXPECT_EQ(c.info.latency(), 2 * n.info.latency());
  const auto report = compare_with_functional(m, c, random_inputs(3, 100, 1));
  EXPECT_TRUE(report.equivalent()) << report.to_string();
}

TEST(Passes, ElaboratedNetlistRetimesEquivalently) {
  const StateSpaceModel m = build_state_space(random_nn(3, 4, 4, 2, 7));
  const Netlist n = elaborate(m, Schedule{2, 0, 1}, uniform_formats(16, 12));
  const Netlist r = retime(n);
  EXPECT_LE(critical_path(r), critical_path(n));
  EXPECT_TRUE(retiming_lags(n, r).has_value());
  const auto report = compare_with_functional(m, r, random_inputs(3, 100, 1));
  EXPECT_TRUE(report.equivalent()) << report.to_string();
}

}  // namespace
}  // namespace sshdl
