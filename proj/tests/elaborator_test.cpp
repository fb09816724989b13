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

#include "sshdl/elaborator.hpp"

#include <random>

#include <gtest/gtest.h>

#include "sshdl/errors.hpp"
#include "sshdl/nn.hpp"
#include "sshdl/rtl_sim.hpp"

namespace sshdl {
namespace {

StateSpaceModel fig5(std::uint64_t seed = 7) { return build_state_space(random_nn(3, 4, 4, 2, seed)); }

int output_of(const Netlist& n, std::string_view name, const std::vector<int128>& out) {
  return static_cast<int>(out[n.output_index(name)]);
}

// Cycles from the data_valid_in pulse to data_valid_out, measured by
// simulation.
int measured_latency(const Netlist& n, const std::vector<double>& u) {
  const std::vector<TimedInput> stim = layered_stimulus(n, {u});
  RtlSimulator sim(n);
  const int dvo = n.output_index("data_valid_out");
  for (int c = 0; c < 10000; ++c) {
    const std::vector<int128> idle(n.inputs().size(), 0);
    const auto out = sim.step(c == 0 ? stim[0].values : idle);
    if (out[dvo] != 0) return c;
  }
  return -1;
}

TEST(Controller, SequenceForOneSample) {
  const ControllerFsm fsm(2, 3);
  ControllerState s = fsm.initial();
  std::vector<Phase> seen;
  s = fsm.next(s, true, false);
  for (int c = 0; c < fsm.latency(); ++c) {
    seen.push_back(s.phase);
    s = fsm.next(s, false, false);
  }
  const std::vector<Phase> want = {
      Phase::kLoad,    Phase::kMacc, Phase::kMacc, Phase::kMacc,     Phase::kRequant,
      Phase::kActivate, Phase::kMacc, Phase::kMacc, Phase::kMacc,    Phase::kRequant,
      Phase::kActivate, Phase::kOut};
  EXPECT_EQ(seen, want);
  EXPECT_EQ(s.phase, Phase::kIdle);
  EXPECT_EQ(fsm.latency(), 12);
}

TEST(Controller, LatencyFormulaValues) {
  EXPECT_EQ(latency_formula(4, 1), 14);
  EXPECT_EQ(latency_formula(1, 1), 5);
  EXPECT_EQ(latency_formula(4, 4), 26);
  EXPECT_EQ(latency_formula(4, 1, 2), 22);
  EXPECT_EQ(ControllerFsm(4, 1).latency(), latency_formula(4, 1));
  // Four layers of (macc, requantize, activate).
  EXPECT_EQ(ControllerFsm(4, 1).cycles_per_layer() * 4, 12);
}

TEST(Controller, ResetFromEveryState) {
  const ControllerFsm fsm(3, 2, 1);
  const auto states = fsm.reachable_states();
  EXPECT_GE(states.size(), 1u + 1 + 3 * (3 + 2) + 1);
  for (const ControllerState& s : states) {
    EXPECT_EQ(fsm.next(s, true, true), fsm.initial());
    EXPECT_EQ(fsm.next(s, false, true), fsm.initial());
  }
}

TEST(Controller, AcceptsBackToBackSamples) {
  const ControllerFsm fsm(1, 1);
  ControllerState s{Phase::kOut, 0, 0};
  EXPECT_EQ(fsm.next(s, true, false).phase, Phase::kLoad);
  EXPECT_EQ(fsm.next(s, false, false).phase, Phase::kIdle);
  s.phase = Phase::kMacc;
  EXPECT_EQ(fsm.next(s, true, false).phase, Phase::kRequant);
}

TEST(Controller, OutputsFollowStages) {
  const ControllerFsm fsm(2, 2, 2);
  EXPECT_TRUE(fsm.outputs({Phase::kMacc, 0, 2}).first);
  EXPECT_FALSE(fsm.outputs({Phase::kMacc, 0, 0}).first);
  EXPECT_FALSE(fsm.outputs({Phase::kMacc, 0, 1}).enable);
  EXPECT_TRUE(fsm.outputs({Phase::kMacc, 0, 3}).enable);
  EXPECT_TRUE(fsm.outputs({Phase::kOut, 1, 0}).valid_out);
  EXPECT_TRUE(fsm.outputs({Phase::kLoad, 0, 0}).load);
  EXPECT_TRUE(fsm.outputs({Phase::kActivate, 0, 0}).activate);
}

TEST(Controller, RejectsDegenerateShapes) {
  EXPECT_THROW(ControllerFsm(0, 1), ValidationError);
  EXPECT_THROW(ControllerFsm(1, 0), ValidationError);
  EXPECT_THROW(ControllerFsm(1, 1, -1), ValidationError);
}

TEST(Controller, NetlistMatchesFsm) {
  std::mt19937_64 rng(1);
  for (auto [layers, cycles, stages] : {std::tuple{1, 1, 0}, std::tuple{4, 1, 0},
                                        std::tuple{3, 4, 0}, std::tuple{5, 3, 2},
                                        std::tuple{8, 2, 1}}) {
    const ControllerFsm fsm(layers, cycles, stages);
    const Netlist n = controller_netlist(fsm);
    EXPECT_TRUE(controller_is_moore(n));
    RtlSimulator sim(n);
    ControllerState s = fsm.initial();
    for (int c = 0; c < 500; ++c) {
      const bool dvi = rng() % 3 == 0;
      const bool rst = rng() % 97 == 0;
      const int128 in[] = {dvi};
      const auto out = sim.step(in, rst);
      const ControllerOutputs o = fsm.outputs(s);
      ASSERT_EQ(output_of(n, "phase", out), static_cast<int>(s.phase)) << c;
      ASSERT_EQ(output_of(n, "layer", out), s.layer);
      ASSERT_EQ(output_of(n, "cycle", out), s.cycle);
      ASSERT_EQ(output_of(n, "first", out), o.first);
      ASSERT_EQ(output_of(n, "enable", out), o.enable);
      ASSERT_EQ(output_of(n, "load", out), o.load);
      ASSERT_EQ(output_of(n, "activate", out), o.activate);
      ASSERT_EQ(output_of(n, "valid_out", out), o.valid_out);
      s = fsm.next(s, dvi, rst);
    }
  }
}

TEST(Macc, ClearThenAccumulate) {
  const FixedPointFormat q{8, 4};
  const Netlist n = macc_netlist(q, q, 20);
  RtlSimulator sim(n);
  const int128 first[] = {5, -7, 1, 1};
  const int128 more[] = {3, 3, 0, 1};
  const int128 hold[] = {100, 100, 0, 0};
  sim.step(first);
  EXPECT_EQ(sim.step(more)[0], -35);
  EXPECT_EQ(sim.step(hold)[0], -26);
  EXPECT_EQ(sim.step(hold)[0], -26);
}

TEST(Macc, PipelinedProductArrivesLater) {
  const FixedPointFormat q{8, 4};
  const Netlist n = macc_netlist(q, q, 20, 2);
  RtlSimulator sim(n);
  const int128 feed[] = {5, -7, 0, 0};
  const int128 first[] = {0, 0, 1, 1};
  sim.step(feed);
  sim.step(feed);
  EXPECT_EQ(sim.step(first)[0], 0);
  EXPECT_EQ(sim.step(feed)[0], -35);
}

TEST(Elaborate, MaccCyclesPerLayer) {
  const FormatAssignment f = uniform_formats(16, 12);
  const Netlist full = elaborate(fig5(), {}, f);
  EXPECT_EQ(full.info.macc_cycles, 1);
  EXPECT_EQ(full.info.multipliers_per_node, 4);
  EXPECT_EQ(latency(full), 14);
  const Netlist serial = elaborate(fig5(), Schedule{1, 0, 0}, f);
  EXPECT_EQ(serial.info.macc_cycles, 4);
  EXPECT_EQ(latency(serial), 1 + 4 * 6 + 1);
  const Netlist one = elaborate(build_state_space(random_nn(3, 1, 4, 2, 1)), {}, f);
  EXPECT_EQ(latency(one), 5);
}

TEST(Elaborate, MultiplierCount) {
  const FormatAssignment f = uniform_formats(16, 12);
  for (int p : {1, 2, 4}) {
    const Netlist n = elaborate(fig5(), Schedule{p, 0, 0}, f);
    std::size_t macc = 0, other = 0;
    for (const NetNode& node : n.nodes()) {
      if (node.op != Op::kMul) continue;
      (node.cell == Cell::kMacc ? macc : other) += 1;
    }
    EXPECT_EQ(macc, static_cast<std::size_t>(4 * p));
    EXPECT_EQ(other, 8u);  // P x M output coefficients
  }
}

TEST(Elaborate, ScheduleErrors) {
  const FormatAssignment f = uniform_formats(16, 12);
  EXPECT_THROW(elaborate(fig5(), Schedule{5, 0, 0}, f), ScheduleError);
  EXPECT_THROW(elaborate(fig5(), Schedule{-1, 0, 0}, f), ScheduleError);
  EXPECT_THROW(elaborate(fig5(), Schedule{4, 13, 0}, f), ScheduleError);
  EXPECT_NO_THROW(elaborate(fig5(), Schedule{4, 14, 0}, f));
  try {
    elaborate(fig5(), Schedule{4, 13, 0}, f);
  } catch (const ScheduleError& e) {
    EXPECT_EQ(e.exit_code(), 2);
  }
  EXPECT_THROW(elaborate(fig5(), {}, uniform_formats(64, 60)), ValidationError);
  EXPECT_THROW(elaborate(fig5(), {}, f, ActivationTableConfig{21, -4, 4}), ValidationError);
}

TEST(Elaborate, ControllerIsMoore) {
  EXPECT_TRUE(controller_is_moore(elaborate(fig5(), {}, uniform_formats(16, 12))));
}

TEST(Elaborate, MeasuredLatencyMatchesFormula) {
  for (int N : {1, 2, 4}) {
    for (int p : {1, 2, 4}) {
      for (int stages : {0, 1, 3}) {
        const StateSpaceModel m = build_state_space(random_nn(3, N, 4, 2, N + p));
        const Netlist n = elaborate(m, Schedule{p, 0, stages}, uniform_formats(12, 8));
        const int want = latency_formula(N, (4 + p - 1) / p, stages);
        EXPECT_EQ(latency(n), want);
        EXPECT_EQ(measured_latency(n, {0.1, 0.2, 0.3}), want);
      }
    }
  }
}

struct Variant {
  int L, N, M, P;
  int p, stages, ratio, word, frac, addr_bits;
  bool end_tanh, hidden_identity;
};

TEST(Elaborate, EquivalentAcrossVariants) {
  const Variant variants[] = {
      {3, 4, 4, 2, 4, 0, 0, 16, 12, 10, false, false},
      {3, 4, 4, 2, 1, 0, 0, 8, 4, 6, false, false},
      {3, 4, 4, 2, 3, 2, 0, 12, 8, 8, true, false},
      {6, 3, 3, 1, 2, 0, 20, 10, 6, 7, false, false},
      {2, 2, 5, 3, 5, 1, 0, 24, 20, 10, true, false},
      {3, 3, 4, 2, 2, 0, 0, 16, 12, 10, false, true},
      {1, 1, 1, 1, 1, 0, 0, 32, 28, 12, true, false},
  };
  std::uint64_t seed = 1;
  for (const Variant& v : variants) {
    NNSpec nn = random_nn(v.L, v.N, v.M, v.P, seed++);
    if (v.end_tanh) nn.output_activation = ActivationKind::kTanh;
    if (v.hidden_identity) nn.activation = ActivationKind::kIdentity;
    const StateSpaceModel m = build_state_space(nn);
    const Netlist n = elaborate(m, Schedule{v.p, v.ratio, v.stages},
                                uniform_formats(v.word, v.frac),
                                ActivationTableConfig{v.addr_bits, -4, 4});
    const auto report = compare_with_functional(m, n, random_inputs(v.L, 200, seed));
    EXPECT_TRUE(report.equivalent()) << report.to_string();
    EXPECT_EQ(n.info.hidden_lut >= 0, !v.hidden_identity);
    EXPECT_EQ(n.info.end_lut >= 0, v.end_tanh);
  }
}

TEST(Elaborate, MixedFormatsStayEquivalent) {
  FormatAssignment f;
  f.input = {10, 8};
  f.weight = {12, 10};
  f.state = {14, 12};
  f.accumulator = {16, 11};
  f.output = {18, 12};
  f.bias = FixedPointFormat{9, 6};
  f.output_weight = FixedPointFormat{7, 5};
  const StateSpaceModel m = fig5(3);
  const Netlist n = elaborate(m, Schedule{2, 0, 1}, f);
  const auto report = compare_with_functional(m, n, random_inputs(3, 300, 4));
  EXPECT_TRUE(report.equivalent()) << report.to_string();
}

TEST(Elaborate, CorruptedRomIsLocated) {
  const StateSpaceModel m = fig5();
  Netlist n = elaborate(m, {}, uniform_formats(16, 12));
  const auto inputs = random_inputs(3, 200, 2);
  const FixedPointSimulator fn = functional_model(m, n);
  ASSERT_TRUE(compare_with_functional(fn, n, inputs).equivalent());
  // Flip every activation entry near zero so any sample passes through one.
  for (RomTable& rom : n.roms()) {
    if (rom.name != "activation") continue;
    for (std::size_t a = 0; a < rom.data.size(); ++a) rom.data[a] ^= 1;
  }
  const auto report = compare_with_functional(fn, n, inputs);
  ASSERT_FALSE(report.equivalent());
  EXPECT_EQ(report.first_divergence->sample, 0u);
  EXPECT_GE(report.first_divergence->output_index, 0);
  EXPECT_NE(report.to_string().find("divergence at sample 0"), std::string::npos);
}

TEST(Elaborate, StreamsOneThousandSamples) {
  const StateSpaceModel m = fig5();
  const Netlist n = elaborate(m, {}, uniform_formats(16, 12));
  const auto inputs = random_inputs(3, 1000, 8);
  const Trace t = run(n, layered_stimulus(n, inputs), 1'000'000, latency(n) + 1);
  const int dvo = n.output_index("data_valid_out");
  std::size_t pulses = 0;
  for (const auto& c : t.cycles) pulses += c[dvo] != 0;
  EXPECT_EQ(pulses, 1000u);
  EXPECT_EQ(run_layered(n, inputs).size(), 1000u);
}

TEST(Elaborate, Deterministic) {
  const Netlist a = elaborate(fig5(), Schedule{2, 0, 1}, uniform_formats(12, 8));
  const Netlist b = elaborate(fig5(), Schedule{2, 0, 1}, uniform_formats(12, 8));
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t v = 0; v < a.size(); ++v) {
    EXPECT_EQ(a.node(static_cast<int>(v)).name, b.node(static_cast<int>(v)).name);
    EXPECT_EQ(a.node(static_cast<int>(v)).in, b.node(static_cast<int>(v)).in);
  }
}

}  // namespace
}  // namespace sshdl
