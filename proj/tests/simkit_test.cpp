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

#include "sshdl/simkit.hpp"

#include <cmath>

#include <gtest/gtest.h>

#include "sshdl/errors.hpp"
#include "sshdl/kernels.hpp"
#include "sshdl/nn.hpp"

namespace sshdl {
namespace {

const FixedPointFormat kAcc{16, 12};
const FixedPointFormat kOut{16, 14};

NNSpec zero_nn() {
  NNSpec nn = random_nn(3, 4, 4, 2, 1);
  std::fill(nn.input_weights.data.begin(), nn.input_weights.data.end(), 0.0);
  for (Matrix& w : nn.hidden_weights) std::fill(w.data.begin(), w.data.end(), 0.0);
  for (auto& b : nn.biases) std::fill(b.begin(), b.end(), 0.0);
  std::fill(nn.output_weights.data.begin(), nn.output_weights.data.end(), 0.0);
  return nn;
}

TEST(Lut, ZeroAndTopEntries) {
  const LutRom lut = gen_activation_lut(ActivationKind::kTanh, kAcc, kOut, 10);
  EXPECT_EQ(lut.size(), 1024u);
  EXPECT_EQ(lut.entries.size(), 1024u);
  EXPECT_EQ(lut.address(0), 512u);
  EXPECT_EQ(lut.entry(512), 0);
  EXPECT_DOUBLE_EQ(lut.bin_input(1023), 3.9921875);
  EXPECT_EQ(lut.entry(1023), quantize(std::tanh(3.9921875), kOut).raw);
  EXPECT_EQ(lut.entry(1023), quantize(0.99932, kOut).raw);
}

TEST(Lut, EvalClampsAndBins) {
  const LutRom lut = gen_activation_lut(ActivationKind::kTanh, kAcc, kOut, 10);
  EXPECT_EQ(lut_eval(lut, FpValue{0, kAcc}).raw, 0);
  EXPECT_EQ(lut_eval(lut, quantize(7.5, kAcc)).raw, lut.entries.back());
  EXPECT_EQ(lut_eval(lut, quantize(-8.0, kAcc)).raw, lut.entries.front());
  // 1.0 sits at the left edge of bin (1 + 4) * 128 = 640.
  EXPECT_EQ(lut_eval(lut, quantize(1.0, kAcc)).raw, quantize(std::tanh(1.0), kOut).raw);
  // 1.005 lies inside the same bin.
  EXPECT_EQ(lut_eval(lut, quantize(1.005, kAcc)).raw, quantize(std::tanh(1.0), kOut).raw);
  // Negative values floor toward the lower bin.
  EXPECT_EQ(lut_eval(lut, quantize(-0.001, kAcc)).raw,
            quantize(std::tanh(-0.0078125), kOut).raw);
}

TEST(Lut, AddressMatchesFloorOracle) {
  const LutRom lut = gen_activation_lut(ActivationKind::kTanh, kAcc, kOut, 10);
  for (int raw = -32768; raw < 32768; raw += 7) {
    const double x = raw / 4096.0;
    const double bin = std::floor((x + 4.0) * 128.0);
    const std::uint64_t want = static_cast<std::uint64_t>(std::clamp(bin, 0.0, 1023.0));
    ASSERT_EQ(lut.address(raw), want) << raw;
  }
}

TEST(Lut, IdentityEntriesAreQuantizedInputs) {
  const LutRom lut = gen_activation_lut(ActivationKind::kIdentity, kAcc, kOut, 8, -2.0, 2.0);
  for (std::uint64_t a = 0; a < lut.size(); ++a) {
    EXPECT_EQ(lut.entry(a), quantize(lut.bin_input(a), kOut).raw);
  }
}

TEST(Lut, ErrorBound) {
  // Slope of tanh is at most 1, so a bin costs at most its width plus half
  // an output ulp.
  const LutRom lut = gen_activation_lut(ActivationKind::kTanh, FixedPointFormat{24, 18},
                                        FixedPointFormat{16, 14}, 10);
  double worst = 0;
  for (int i = 0; i < 100000; ++i) {
    const double x = -4.0 + 8.0 * i / 100000.0;
    const FpValue v = quantize(x, lut.in_fmt);
    worst = std::max(worst, std::abs(lut_eval(lut, v).real() - std::tanh(v.real())));
  }
  EXPECT_LE(worst, 8.0 / 1024 + std::ldexp(1.0, -15));
}

TEST(Lut, RejectsBadRanges) {
  EXPECT_THROW(gen_activation_lut(ActivationKind::kTanh, kAcc, kOut, 10, -3.0, 3.0),
               ValidationError);
  EXPECT_THROW(gen_activation_lut(ActivationKind::kTanh, kAcc, kOut, 10, 1.0, 1.0),
               ValidationError);
  EXPECT_THROW(gen_activation_lut(ActivationKind::kTanh, kAcc, kOut, 0), ValidationError);
  EXPECT_THROW(gen_activation_lut(ActivationKind::kTanh, FixedPointFormat{}, kOut, 4),
               ValidationError);
  EXPECT_THROW(gen_activation_lut(ActivationKind::kTanh, kAcc, kOut, 2, -4.1, 3.9),
               ValidationError);
}

TEST(Lut, FullResolutionIsLazyAndExact) {
  const FixedPointFormat wide{40, 36};
  const LutRom lut = full_resolution_lut(ActivationKind::kTanh, wide, wide);
  EXPECT_FALSE(lut.materialized());
  EXPECT_EQ(lut.addr_bits, 39);
  const FpValue x = quantize(0.123456789, wide);
  EXPECT_EQ(lut_eval(lut, x).raw, quantize(std::tanh(x.real()), wide).raw);
}

TEST(Reference, ZeroNetwork) {
  const StateSpaceModel m = build_state_space(zero_nn());
  for (double y : simulate_reference(m, {0.3, -0.2, 0.9})) EXPECT_EQ(y, 0.0);
}

TEST(Reference, LinearClosedForm) {
  // M = 1, identity activation: x1 = beta u + b0, x2 = w x1 + b1, y = c x2.
  NNSpec nn = random_nn(1, 2, 1, 1, 3);
  nn.activation = ActivationKind::kIdentity;
  nn.input_weights(0, 0) = 0.5;
  nn.hidden_weights[0](0, 0) = 1.0;
  nn.biases = {{0.25}, {-0.125}};
  nn.output_weights(0, 0) = 2.0;
  const auto y = simulate_reference(build_state_space(nn), {0.5});
  EXPECT_DOUBLE_EQ(y[0], 2.0 * (0.25 + 0.25 - 0.125));
}

TEST(Reference, RejectsWrongInputWidth) {
  EXPECT_THROW(simulate_reference(build_state_space(zero_nn()), {1.0}), ValidationError);
}

TEST(Fixed, ZeroNetworkIsZero) {
  const StateSpaceModel m = build_state_space(zero_nn());
  const FormatAssignment f = uniform_formats(8, 4);
  const LutRom lut = gen_activation_lut(ActivationKind::kTanh, f.accumulator, f.state, 8);
  for (const FpValue& y : simulate_fixed(m, {0.9, -0.9, 0.1}, f, lut)) EXPECT_EQ(y.raw, 0);
}

TEST(Fixed, MissingLutIsRejected) {
  const StateSpaceModel m = build_state_space(random_nn(3, 4, 4, 2, 7));
  const FormatAssignment f = uniform_formats(16, 12);
  EXPECT_THROW(simulate_fixed(m, {0, 0, 0}, f, std::nullopt), ValidationError);
  const LutRom wrong = gen_activation_lut(ActivationKind::kTanh, FixedPointFormat{16, 10},
                                          f.state, 8);
  EXPECT_THROW(simulate_fixed(m, {0, 0, 0}, f, wrong), ValidationError);
}

TEST(Fixed, WideFormatsConverge) {
  const NNSpec nn = random_nn(3, 4, 4, 2, 7);
  const StateSpaceModel m = build_state_space(nn);
  const FormatAssignment f = uniform_formats(64, 60);
  const FixedPointSimulator sim(m, f, full_resolution_lut(ActivationKind::kTanh, f.accumulator,
                                                          f.state));
  double worst = 0;
  for (const auto& u : random_inputs(3, 1000, 5)) {
    const auto ref = simulate_reference(m, u);
    const auto got = sim.run(u);
    for (std::size_t i = 0; i < ref.size(); ++i) {
      worst = std::max(worst, std::abs(got[i].real() - ref[i]));
    }
  }
  EXPECT_LT(worst, 1e-6);
}

TEST(Fixed, EightBitsDiffersFromReference) {
  const StateSpaceModel m = build_state_space(random_nn(3, 4, 4, 2, 7));
  const FormatAssignment f = uniform_formats(8, 4);
  const LutRom lut = gen_activation_lut(ActivationKind::kTanh, f.accumulator, f.state, 7);
  const FixedPointSimulator sim(m, f, lut);
  bool differs = false;
  for (const auto& u : random_inputs(3, 50, 5)) {
    const auto ref = simulate_reference(m, u);
    const auto got = sim.run(u);
    for (std::size_t i = 0; i < ref.size(); ++i) differs |= got[i].real() != ref[i];
  }
  EXPECT_TRUE(differs);
}

TEST(Fixed, Deterministic) {
  const StateSpaceModel m = build_state_space(random_nn(3, 4, 4, 2, 7));
  const FormatAssignment f = uniform_formats(12, 8);
  const LutRom lut = gen_activation_lut(ActivationKind::kTanh, f.accumulator, f.state, 10);
  for (const auto& u : random_inputs(3, 20, 9)) {
    EXPECT_EQ(simulate_fixed(m, u, f, lut), simulate_fixed(m, u, f, lut));
  }
}

TEST(Fixed, KernelChoiceDoesNotChangeResults) {
  if (!kernels::isa_supported(kernels::Isa::kAvx2)) GTEST_SKIP() << "host has no AVX2";
  const StateSpaceModel m = build_state_space(random_nn(5, 3, 11, 3, 4));
  for (int w : {8, 16, 24}) {
    const FormatAssignment f = uniform_formats(w, w - 4);
    const LutRom lut = gen_activation_lut(ActivationKind::kTanh, f.accumulator, f.state, 10);
    const FixedPointSimulator sim(m, f, lut);
    for (const auto& u : random_inputs(5, 30, 1)) {
      kernels::set_isa_override(kernels::Isa::kScalar);
      const auto a = sim.run(u);
      kernels::set_isa_override(kernels::Isa::kAvx2);
      const auto b = sim.run(u);
      ASSERT_EQ(a, b);
    }
  }
  kernels::set_isa_override(std::nullopt);
}

TEST(Fixed, WideAccumulatorPathAgreesWithNarrowArithmetic) {
  // 40-bit words push the hidden accumulator past 64 bits and 64-bit words
  // past 127, where the simulator sums in 256 bits.
  const NNSpec nn = random_nn(2, 2, 3, 1, 6);
  const StateSpaceModel m = build_state_space(nn);
  for (int w : {40, 64}) {
    const FormatAssignment f = uniform_formats(w, w - 4);
    const QuantizedNetwork q = quantize_network(extract_layered(m), f);
    const LutRom lut = full_resolution_lut(ActivationKind::kTanh, f.accumulator, f.state);
    const FixedPointSimulator sim(q, lut);
    for (const auto& u : random_inputs(2, 10, 3)) {
      std::vector<int128> bank(q.net.operand_width, 0);
      for (int j = 0; j < 2; ++j) bank[j] = quantize(u[j], f.input).raw;
      for (int k = 0; k < q.net.layers; ++k) {
        std::vector<int128> next(3);
        for (int i = 0; i < 3; ++i) {
          int256 acc = int256(q.biases[k][i]);
          for (int j = 0; j < q.net.operand_width; ++j) {
            acc += int256(q.weights[k][i * q.net.operand_width + j]) * int256(bank[j]);
          }
          const int128 a = rescale_raw(acc, 2 * f.state.frac_length, f.accumulator);
          next[i] = lut.entry(lut.address(a));
        }
        for (int i = 0; i < 3; ++i) bank[i] = next[i];
      }
      bank.resize(3);
      EXPECT_EQ(sim.final_state(u), bank);
    }
  }
}

TEST(Snr, FrozenValues) {
  EXPECT_EQ(snr({{1.0, 2.0}}, {{1.0, 2.0}}), (std::vector<double>{kSnrSentinelDb, kSnrSentinelDb}));
  const auto db = snr({{1.0, 1.0}, {0.0, 1.0}}, {{0.9, 1.0}, {0.0, 1.0}});
  EXPECT_NEAR(db[0], 20.0, 1e-9);
  EXPECT_EQ(db[1], kSnrSentinelDb);
  EXPECT_THROW(snr({{0.0}}, {{1.0}}), ValidationError);
  EXPECT_THROW(snr({}, {}), ValidationError);
}

TEST(BitSweep, ShapeAndMonotoneTrend) {
  const StateSpaceModel m = build_state_space(random_nn(3, 4, 4, 2, 7));
  const auto inputs = random_inputs(3, 200, 11);
  const SnrReport r = bit_sweep(m, inputs, {8, 12, 16, 24, 32, 64}, {}, 11);
  ASSERT_EQ(r.rows.size(), 6u);
  EXPECT_EQ(r.samples, 200u);
  EXPECT_EQ(r.seed, 11u);
  for (std::size_t i = 1; i < r.rows.size(); ++i) EXPECT_GT(r.mean_db(i), r.mean_db(i - 1));
  EXPECT_GT(r.mean_db(3), 40.0);
  EXPECT_LT(r.mean_db(3), 140.0);
  const std::string csv = r.to_csv();
  EXPECT_EQ(csv.rfind("bits,output_index,snr_db\n", 0), 0u);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 13);
}

TEST(BitSweep, ExactNetworkHitsSentinel) {
  // Identity activation with dyadic weights is exact at 16 bits.
  NNSpec nn = random_nn(2, 2, 2, 1, 1);
  nn.activation = ActivationKind::kIdentity;
  for (double& v : nn.input_weights.data) v = 0.5;
  for (Matrix& w : nn.hidden_weights) std::fill(w.data.begin(), w.data.end(), 0.25);
  for (auto& b : nn.biases) std::fill(b.begin(), b.end(), 0.125);
  for (double& v : nn.output_weights.data) v = 1.0;
  const std::vector<std::vector<double>> inputs = {{0.5, -0.25}, {0.75, 0.125}};
  const SnrReport r = bit_sweep(build_state_space(nn), inputs, {16});
  EXPECT_EQ(r.rows[0].snr_db[0], kSnrSentinelDb);
}

TEST(RandomInputs, Deterministic) {
  EXPECT_EQ(random_inputs(3, 10, 4), random_inputs(3, 10, 4));
  EXPECT_NE(random_inputs(3, 10, 4), random_inputs(3, 10, 5));
}

}  // namespace
}  // namespace sshdl
