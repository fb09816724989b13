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

#ifndef SSHDL_SIMKIT_HPP_
#define SSHDL_SIMKIT_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sshdl/fixed_point.hpp"
#include "sshdl/model.hpp"

namespace sshdl {

// Activation table over [lo, hi) split into 2^addr_bits uniform bins. The
// span must be a power of two and lo a whole number of bins, so addresses
// are a shift and an offset of the input raw value.
struct LutRom {
  ActivationKind kind = ActivationKind::kTanh;
  double lo = -4.0;
  double hi = 4.0;
  int addr_bits = 10;
  FixedPointFormat in_fmt;
  FixedPointFormat out_fmt;
  int span_log2 = 3;
  std::int64_t lo_bins = 0;  // lo / bin width
  // Materialized entries; empty for tables too large to store, which then
  // compute each entry on demand.
  std::vector<int128> entries;

  std::uint64_t size() const { return std::uint64_t{1} << addr_bits; }
  bool materialized() const { return !entries.empty(); }
  // Left edge of bin a.
  double bin_input(std::uint64_t a) const;
  int128 entry(std::uint64_t a) const;
  // Clamped floor-binned address of an in_fmt raw value.
  std::uint64_t address(int128 raw) const;
};

inline constexpr int kMaxMaterializedAddrBits = 20;

// Throws ValidationError for a degenerate or unaligned range, addr_bits
// outside [1, 63] or invalid formats.
LutRom gen_activation_lut(ActivationKind kind, const FixedPointFormat& in_fmt,
                          const FixedPointFormat& out_fmt, int addr_bits = 10,
                          double lo = -4.0, double hi = 4.0);

// One bin per in_fmt ulp, so every entry is the quantized activation of
// the exact input value.
LutRom full_resolution_lut(ActivationKind kind, const FixedPointFormat& in_fmt,
                           const FixedPointFormat& out_fmt, double lo = -4.0,
                           double hi = 4.0);

// Converts x to the table's input format first when its format differs.
FpValue lut_eval(const LutRom& lut, const FpValue& x);

std::vector<double> simulate_reference(const StateSpaceModel& m,
                                       const std::vector<double>& u);

// Formats for each edge class of the layered datapath. accumulator is the
// narrowed pre-activation format (the activation table's input format); the
// raw accumulator register keeps every product bit.
struct FormatAssignment {
  FixedPointFormat input;
  FixedPointFormat weight;
  FixedPointFormat accumulator;
  FixedPointFormat state;
  FixedPointFormat output;
  std::optional<FixedPointFormat> bias;
  std::optional<FixedPointFormat> output_weight;

  FixedPointFormat bias_format() const { return bias.value_or(weight); }
  FixedPointFormat output_weight_format() const {
    return output_weight.value_or(weight);
  }
};

FormatAssignment uniform_formats(int word_length, int frac_length);

// Widths of the exact accumulators for an operand bank of K words.
int hidden_accumulator_width(const FormatAssignment& f, int operand_width);
int output_accumulator_width(const FormatAssignment& f, int nodes);
// Left shift that aligns a bias raw value with the product scale.
int bias_shift(const FormatAssignment& f);

// Raw quantized parameters of a layered network, shared with the elaborator.
struct QuantizedNetwork {
  LayeredNetwork net;
  FormatAssignment formats;
  std::vector<std::vector<std::int64_t>> weights;  // [k][i*K + j]
  std::vector<std::vector<int128>> biases;         // [k][i], pre-shifted
  std::vector<std::int64_t> output_weights;        // [i*M + j]
  int accumulator_width = 0;
  int output_accumulator_width = 0;
};

// Throws ValidationError on missing formats (word 0) or datapath and
// parameter words wider than 64 bits. Accumulators may exceed 127 bits; the
// simulator then sums in 256 bits.
QuantizedNetwork quantize_network(const LayeredNetwork& net,
                                  const FormatAssignment& f);

// Bit-accurate model of the elaborated datapath.
class FixedPointSimulator {
 public:
  // hidden_lut is required for a tanh hidden activation, end_lut for a tanh
  // output activation; each must read the accumulator format and produce
  // the state (resp. output) format.
  FixedPointSimulator(const StateSpaceModel& m, const FormatAssignment& f,
                      std::optional<LutRom> hidden_lut,
                      std::optional<LutRom> end_lut = std::nullopt);
  FixedPointSimulator(QuantizedNetwork q, std::optional<LutRom> hidden_lut,
                      std::optional<LutRom> end_lut = std::nullopt);

  std::vector<FpValue> run(const std::vector<double>& u) const;
  // Final state bank (state format raws) after the N updates.
  std::vector<int128> final_state(const std::vector<double>& u) const;
  const QuantizedNetwork& network() const { return q_; }

 private:
  void check_luts() const;
  std::vector<int128> layers(const std::vector<double>& u) const;

  QuantizedNetwork q_;
  std::optional<LutRom> hidden_lut_;
  std::optional<LutRom> end_lut_;
  bool narrow_hidden_ = false;
  bool narrow_output_ = false;
};

std::vector<FpValue> simulate_fixed(const StateSpaceModel& m,
                                    const std::vector<double>& u,
                                    const FormatAssignment& f,
                                    const std::optional<LutRom>& lut,
                                    const std::optional<LutRom>& end_lut =
                                        std::nullopt);

inline constexpr double kSnrSentinelDb = 300.0;

// Per-output 10*log10(sum ref^2 / sum (ref - test)^2) over the samples
// (outer index). Zero error energy gives the sentinel; zero reference
// energy throws ValidationError.
std::vector<double> snr(const std::vector<std::vector<double>>& ref,
                        const std::vector<std::vector<double>>& test);

struct SweepOptions {
  int integer_bits = 4;  // frac_length = word_length - integer_bits
  // 0 selects a full-resolution activation table.
  int addr_bits = 0;
  double lut_lo = -4.0;
  double lut_hi = 4.0;
};

struct SnrRow {
  int bits = 0;
  std::vector<double> snr_db;  // one per output
};

struct SnrReport {
  std::string model;
  std::uint64_t seed = 0;
  std::size_t samples = 0;
  std::vector<SnrRow> rows;

  std::string to_csv() const;
  double mean_db(std::size_t row) const;
};

SnrReport bit_sweep(const StateSpaceModel& m,
                    const std::vector<std::vector<double>>& inputs,
                    const std::vector<int>& widths,
                    const SweepOptions& opts = {}, std::uint64_t seed = 0);

// count input vectors of length dim, uniform in [-1, 1).
std::vector<std::vector<double>> random_inputs(int dim, std::size_t count,
                                               std::uint64_t seed);

}  // namespace sshdl

#endif  // SSHDL_SIMKIT_HPP_
