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

#include <fmt/format.h>

#include "sshdl/errors.hpp"
#include "sshdl/kernels.hpp"
#include "sshdl/nn.hpp"

namespace sshdl {

double LutRom::bin_input(std::uint64_t a) const {
  const int128 bins = int128(a) + lo_bins;
  return std::ldexp(static_cast<double>(bins), span_log2 - addr_bits);
}

int128 LutRom::entry(std::uint64_t a) const {
  if (materialized()) return entries.at(a);
  return quantize(apply_activation(kind, bin_input(a)), out_fmt).raw;
}

std::uint64_t LutRom::address(int128 raw) const {
  // floor(x / bin) where x = raw * 2^-n and bin = 2^(span_log2 - addr_bits).
  const int d = addr_bits - span_log2 - in_fmt.frac_length;
  int128 bins;
  if (d >= 0) {
    const int128 limit = int128{1} << (126 - d);
    if (raw >= limit) return size() - 1;
    if (raw <= -limit) return 0;
    bins = raw << d;
  } else if (-d >= 127) {
    bins = raw < 0 ? -1 : 0;
  } else {
    bins = raw >> -d;  // arithmetic shift: floor
  }
  const int128 a = bins - lo_bins;
  if (a < 0) return 0;
  if (a >= int128(size())) return size() - 1;
  return static_cast<std::uint64_t>(a);
}

LutRom gen_activation_lut(ActivationKind kind, const FixedPointFormat& in_fmt,
                          const FixedPointFormat& out_fmt, int addr_bits,
                          double lo, double hi) {
  if (!in_fmt.valid() || !out_fmt.valid()) {
    throw ValidationError(fmt::format("activation table formats invalid: {} -> {}",
                                      in_fmt.to_string(), out_fmt.to_string()));
  }
  if (addr_bits < 1 || addr_bits > 63) {
    throw ValidationError(fmt::format("activation table address width {} outside [1, 63]",
                                      addr_bits));
  }
  if (!(lo < hi) || !std::isfinite(lo) || !std::isfinite(hi)) {
    throw ValidationError(fmt::format("degenerate activation table range [{}, {})", lo, hi));
  }
  int exp = 0;
  const double mant = std::frexp(hi - lo, &exp);
  if (mant != 0.5) {
    throw ValidationError(fmt::format(
        "activation table span {} is not a power of two", hi - lo));
  }
  LutRom lut;
  lut.kind = kind;
  lut.lo = lo;
  lut.hi = hi;
  lut.addr_bits = addr_bits;
  lut.in_fmt = in_fmt;
  lut.out_fmt = out_fmt;
  lut.span_log2 = exp - 1;
  const double lo_bins = std::ldexp(lo, addr_bits - lut.span_log2);
  if (lo_bins != std::floor(lo_bins) || std::fabs(lo_bins) >= 0x1p63) {
    throw ValidationError(fmt::format(
        "activation table lower bound {} is not a whole number of bins", lo));
  }
  lut.lo_bins = static_cast<std::int64_t>(lo_bins);
  if (addr_bits <= kMaxMaterializedAddrBits) {
    lut.entries.resize(lut.size());
    for (std::uint64_t a = 0; a < lut.size(); ++a) {
      lut.entries[a] = quantize(apply_activation(kind, lut.bin_input(a)), out_fmt).raw;
    }
  }
  return lut;
}

LutRom full_resolution_lut(ActivationKind kind, const FixedPointFormat& in_fmt,
                           const FixedPointFormat& out_fmt, double lo,
                           double hi) {
  int exp = 0;
  std::frexp(hi - lo, &exp);
  return gen_activation_lut(kind, in_fmt, out_fmt, exp - 1 + in_fmt.frac_length,
                            lo, hi);
}

FpValue lut_eval(const LutRom& lut, const FpValue& x) {
  const int128 raw =
      x.format == lut.in_fmt ? x.raw : requantize(x, lut.in_fmt).raw;
  return FpValue{lut.entry(lut.address(raw)), lut.out_fmt};
}

std::vector<double> simulate_reference(const StateSpaceModel& m,
                                       const std::vector<double>& u) {
  if (static_cast<int>(u.size()) != m.input_dim) {
    throw ValidationError(fmt::format("input has {} entries, model expects {}",
                                      u.size(), m.input_dim));
  }
  GraphEvaluator update(m, m.update_graph);
  GraphEvaluator output(m, m.output_graph);
  std::vector<double> x = m.initial_state;
  for (int k = 0; k < m.horizon; ++k) x = update.evaluate(x, u, k);
  return output.evaluate(x, u, m.horizon);
}

FormatAssignment uniform_formats(int word_length, int frac_length) {
  const FixedPointFormat f = make_format(word_length, frac_length);
  return FormatAssignment{f, f, f, f, f, std::nullopt, std::nullopt};
}

int bias_shift(const FormatAssignment& f) {
  return f.state.frac_length + f.weight.frac_length - f.bias_format().frac_length;
}

int hidden_accumulator_width(const FormatAssignment& f, int operand_width) {
  const int product = f.state.word_length + f.weight.word_length;
  const int bias = f.bias_format().word_length + bias_shift(f);
  return std::max(product, bias) + ceil_log2(operand_width + 1);
}

int output_accumulator_width(const FormatAssignment& f, int nodes) {
  return f.state.word_length + f.output_weight_format().word_length +
         ceil_log2(nodes + 1);
}

namespace {

void require_format(const FixedPointFormat& f, const char* name) {
  if (f.word_length == 0) {
    throw ValidationError(fmt::format("missing format assignment for '{}'", name));
  }
  if (!f.valid()) {
    throw ValidationError(fmt::format("format for '{}' is invalid: {}", name,
                                      f.to_string()));
  }
}

std::int64_t quantize_param(double v, const FixedPointFormat& f) {
  return static_cast<std::int64_t>(quantize(v, f).raw);
}

}  // namespace

QuantizedNetwork quantize_network(const LayeredNetwork& net,
                                  const FormatAssignment& f) {
  require_format(f.input, "input");
  require_format(f.weight, "weight");
  require_format(f.accumulator, "accumulator");
  require_format(f.state, "state");
  require_format(f.output, "output");
  require_format(f.bias_format(), "bias");
  require_format(f.output_weight_format(), "output_weight");
  for (const FixedPointFormat* p : {&f.weight, &f.state, &f.input}) {
    if (p->word_length > 64) {
      throw ValidationError(fmt::format(
          "datapath word {} exceeds 64 bits", p->to_string()));
    }
  }
  if (f.output_weight_format().word_length > 64 || f.bias_format().word_length > 64) {
    throw ValidationError("parameter words wider than 64 bits are not supported");
  }
  if (bias_shift(f) < 0) {
    throw ValidationError(fmt::format(
        "bias format {} has more fractional bits than the product scale",
        f.bias_format().to_string()));
  }
  QuantizedNetwork q;
  q.net = net;
  q.formats = f;
  q.accumulator_width = hidden_accumulator_width(f, net.operand_width);
  q.output_accumulator_width = output_accumulator_width(f, net.nodes);
  if (f.bias_format().word_length + bias_shift(f) > kMaxWordLength) {
    throw ValidationError("aligned bias exceeds 127 bits");
  }
  const int shift = bias_shift(f);
  for (int k = 0; k < net.layers; ++k) {
    std::vector<std::int64_t> w;
    w.reserve(net.weights[k].data.size());
    for (double v : net.weights[k].data) w.push_back(quantize_param(v, f.weight));
    q.weights.push_back(std::move(w));
    std::vector<int128> b;
    for (double v : net.biases[k]) {
      b.push_back(quantize(v, f.bias_format()).raw << shift);
    }
    q.biases.push_back(std::move(b));
  }
  for (double v : net.output_weights.data) {
    q.output_weights.push_back(quantize_param(v, f.output_weight_format()));
  }
  return q;
}

FixedPointSimulator::FixedPointSimulator(const StateSpaceModel& m,
                                         const FormatAssignment& f,
                                         std::optional<LutRom> hidden_lut,
                                         std::optional<LutRom> end_lut)
    : FixedPointSimulator(quantize_network(extract_layered(m), f),
                          std::move(hidden_lut), std::move(end_lut)) {}

FixedPointSimulator::FixedPointSimulator(QuantizedNetwork q,
                                         std::optional<LutRom> hidden_lut,
                                         std::optional<LutRom> end_lut)
    : q_(std::move(q)),
      hidden_lut_(std::move(hidden_lut)),
      end_lut_(std::move(end_lut)) {
  check_luts();
  const FormatAssignment& f = q_.formats;
  narrow_hidden_ = kernels::narrow_dot_exact(
      f.weight.word_length, f.state.word_length, q_.net.operand_width);
  narrow_output_ = kernels::narrow_dot_exact(
      f.output_weight_format().word_length, f.state.word_length, q_.net.nodes);
}

void FixedPointSimulator::check_luts() const {
  const FormatAssignment& f = q_.formats;
  auto check = [&](const std::optional<LutRom>& lut, ActivationKind kind,
                   const FixedPointFormat& out, const char* what) {
    if (kind == ActivationKind::kIdentity) return;
    if (!lut) {
      throw ValidationError(fmt::format("{} activation table missing", what));
    }
    if (lut->kind != kind) {
      throw ValidationError(fmt::format("{} activation table computes {}, network uses {}",
                                        what, activation_name(lut->kind),
                                        activation_name(kind)));
    }
    if (lut->in_fmt != f.accumulator) {
      throw ValidationError(fmt::format(
          "{} activation table reads {}, accumulator format is {}", what,
          lut->in_fmt.to_string(), f.accumulator.to_string()));
    }
    if (lut->out_fmt != out) {
      throw ValidationError(fmt::format(
          "{} activation table produces {}, expected {}", what,
          lut->out_fmt.to_string(), out.to_string()));
    }
  };
  check(hidden_lut_, q_.net.hidden_activation, f.state, "hidden");
  check(end_lut_, q_.net.output_activation, f.output, "output");
}

namespace {

// Exact sum of products of raw weights and raw operands.
int256 wide_dot(const std::int64_t* w, const std::vector<int128>& x,
                std::size_t n) {
  int256 acc = 0;
  for (std::size_t j = 0; j < n; ++j) acc += int256(int128(w[j]) * x[j]);
  return acc;
}

}  // namespace

std::vector<int128> FixedPointSimulator::layers(const std::vector<double>& u) const {
  const LayeredNetwork& net = q_.net;
  const FormatAssignment& f = q_.formats;
  if (static_cast<int>(u.size()) != net.inputs) {
    throw ValidationError(fmt::format("input has {} entries, network expects {}",
                                      u.size(), net.inputs));
  }
  const auto K = static_cast<std::size_t>(net.operand_width);
  const auto M = static_cast<std::size_t>(net.nodes);
  std::vector<int128> bank(K, 0);
  for (int j = 0; j < net.inputs; ++j) {
    bank[j] = rescale_raw(quantize(u[j], f.input).raw, f.input.frac_length, f.state);
  }
  const int product_frac = f.state.frac_length + f.weight.frac_length;
  const bool fits128 = q_.accumulator_width <= kMaxWordLength;
  std::vector<std::int64_t> narrow(K);
  std::vector<int128> next(M);
  for (int k = 0; k < net.layers; ++k) {
    const std::vector<std::int64_t>& w = q_.weights[k];
    if (narrow_hidden_) {
      for (std::size_t j = 0; j < K; ++j) narrow[j] = static_cast<std::int64_t>(bank[j]);
    }
    for (std::size_t i = 0; i < M; ++i) {
      int128 a;
      if (narrow_hidden_) {
        const int128 acc = q_.biases[k][i] +
                           kernels::dot_narrow({w.data() + i * K, K}, narrow);
        a = rescale_raw(acc, product_frac, f.accumulator);
      } else if (fits128) {
        int128 acc = q_.biases[k][i];
        for (std::size_t j = 0; j < K; ++j) acc += int128(w[i * K + j]) * bank[j];
        a = rescale_raw(acc, product_frac, f.accumulator);
      } else {
        const int256 acc = int256(q_.biases[k][i]) + wide_dot(w.data() + i * K, bank, K);
        a = rescale_raw(acc, product_frac, f.accumulator);
      }
      if (net.hidden_activation == ActivationKind::kIdentity) {
        next[i] = rescale_raw(a, f.accumulator.frac_length, f.state);
      } else {
        next[i] = hidden_lut_->entry(hidden_lut_->address(a));
      }
    }
    for (std::size_t i = 0; i < M; ++i) bank[i] = next[i];
  }
  return bank;
}

std::vector<int128> FixedPointSimulator::final_state(
    const std::vector<double>& u) const {
  std::vector<int128> bank = layers(u);
  bank.resize(q_.net.nodes);
  return bank;
}

std::vector<FpValue> FixedPointSimulator::run(const std::vector<double>& u) const {
  const std::vector<int128> bank = layers(u);
  const LayeredNetwork& net = q_.net;
  const FormatAssignment& f = q_.formats;
  const auto M = static_cast<std::size_t>(net.nodes);
  const int frac = f.state.frac_length + f.output_weight_format().frac_length;
  std::vector<std::int64_t> narrow;
  if (narrow_output_) {
    for (std::size_t j = 0; j < M; ++j) narrow.push_back(static_cast<std::int64_t>(bank[j]));
  }
  auto finish = [&](const auto& acc) -> int128 {
    if (net.output_activation == ActivationKind::kIdentity) {
      return rescale_raw(acc, frac, f.output);
    }
    return end_lut_->entry(end_lut_->address(rescale_raw(acc, frac, f.accumulator)));
  };
  std::vector<FpValue> y;
  for (int i = 0; i < net.outputs; ++i) {
    const std::int64_t* c = q_.output_weights.data() + i * M;
    int128 out;
    if (narrow_output_) {
      out = finish(int128(kernels::dot_narrow({c, M}, narrow)));
    } else if (q_.output_accumulator_width <= kMaxWordLength) {
      int128 acc = 0;
      for (std::size_t j = 0; j < M; ++j) acc += int128(c[j]) * bank[j];
      out = finish(acc);
    } else {
      out = finish(wide_dot(c, bank, M));
    }
    y.push_back(FpValue{out, f.output});
  }
  return y;
}

std::vector<FpValue> simulate_fixed(const StateSpaceModel& m,
                                    const std::vector<double>& u,
                                    const FormatAssignment& f,
                                    const std::optional<LutRom>& lut,
                                    const std::optional<LutRom>& end_lut) {
  return FixedPointSimulator(m, f, lut, end_lut).run(u);
}

std::vector<double> snr(const std::vector<std::vector<double>>& ref,
                        const std::vector<std::vector<double>>& test) {
  if (ref.empty() || ref.size() != test.size()) {
    throw ValidationError(fmt::format("snr needs equal nonempty series ({} vs {})",
                                      ref.size(), test.size()));
  }
  const std::size_t outputs = ref.front().size();
  std::vector<double> signal(outputs, 0.0), noise(outputs, 0.0);
  for (std::size_t s = 0; s < ref.size(); ++s) {
    if (ref[s].size() != outputs || test[s].size() != outputs) {
      throw ValidationError(fmt::format("snr sample {} has mismatched width", s));
    }
    for (std::size_t i = 0; i < outputs; ++i) {
      const double e = ref[s][i] - test[s][i];
      signal[i] += ref[s][i] * ref[s][i];
      noise[i] += e * e;
    }
  }
  std::vector<double> db(outputs);
  for (std::size_t i = 0; i < outputs; ++i) {
    if (signal[i] == 0.0) {
      throw ValidationError(fmt::format("output {} has zero reference energy", i));
    }
    db[i] = noise[i] == 0.0
                ? kSnrSentinelDb
                : std::min(kSnrSentinelDb, 10.0 * std::log10(signal[i] / noise[i]));
  }
  return db;
}

std::string SnrReport::to_csv() const {
  std::string out = "bits,output_index,snr_db\n";
  for (const SnrRow& row : rows) {
    for (std::size_t i = 0; i < row.snr_db.size(); ++i) {
      out += fmt::format("{},{},{:.6f}\n", row.bits, i, row.snr_db[i]);
    }
  }
  return out;
}

double SnrReport::mean_db(std::size_t row) const {
  const std::vector<double>& v = rows.at(row).snr_db;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

SnrReport bit_sweep(const StateSpaceModel& m,
                    const std::vector<std::vector<double>>& inputs,
                    const std::vector<int>& widths, const SweepOptions& opts,
                    std::uint64_t seed) {
  if (widths.empty()) throw ValidationError("bit sweep needs at least one width");
  if (inputs.empty()) throw ValidationError("bit sweep needs at least one sample");
  const LayeredNetwork net = extract_layered(m);
  std::vector<std::vector<double>> ref;
  ref.reserve(inputs.size());
  for (const auto& u : inputs) ref.push_back(simulate_reference(m, u));

  SnrReport report;
  report.model = m.name;
  report.seed = seed;
  report.samples = inputs.size();
  for (int w : widths) {
    const FormatAssignment f = uniform_formats(w, w - opts.integer_bits);
    auto make_lut = [&](ActivationKind kind,
                        const FixedPointFormat& out) -> std::optional<LutRom> {
      if (kind == ActivationKind::kIdentity) return std::nullopt;
      if (opts.addr_bits == 0) {
        return full_resolution_lut(kind, f.accumulator, out, opts.lut_lo, opts.lut_hi);
      }
      return gen_activation_lut(kind, f.accumulator, out, opts.addr_bits,
                                opts.lut_lo, opts.lut_hi);
    };
    const FixedPointSimulator sim(quantize_network(net, f),
                                  make_lut(net.hidden_activation, f.state),
                                  make_lut(net.output_activation, f.output));
    std::vector<std::vector<double>> test;
    test.reserve(inputs.size());
    for (const auto& u : inputs) {
      std::vector<double> y;
      for (const FpValue& v : sim.run(u)) y.push_back(v.real());
      test.push_back(std::move(y));
    }
    report.rows.push_back(SnrRow{w, snr(ref, test)});
  }
  return report;
}

std::vector<std::vector<double>> random_inputs(int dim, std::size_t count,
                                               std::uint64_t seed) {
  UniformSource src(seed);
  std::vector<std::vector<double>> out;
  out.reserve(count);
  for (std::size_t s = 0; s < count; ++s) out.push_back(src.vector(dim));
  return out;
}

}  // namespace sshdl
