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

#include "sshdl/rtl_sim.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "sshdl/errors.hpp"

namespace sshdl {

namespace {

std::string raw_string(int128 v) {
  if (v == 0) return "0";
  const bool neg = v < 0;
  uint128 mag = neg ? uint128(0) - uint128(v) : uint128(v);
  std::string s;
  while (mag != 0) {
    s.insert(s.begin(), static_cast<char>('0' + static_cast<int>(mag % 10)));
    mag /= 10;
  }
  return neg ? "-" + s : s;
}

}  // namespace

RtlSimulator::RtlSimulator(const Netlist& n, bool reverse_order) : n_(n) {
  int cycle = -1;
  auto order = comb_order(n, reverse_order, &cycle);
  if (!order) {
    throw ValidationError(fmt::format("combinational cycle through node {} ({})",
                                      cycle, n.node(cycle).name));
  }
  order_ = std::move(*order);
  offset_.resize(n.size() + 1);
  std::size_t total = 0;
  for (std::size_t v = 0; v < n.size(); ++v) {
    offset_[v] = total;
    total += n.node(static_cast<int>(v)).regs.size();
    for (int128 r : n.node(static_cast<int>(v)).regs) init_.push_back(r);
  }
  offset_[n.size()] = total;
  comb_.assign(n.size(), 0);
  reset();
}

void RtlSimulator::reset() {
  regs_ = init_;
  cycle_ = 0;
}

std::vector<int128> RtlSimulator::step(std::span<const int128> inputs, bool reset) {
  const std::vector<int>& in_nodes = n_.inputs();
  if (inputs.size() != in_nodes.size()) {
    throw ValidationError(fmt::format("step got {} inputs, netlist has {}",
                                      inputs.size(), in_nodes.size()));
  }
  for (std::size_t i = 0; i < in_nodes.size(); ++i) {
    const NetNode& node = n_.node(in_nodes[i]);
    comb_[in_nodes[i]] = normalize(inputs[i], node.width, node.is_signed);
  }
  for (int v : order_) {
    const NetNode& node = n_.node(v);
    if (node.op == Op::kInput) continue;
    operands_.clear();
    for (const Edge& e : node.in) operands_.push_back(tap(e));
    comb_[v] = eval_node(n_, node, operands_);
  }
  std::vector<int128> out;
  out.reserve(n_.outputs().size());
  for (const OutputPort& p : n_.outputs()) out.push_back(tap(p.edge));

  if (reset) {
    regs_ = init_;
  } else {
    for (std::size_t v = 0; v < n_.size(); ++v) {
      const std::size_t lo = offset_[v], hi = offset_[v + 1];
      if (lo == hi) continue;
      for (std::size_t r = hi - 1; r > lo; --r) regs_[r] = regs_[r - 1];
      regs_[lo] = comb_[v];
    }
  }
  ++cycle_;
  return out;
}

std::string Trace::to_csv() const {
  std::string out = "cycle,port,raw\n";
  for (std::size_t c = 0; c < cycles.size(); ++c) {
    for (std::size_t p = 0; p < ports.size(); ++p) {
      out += fmt::format("{},{},{}\n", c, ports[p], raw_string(cycles[c][p]));
    }
  }
  return out;
}

Trace run(const Netlist& n, const std::vector<TimedInput>& stimulus,
          std::uint64_t max_cycles, std::uint64_t drain) {
  if (max_cycles < 1) throw ValidationError("run needs max_cycles >= 1");
  std::uint64_t last = 0;
  for (const TimedInput& t : stimulus) last = std::max(last, t.cycle + 1);
  const std::uint64_t total = last + drain;
  if (total > max_cycles) {
    throw SimulationTimeout(fmt::format(
        "stimulus needs {} cycles, limit is {}", total, max_cycles));
  }
  Trace trace;
  for (const OutputPort& p : n.outputs()) trace.ports.push_back(p.name);
  RtlSimulator sim(n);
  const std::vector<int128> idle(n.inputs().size(), 0);
  std::size_t next = 0;
  for (std::uint64_t c = 0; c < total; ++c) {
    const std::vector<int128>* in = &idle;
    while (next < stimulus.size() && stimulus[next].cycle < c) ++next;
    if (next < stimulus.size() && stimulus[next].cycle == c) in = &stimulus[next].values;
    trace.cycles.push_back(sim.step(*in));
  }
  return trace;
}

namespace {

struct LayeredPorts {
  int dvi = -1;
  std::vector<int> u;
  int dvo = -1;
  std::vector<int> y;
};

LayeredPorts layered_ports(const Netlist& n) {
  if (!n.info.layered) throw ValidationError("netlist does not carry a layered network");
  LayeredPorts p;
  p.dvi = n.input_index("data_valid_in");
  p.dvo = n.output_index("data_valid_out");
  for (int j = 0; j < n.info.inputs; ++j) p.u.push_back(n.input_index(fmt::format("u{}", j)));
  for (int i = 0; i < n.info.outputs; ++i) p.y.push_back(n.output_index(fmt::format("y{}", i)));
  auto missing = [](int idx) { return idx < 0; };
  if (p.dvi < 0 || p.dvo < 0 || std::any_of(p.u.begin(), p.u.end(), missing) ||
      std::any_of(p.y.begin(), p.y.end(), missing)) {
    throw ValidationError("netlist lacks the layered port set");
  }
  return p;
}

std::uint64_t input_cycle(const Netlist& n, std::size_t s) {
  const std::uint64_t C = n.info.c_slow;
  return C * (s / C) * n.info.clock_ratio + s % C;
}

}  // namespace

std::uint64_t expected_output_cycle(const Netlist& n, std::size_t s) {
  return input_cycle(n, s) + static_cast<std::uint64_t>(n.info.latency());
}

std::vector<TimedInput> layered_stimulus(const Netlist& n,
                                         const std::vector<std::vector<double>>& samples) {
  const LayeredPorts p = layered_ports(n);
  std::vector<TimedInput> out;
  out.reserve(samples.size());
  for (std::size_t s = 0; s < samples.size(); ++s) {
    if (samples[s].size() != p.u.size()) {
      throw ValidationError(fmt::format("sample {} has {} inputs, netlist expects {}", s,
                                        samples[s].size(), p.u.size()));
    }
    TimedInput t;
    t.cycle = input_cycle(n, s);
    t.values.assign(n.inputs().size(), 0);
    t.values[p.dvi] = 1;
    for (std::size_t j = 0; j < p.u.size(); ++j) {
      t.values[p.u[j]] = quantize(samples[s][j], n.info.formats.input).raw;
    }
    out.push_back(std::move(t));
  }
  return out;
}

namespace {

// Streams the samples through the netlist and hands each data_valid_out
// pulse to the visitor; stops early when it returns false.
template <typename Visitor>
void stream_layered(const Netlist& n, const std::vector<std::vector<double>>& samples,
                    Visitor&& visit) {
  const LayeredPorts p = layered_ports(n);
  const std::vector<TimedInput> stim = layered_stimulus(n, samples);
  if (samples.empty()) return;
  const std::uint64_t end = expected_output_cycle(n, samples.size() - 1) + 1;
  RtlSimulator sim(n);
  const std::vector<int128> idle(n.inputs().size(), 0);
  std::size_t next = 0;
  std::vector<int128> y(p.y.size());
  for (std::uint64_t c = 0; c < end; ++c) {
    const std::vector<int128>* in = &idle;
    if (next < stim.size() && stim[next].cycle == c) in = &stim[next++].values;
    const std::vector<int128> out = sim.step(*in);
    if (out[p.dvo] == 0) continue;
    for (std::size_t i = 0; i < p.y.size(); ++i) y[i] = out[p.y[i]];
    if (!visit(c, y)) return;
  }
}

}  // namespace

std::vector<std::vector<int128>> run_layered(const Netlist& n,
                                             const std::vector<std::vector<double>>& samples) {
  std::vector<std::vector<int128>> out;
  stream_layered(n, samples, [&](std::uint64_t, const std::vector<int128>& y) {
    out.push_back(y);
    return true;
  });
  return out;
}

FixedPointSimulator functional_model(const StateSpaceModel& m, const Netlist& n) {
  std::optional<LutRom> hidden, end;
  if (n.info.hidden_lut >= 0) hidden = n.luts()[n.info.hidden_lut];
  if (n.info.end_lut >= 0) end = n.luts()[n.info.end_lut];
  return FixedPointSimulator(m, n.info.formats, hidden, end);
}

std::string EquivalenceReport::to_string() const {
  if (equivalent()) return fmt::format("equivalent ({} samples)", samples);
  const Divergence& d = *first_divergence;
  if (d.output_index < 0 && d.actual < 0) {
    return fmt::format("divergence at sample {}: no data_valid_out by cycle {}", d.sample,
                       raw_string(d.expected));
  }
  if (d.output_index < 0) {
    return fmt::format("divergence at sample {}: data_valid_out at cycle {}, expected cycle {}",
                       d.sample, raw_string(d.actual), raw_string(d.expected));
  }
  return fmt::format("divergence at sample {} output {} cycle {}: expected {}, got {}",
                     d.sample, d.output_index, d.cycle, raw_string(d.expected),
                     raw_string(d.actual));
}

EquivalenceReport compare_with_functional(const FixedPointSimulator& fn, const Netlist& n,
                                          const std::vector<std::vector<double>>& samples) {
  EquivalenceReport report;
  report.samples = samples.size();
  std::size_t s = 0;
  stream_layered(n, samples, [&](std::uint64_t cycle, const std::vector<int128>& y) {
    if (s >= samples.size()) return false;
    const std::uint64_t want = expected_output_cycle(n, s);
    if (cycle != want) {
      report.first_divergence = Divergence{s, -1, cycle, static_cast<int128>(want),
                                           static_cast<int128>(cycle)};
      return false;
    }
    const std::vector<FpValue> ref = fn.run(samples[s]);
    for (std::size_t i = 0; i < y.size(); ++i) {
      if (ref[i].raw != y[i]) {
        report.first_divergence =
            Divergence{s, static_cast<int>(i), cycle, ref[i].raw, y[i]};
        return false;
      }
    }
    ++s;
    return true;
  });
  if (!report.first_divergence && s < samples.size()) {
    report.first_divergence = Divergence{s, -1, expected_output_cycle(n, s),
                                         static_cast<int128>(expected_output_cycle(n, s)),
                                         -1};
  }
  return report;
}

EquivalenceReport compare_with_functional(const StateSpaceModel& m, const Netlist& n,
                                          const std::vector<std::vector<double>>& samples) {
  return compare_with_functional(functional_model(m, n), n, samples);
}

}  // namespace sshdl
