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

#ifndef SSHDL_RTL_SIM_HPP_
#define SSHDL_RTL_SIM_HPP_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sshdl/netlist.hpp"
#include "sshdl/simkit.hpp"

namespace sshdl {

// Two-state cycle simulator over a Netlist. The netlist must outlive it.
class RtlSimulator {
 public:
  // Throws ValidationError on a combinational cycle. reverse selects the
  // alternative topological evaluation order.
  explicit RtlSimulator(const Netlist& n, bool reverse_order = false);

  // Loads every register with its init value and rewinds the cycle count.
  void reset();

  // Evaluates the combinational logic from the current registers and the
  // given inputs (netlist input order), samples the output ports, then
  // clocks every register. With reset asserted the registers load their
  // init values instead.
  std::vector<int128> step(std::span<const int128> inputs, bool reset = false);

  std::uint64_t cycle() const { return cycle_; }
  // Combinational value of a node during the last step.
  int128 comb_value(int node) const { return comb_[node]; }
  // Register d (1-based depth) of a node's chain.
  int128 reg_value(int node, int depth) const {
    return regs_[offset_[node] + depth - 1];
  }

 private:
  int128 tap(const Edge& e) const {
    return e.delay == 0 ? comb_[e.src] : regs_[offset_[e.src] + e.delay - 1];
  }

  const Netlist& n_;
  std::vector<int> order_;
  std::vector<std::size_t> offset_;
  std::vector<int128> regs_;
  std::vector<int128> init_;
  std::vector<int128> comb_;
  std::vector<int128> operands_;
  std::uint64_t cycle_ = 0;
};

struct TimedInput {
  std::uint64_t cycle = 0;
  std::vector<int128> values;  // netlist input order
};

struct Trace {
  std::vector<std::string> ports;
  std::vector<std::vector<int128>> cycles;  // outputs per cycle

  // Rows "cycle,port,raw".
  std::string to_csv() const;
};

// Steps from reset through the last stimulus cycle plus drain cycles.
// Cycles without a stimulus entry drive every input to 0. Throws
// SimulationTimeout when that exceeds max_cycles.
Trace run(const Netlist& n, const std::vector<TimedInput>& stimulus,
          std::uint64_t max_cycles, std::uint64_t drain = 0);

// Stimulus for a layered netlist: sample s goes to stream s mod C of a
// C-slowed design, one sample per clock_ratio cycles within each stream.
std::vector<TimedInput> layered_stimulus(const Netlist& n,
                                         const std::vector<std::vector<double>>& samples);

// Cycle at which sample s must raise data_valid_out.
std::uint64_t expected_output_cycle(const Netlist& n, std::size_t s);

struct Divergence {
  std::size_t sample = 0;
  int output_index = -1;  // -1: data_valid_out timing
  std::uint64_t cycle = 0;
  int128 expected = 0;
  int128 actual = 0;
};

struct EquivalenceReport {
  std::size_t samples = 0;
  std::optional<Divergence> first_divergence;

  bool equivalent() const { return !first_divergence.has_value(); }
  std::string to_string() const;
};

// Functional simulator matching the netlist's formats and tables.
FixedPointSimulator functional_model(const StateSpaceModel& m, const Netlist& n);

// Runs the samples through the netlist and compares every output raw with
// the functional simulator; reports the first mismatch.
EquivalenceReport compare_with_functional(const FixedPointSimulator& fn,
                                          const Netlist& n,
                                          const std::vector<std::vector<double>>& samples);
EquivalenceReport compare_with_functional(const StateSpaceModel& m,
                                          const Netlist& n,
                                          const std::vector<std::vector<double>>& samples);

// Raw outputs of the netlist for each sample, in sample order.
std::vector<std::vector<int128>> run_layered(const Netlist& n,
                                             const std::vector<std::vector<double>>& samples);

}  // namespace sshdl

#endif  // SSHDL_RTL_SIM_HPP_
