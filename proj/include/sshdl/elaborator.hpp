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

#ifndef SSHDL_ELABORATOR_HPP_
#define SSHDL_ELABORATOR_HPP_

#include <vector>

#include "sshdl/model.hpp"
#include "sshdl/netlist.hpp"
#include "sshdl/simkit.hpp"

namespace sshdl {

struct Schedule {
  int multipliers_per_node = 0;  // p; 0 means all M nodes' worth (p = M)
  int clock_ratio = 0;           // cycles per sample; 0 means the latency
  int mult_stages = 0;           // register ranks inside each multiplier
};

struct ActivationTableConfig {
  int addr_bits = 10;
  double lo = -4.0;
  double hi = 4.0;
};

enum class Phase { kIdle = 0, kLoad = 1, kMacc = 2, kRequant = 3, kActivate = 4, kOut = 5 };
inline constexpr int kPhaseCount = 6;
std::string_view phase_name(Phase p);

struct ControllerState {
  Phase phase = Phase::kIdle;
  int layer = 0;  // k
  int cycle = 0;  // MACC cycle within the layer

  friend bool operator==(const ControllerState&, const ControllerState&) = default;
  friend auto operator<=>(const ControllerState&, const ControllerState&) = default;
};

struct ControllerOutputs {
  bool first = false;     // clear-and-load the accumulators this cycle
  bool enable = false;    // accumulators update this cycle
  bool load = false;      // input words into the operand bank
  bool activate = false;  // activation results into the operand bank
  bool valid_out = false;

  friend bool operator==(const ControllerOutputs&, const ControllerOutputs&) = default;
};

// Moore controller sequencing one sample: LOAD, then per layer MACC cycles,
// a requantize cycle and an activate cycle, then OUT. A sample is accepted
// in IDLE or OUT.
class ControllerFsm {
 public:
  ControllerFsm(int layers, int macc_cycles, int mult_stages = 0);

  ControllerState initial() const { return {}; }
  ControllerState next(const ControllerState& s, bool valid_in, bool reset) const;
  ControllerOutputs outputs(const ControllerState& s) const;
  std::vector<ControllerState> reachable_states() const;

  int layers() const { return layers_; }
  int macc_cycles() const { return macc_cycles_; }
  int mult_stages() const { return mult_stages_; }
  // Cycles spent in MACC per layer, including multiplier pipeline drain.
  int macc_phase_cycles() const { return macc_cycles_ + mult_stages_; }
  int cycles_per_layer() const { return macc_phase_cycles() + 2; }
  int latency() const { return 2 + layers_ * cycles_per_layer(); }
  int layer_bits() const;
  int cycle_bits() const;

 private:
  int layers_;
  int macc_cycles_;
  int mult_stages_;
};

ControllerFsm build_controller(int layers, int macc_cycles, const Schedule& s);

// 1 (LOAD) + N * (macc_cycles + stages + 2) + 1 (OUT).
int latency_formula(int layers, int macc_cycles, int mult_stages = 0);

// Netlist signals of a lowered controller.
struct ControllerSignals {
  int phase = -1;  // next-state nodes; the registered value is at delay 1
  int layer = -1;
  int cycle = -1;
  int first = -1;
  int enable = -1;
  int load = -1;
  int activate = -1;
  int valid_out = -1;
};

ControllerSignals lower_controller(Netlist& n, const ControllerFsm& fsm, Edge valid_in);

// Netlist holding only the controller: input data_valid_in, outputs phase,
// layer, cycle (registered) and the five Moore outputs.
Netlist controller_netlist(const ControllerFsm& fsm);

struct MaccCell {
  int mul = -1;
  int pre = -1;  // init or the fed-back accumulator
  int sum = -1;
  int acc = -1;  // accumulator; its register holds the running sum
};

// Signed multiplier with `stages` product registers feeding a widened
// accumulator: acc <= en ? (first ? init : acc) + a*b : acc.
MaccCell add_macc_cell(Netlist& n, Edge a, Edge b, Edge first, Edge enable, Edge init,
                       int acc_width, int stages, Group g, int cell_index,
                       const std::string& prefix);

// Standalone MACC for checking the cell against fp_mul/fp_add: inputs a, b,
// first, en; output acc (registered).
Netlist macc_netlist(const FixedPointFormat& a, const FixedPointFormat& b, int acc_width,
                     int stages = 0);

// Throws ValidationError for models outside the layered form, formats the
// netlist cannot carry (accumulators over 127 bits, tables over 2^20
// entries) and ScheduleError for p outside [1, M] or a clock ratio below the
// latency.
Netlist elaborate(const StateSpaceModel& m, const Schedule& s, const FormatAssignment& f,
                  const ActivationTableConfig& lut = {});

int latency(const Netlist& n);

}  // namespace sshdl

#endif  // SSHDL_ELABORATOR_HPP_
