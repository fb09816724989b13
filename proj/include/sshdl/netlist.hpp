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

#ifndef SSHDL_NETLIST_HPP_
#define SSHDL_NETLIST_HPP_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sshdl/fixed_point.hpp"
#include "sshdl/simkit.hpp"

namespace sshdl {

// Synchronous single-clock netlist in edge-weighted form: every node owns
// the chain of registers on its output, and an operand edge taps that chain
// at a given depth (0 = the combinational value).
enum class Op {
  kInput,
  kConst,
  kAdd,
  kSub,
  kMul,
  kSelect,   // {cond, if_true, if_false}
  kMux,      // {sel, in0, in1, ...}; out-of-range selects give 0
  kEq,
  kLtu,      // unsigned less-than
  kAnd,
  kOr,
  kNot,
  kConcat,   // {high, low}, unsigned
  kRequant,  // rescale from frac_from to fmt: round, saturate
  kLutAddr,  // activation-table address of an operand in the table's in_fmt
  kRom,      // {addr}; combinational table read
};

std::string_view op_name(Op op);

enum class Group { kController, kInputLayer, kHiddenLayer, kOutputLayer };
std::string_view group_name(Group g);

enum class Cell { kNone, kMacc, kActivationRom, kEndActivationRom };

struct Edge {
  int src = -1;
  int delay = 0;

  friend bool operator==(const Edge&, const Edge&) = default;
};

struct NetNode {
  Op op = Op::kConst;
  std::string name;
  int width = 1;
  bool is_signed = false;
  std::vector<Edge> in;
  std::vector<int128> regs;  // output chain init values, regs[0] nearest
  int128 value = 0;          // kConst
  int param = -1;            // kLutAddr: lut index; kRom: rom index
  int frac_from = 0;         // kRequant
  FixedPointFormat fmt;      // kRequant target
  Group group = Group::kHiddenLayer;
  Cell cell = Cell::kNone;
  int cell_index = -1;
};

struct OutputPort {
  std::string name;
  Edge edge;
  int width = 1;
  bool is_signed = false;
};

struct RomTable {
  std::string name;
  int width = 1;
  bool is_signed = false;
  int addr_bits = 1;
  std::vector<int128> data;  // size <= 2^addr_bits; missing entries read 0
};

// Architecture parameters recorded by the elaborator.
struct NetlistInfo {
  bool layered = false;
  int inputs = 0;   // L
  int nodes = 0;    // M
  int layers = 0;   // N
  int outputs = 0;  // P
  int operand_width = 0;  // K
  int multipliers_per_node = 1;
  int mult_stages = 0;
  int macc_cycles = 0;
  int base_latency = 0;  // single-stream latency before c-slowing
  int clock_ratio = 0;   // single-stream sample period
  int c_slow = 1;
  ActivationKind hidden_activation = ActivationKind::kTanh;
  ActivationKind output_activation = ActivationKind::kIdentity;
  FormatAssignment formats;
  int accumulator_width = 0;
  int output_accumulator_width = 0;
  std::vector<int> controller_outputs;  // node ids
  int hidden_lut = -1;  // index into luts
  int end_lut = -1;

  // data_valid_in to data_valid_out distance in cycles.
  int latency() const { return base_latency * c_slow; }
};

class Netlist {
 public:
  int add(NetNode node);
  int add_input(std::string name, int width, bool is_signed, Group g);
  int add_const(int128 value, int width, bool is_signed, Group g);
  int add_op(Op op, std::vector<Edge> in, int width, bool is_signed, Group g,
             std::string name = {});
  int add_output(std::string name, Edge edge);
  int add_rom(RomTable rom);
  int add_lut(LutRom lut);

  NetNode& node(int id) { return nodes_.at(id); }
  const NetNode& node(int id) const { return nodes_.at(id); }
  std::vector<NetNode>& nodes() { return nodes_; }
  const std::vector<NetNode>& nodes() const { return nodes_; }
  std::size_t size() const { return nodes_.size(); }

  const std::vector<int>& inputs() const { return inputs_; }
  std::vector<OutputPort>& outputs() { return outputs_; }
  const std::vector<OutputPort>& outputs() const { return outputs_; }
  std::vector<RomTable>& roms() { return roms_; }
  const std::vector<RomTable>& roms() const { return roms_; }
  const std::vector<LutRom>& luts() const { return luts_; }
  std::vector<LutRom>& luts() { return luts_; }

  NetlistInfo info;

  int input_index(std::string_view name) const;   // -1 if absent
  int output_index(std::string_view name) const;  // -1 if absent
  std::size_t register_count() const;
  std::size_t count_ops(Op op) const;

  // Throws ValidationError: operand arity, edge targets, delays beyond the
  // source chain, widths, table references, combinational cycles.
  void validate() const;

 private:
  std::vector<NetNode> nodes_;
  std::vector<int> inputs_;
  std::vector<OutputPort> outputs_;
  std::vector<RomTable> roms_;
  std::vector<LutRom> luts_;
};

// Wraps v into the node's width and signedness (two's complement).
int128 normalize(int128 v, int width, bool is_signed);

// Combinational function of a node applied to operand values (already
// normalized to their sources). kInput returns operands[0].
int128 eval_node(const Netlist& n, const NetNode& node,
                 std::span<const int128> operands);

// Topological order of nodes over delay-0 edges. reverse picks the
// highest ready id first instead of the lowest, giving a second valid order.
// Returns nullopt and sets *cycle_node on a combinational cycle.
std::optional<std::vector<int>> comb_order(const Netlist& n, bool reverse,
                                           int* cycle_node = nullptr);

// Structural check: no delay-0 path from any input port to a controller
// output.
bool controller_is_moore(const Netlist& n);

}  // namespace sshdl

#endif  // SSHDL_NETLIST_HPP_
