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

#include "sshdl/netlist.hpp"

#include <queue>

#include <fmt/format.h>

#include "sshdl/errors.hpp"

namespace sshdl {

std::string_view op_name(Op op) {
  switch (op) {
    case Op::kInput: return "input";
    case Op::kConst: return "const";
    case Op::kAdd: return "add";
    case Op::kSub: return "sub";
    case Op::kMul: return "mul";
    case Op::kSelect: return "select";
    case Op::kMux: return "mux";
    case Op::kEq: return "eq";
    case Op::kLtu: return "ltu";
    case Op::kAnd: return "and";
    case Op::kOr: return "or";
    case Op::kNot: return "not";
    case Op::kConcat: return "concat";
    case Op::kRequant: return "requant";
    case Op::kLutAddr: return "lut_addr";
    case Op::kRom: return "rom";
  }
  return "?";
}

std::string_view group_name(Group g) {
  switch (g) {
    case Group::kController: return "controller";
    case Group::kInputLayer: return "input_layer";
    case Group::kHiddenLayer: return "hidden_layer";
    case Group::kOutputLayer: return "output_layer";
  }
  return "?";
}

int Netlist::add(NetNode node) {
  if (node.name.empty()) {
    node.name = fmt::format("{}_{}", op_name(node.op), nodes_.size());
  }
  nodes_.push_back(std::move(node));
  const int id = static_cast<int>(nodes_.size()) - 1;
  if (nodes_.back().op == Op::kInput) inputs_.push_back(id);
  return id;
}

int Netlist::add_input(std::string name, int width, bool is_signed, Group g) {
  NetNode n;
  n.op = Op::kInput;
  n.name = std::move(name);
  n.width = width;
  n.is_signed = is_signed;
  n.group = g;
  return add(std::move(n));
}

int Netlist::add_const(int128 value, int width, bool is_signed, Group g) {
  NetNode n;
  n.op = Op::kConst;
  n.width = width;
  n.is_signed = is_signed;
  n.value = normalize(value, width, is_signed);
  n.group = g;
  return add(std::move(n));
}

int Netlist::add_op(Op op, std::vector<Edge> in, int width, bool is_signed,
                    Group g, std::string name) {
  NetNode n;
  n.op = op;
  n.in = std::move(in);
  n.width = width;
  n.is_signed = is_signed;
  n.group = g;
  n.name = std::move(name);
  return add(std::move(n));
}

int Netlist::add_output(std::string name, Edge edge) {
  const NetNode& src = nodes_.at(edge.src);
  outputs_.push_back(OutputPort{std::move(name), edge, src.width, src.is_signed});
  return static_cast<int>(outputs_.size()) - 1;
}

int Netlist::add_rom(RomTable rom) {
  roms_.push_back(std::move(rom));
  return static_cast<int>(roms_.size()) - 1;
}

int Netlist::add_lut(LutRom lut) {
  luts_.push_back(std::move(lut));
  return static_cast<int>(luts_.size()) - 1;
}

int Netlist::input_index(std::string_view name) const {
  for (std::size_t i = 0; i < inputs_.size(); ++i) {
    if (nodes_[inputs_[i]].name == name) return static_cast<int>(i);
  }
  return -1;
}

int Netlist::output_index(std::string_view name) const {
  for (std::size_t i = 0; i < outputs_.size(); ++i) {
    if (outputs_[i].name == name) return static_cast<int>(i);
  }
  return -1;
}

std::size_t Netlist::register_count() const {
  std::size_t total = 0;
  for (const NetNode& n : nodes_) total += n.regs.size();
  return total;
}

std::size_t Netlist::count_ops(Op op) const {
  std::size_t total = 0;
  for (const NetNode& n : nodes_) total += n.op == op ? 1 : 0;
  return total;
}

namespace {

bool arity_ok(Op op, std::size_t k) {
  switch (op) {
    case Op::kInput:
    case Op::kConst:
      return k == 0;
    case Op::kNot:
    case Op::kRequant:
    case Op::kLutAddr:
    case Op::kRom:
      return k == 1;
    case Op::kSelect:
      return k == 3;
    case Op::kMux:
      return k >= 2;
    default:
      return k == 2;
  }
}

}  // namespace

void Netlist::validate() const {
  const int n = static_cast<int>(nodes_.size());
  auto fail = [&](int id, const std::string& msg) {
    throw ValidationError(fmt::format("netlist node {} ({}): {}", id,
                                      id >= 0 ? nodes_[id].name : "", msg));
  };
  auto check_edge = [&](int id, const Edge& e) {
    if (e.src < 0 || e.src >= n) fail(id, fmt::format("edge to missing node {}", e.src));
    if (e.delay < 0 || e.delay > static_cast<int>(nodes_[e.src].regs.size())) {
      fail(id, fmt::format("edge delay {} exceeds the {} registers of {}", e.delay,
                           nodes_[e.src].regs.size(), nodes_[e.src].name));
    }
  };
  for (int id = 0; id < n; ++id) {
    const NetNode& node = nodes_[id];
    if (node.width < 1 || node.width > kMaxWordLength) {
      fail(id, fmt::format("width {} outside [1, {}]", node.width, kMaxWordLength));
    }
    if (!arity_ok(node.op, node.in.size())) {
      fail(id, fmt::format("{} has {} operands", op_name(node.op), node.in.size()));
    }
    for (const Edge& e : node.in) check_edge(id, e);
    for (int128 r : node.regs) {
      if (normalize(r, node.width, node.is_signed) != r) {
        fail(id, "register init outside the node range");
      }
    }
    if (node.op == Op::kRom && (node.param < 0 || node.param >= static_cast<int>(roms_.size()))) {
      fail(id, "missing ROM table");
    }
    if (node.op == Op::kLutAddr &&
        (node.param < 0 || node.param >= static_cast<int>(luts_.size()))) {
      fail(id, "missing activation table");
    }
    if (node.op == Op::kRequant && !node.fmt.valid()) fail(id, "invalid requant format");
    if (node.op == Op::kConcat) {
      const int w = nodes_[node.in[0].src].width + nodes_[node.in[1].src].width;
      if (w != node.width) fail(id, "concat width mismatch");
    }
  }
  for (const OutputPort& p : outputs_) check_edge(-1, p.edge);
  int cycle = -1;
  if (!comb_order(*this, false, &cycle)) fail(cycle, "combinational cycle");
}

int128 normalize(int128 v, int width, bool is_signed) {
  return is_signed ? wrap_signed(v, width) : static_cast<int128>(wrap_unsigned(v, width));
}

int128 eval_node(const Netlist& n, const NetNode& node,
                 std::span<const int128> in) {
  auto u = [&](std::size_t i) { return static_cast<uint128>(in[i]); };
  int128 r = 0;
  switch (node.op) {
    case Op::kInput:
      r = in.empty() ? 0 : in[0];
      break;
    case Op::kConst:
      r = node.value;
      break;
    case Op::kAdd:
      r = static_cast<int128>(u(0) + u(1));
      break;
    case Op::kSub:
      r = static_cast<int128>(u(0) - u(1));
      break;
    case Op::kMul:
      r = static_cast<int128>(u(0) * u(1));
      break;
    case Op::kSelect:
      r = in[0] != 0 ? in[1] : in[2];
      break;
    case Op::kMux: {
      const int128 sel = in[0];
      r = sel >= 0 && sel < static_cast<int128>(in.size() - 1) ? in[1 + sel] : 0;
      break;
    }
    case Op::kEq:
      r = in[0] == in[1] ? 1 : 0;
      break;
    case Op::kLtu:
      r = u(0) < u(1) ? 1 : 0;
      break;
    case Op::kAnd:
      r = static_cast<int128>(u(0) & u(1));
      break;
    case Op::kOr:
      r = static_cast<int128>(u(0) | u(1));
      break;
    case Op::kNot:
      r = static_cast<int128>(~u(0));
      break;
    case Op::kConcat: {
      const NetNode& lo = n.node(node.in[1].src);
      const NetNode& hi = n.node(node.in[0].src);
      r = static_cast<int128>((wrap_unsigned(in[0], hi.width) << lo.width) |
                              wrap_unsigned(in[1], lo.width));
      break;
    }
    case Op::kRequant:
      r = rescale_raw(in[0], node.frac_from, node.fmt);
      break;
    case Op::kLutAddr:
      r = static_cast<int128>(n.luts()[node.param].address(in[0]));
      break;
    case Op::kRom: {
      const RomTable& rom = n.roms()[node.param];
      r = in[0] >= 0 && in[0] < static_cast<int128>(rom.data.size())
              ? rom.data[static_cast<std::size_t>(in[0])]
              : 0;
      break;
    }
  }
  return normalize(r, node.width, node.is_signed);
}

std::optional<std::vector<int>> comb_order(const Netlist& n, bool reverse,
                                           int* cycle_node) {
  const int count = static_cast<int>(n.size());
  std::vector<int> indeg(count, 0);
  std::vector<std::vector<int>> users(count);
  for (int v = 0; v < count; ++v) {
    for (const Edge& e : n.node(v).in) {
      if (e.delay != 0) continue;
      ++indeg[v];
      users[e.src].push_back(v);
    }
  }
  std::vector<int> order;
  order.reserve(count);
  auto run = [&](auto& ready) {
    for (int v = 0; v < count; ++v) {
      if (indeg[v] == 0) ready.push(v);
    }
    while (!ready.empty()) {
      const int v = ready.top();
      ready.pop();
      order.push_back(v);
      for (int w : users[v]) {
        if (--indeg[w] == 0) ready.push(w);
      }
    }
  };
  if (reverse) {
    std::priority_queue<int> ready;
    run(ready);
  } else {
    std::priority_queue<int, std::vector<int>, std::greater<>> ready;
    run(ready);
  }
  if (static_cast<int>(order.size()) == count) return order;
  if (cycle_node) {
    for (int v = 0; v < count; ++v) {
      if (indeg[v] > 0) {
        *cycle_node = v;
        break;
      }
    }
  }
  return std::nullopt;
}

bool controller_is_moore(const Netlist& n) {
  const int count = static_cast<int>(n.size());
  std::vector<std::vector<int>> users(count);
  for (int v = 0; v < count; ++v) {
    for (const Edge& e : n.node(v).in) {
      if (e.delay == 0) users[e.src].push_back(v);
    }
  }
  std::vector<bool> reached(count, false);
  std::vector<int> stack(n.inputs().begin(), n.inputs().end());
  while (!stack.empty()) {
    const int v = stack.back();
    stack.pop_back();
    if (reached[v]) continue;
    reached[v] = true;
    for (int w : users[v]) stack.push_back(w);
  }
  for (int c : n.info.controller_outputs) {
    if (reached[c]) return false;
  }
  return true;
}

}  // namespace sshdl
