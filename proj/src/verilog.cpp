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

#include "sshdl/verilog.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <regex>
#include <set>

#include <boost/multiprecision/cpp_int.hpp>
#include <fmt/format.h>

#include "sshdl/errors.hpp"
#include "sshdl/rtl_sim.hpp"

namespace sshdl {

namespace {

using BigInt = boost::multiprecision::cpp_int;

BigInt big(int128 v) {
  const bool neg = v < 0;
  uint128 mag = neg ? uint128(0) - uint128(v) : uint128(v);
  BigInt b = BigInt(static_cast<std::uint64_t>(mag >> 64)) << 64;
  b |= BigInt(static_cast<std::uint64_t>(mag));
  return neg ? BigInt(-b) : b;
}

std::string hex_of(BigInt v, int width) {
  const BigInt modulus = BigInt(1) << width;
  v %= modulus;
  if (v < 0) v += modulus;
  const int digits = std::max(1, (width + 3) / 4);
  std::string s(digits, '0');
  for (int i = 0; i < digits; ++i) {
    const int nibble = static_cast<int>((v >> (4 * i)) & 15);
    s[digits - 1 - i] = "0123456789abcdef"[nibble];
  }
  return s;
}

std::string lit(int128 v, int width) { return fmt::format("{}'h{}", width, hex_of(big(v), width)); }
std::string lit_big(const BigInt& v, int width) {
  return fmt::format("{}'h{}", width, hex_of(v, width));
}
std::string slit(const BigInt& v, int width) {
  return fmt::format("{}'sh{}", width, hex_of(v, width));
}

std::string range(int width) { return width == 1 ? "" : fmt::format("[{}:0] ", width - 1); }
std::string decl_type(bool is_signed, int width) {
  return fmt::format("{}{}", is_signed ? "signed " : "", range(width));
}

// expr (width w, own signedness) resized to W bits as an unsigned vector.
std::string ext(const std::string& expr, int w, bool is_signed, int W) {
  if (W == w) return expr;
  if (W < w) return W == 1 ? fmt::format("{}[0]", expr) : fmt::format("{}[{}:0]", expr, W - 1);
  if (w == 1) {
    return is_signed ? fmt::format("{{{}{{{}}}}}", W, expr)
                     : fmt::format("{{{{{}{{1'b0}}}}, {}}}", W - 1, expr);
  }
  const std::string fill = is_signed ? fmt::format("{}[{}]", expr, w - 1) : "1'b0";
  return fmt::format("{{{{{}{{{}}}}}, {}}}", W - w, fill, expr);
}

// Same, but always an unsigned concatenation so comparisons stay unsigned.
std::string ext_u(const std::string& expr, int w, bool is_signed, int W) {
  const std::string e = ext(expr, w, is_signed, W);
  return e == expr ? fmt::format("{{{}}}", expr) : e;
}

std::string truth(const std::string& expr, int w) {
  return w == 1 ? expr : fmt::format("(|{})", expr);
}

int bit_length(const BigInt& v) {
  BigInt m = v < 0 ? BigInt(-v) : v;
  int bits = 0;
  while (m != 0) {
    m >>= 1;
    ++bits;
  }
  return bits;
}

const std::set<std::string, std::less<>>& reserved_words() {
  static const std::set<std::string, std::less<>> words{
      "always", "and",      "assign",  "begin",      "buf",      "case",     "casex",
      "casez",  "clock",    "default", "else",       "end",      "endcase",  "endfunction",
      "endmodule", "event", "for",     "function",   "if",       "initial",  "inout",
      "input",  "integer",  "localparam", "module",  "nand",     "negedge",  "nor",
      "not",    "or",       "output",  "parameter",  "posedge",  "real",     "reg",
      "reset",  "signed",   "table",   "task",       "time",     "top",      "u",
      "wire",   "xor",      "y",       "data_valid_out", "testbench", "macc",
      "activation_rom", "end_activation_rom", "controller", "input_layer",
      "hidden_layer", "output_layer"};
  return words;
}

bool is_identifier(std::string_view s) {
  if (s.empty() || !(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_')) return false;
  return std::all_of(s.begin(), s.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
  });
}

bool has_register_suffix(std::string_view s) {
  static const std::regex re(".*_r[0-9]+$");
  return std::regex_match(s.begin(), s.end(), re);
}

constexpr std::array<Group, 4> kGroups{Group::kController, Group::kInputLayer,
                                       Group::kHiddenLayer, Group::kOutputLayer};
constexpr int kTop = 4;

std::string module_of(Group g) {
  switch (g) {
    case Group::kController: return "controller";
    case Group::kInputLayer: return "input_layer";
    case Group::kHiddenLayer: return "hidden_layer";
    case Group::kOutputLayer: return "output_layer";
  }
  return "?";
}

struct Tap {
  int src = -1;
  int delay = 0;
  friend auto operator<=>(const Tap&, const Tap&) = default;
};

struct MaccMatch {
  int mul = -1, pre = -1, sum = -1, acc = -1;
  Edge a, b, first, en, init;
  int stages = 0;
  int cell_index = -1;
};

struct ActMatch {
  int addr = -1;
  int rom = -1;
  Edge x;
  int lut = -1;
  bool registered = true;
  int index = -1;
};

// Address of a LutRom input as Verilog lines: `out` gets the clamped bin.
void lut_address_lines(std::string& o, const LutRom& lut, const std::string& x, int wx,
                       bool sx, const std::string& out, const std::string& p) {
  const int d = lut.addr_bits - lut.span_log2 - lut.in_fmt.frac_length;
  const BigInt lo = lut.lo_bins;
  int WA = std::max(wx + 1 + std::max(d, 0), bit_length(lo) + 1) + 2;
  WA = std::max(WA, lut.addr_bits + 2);
  if (d >= 0) {
    const std::string shifted =
        d == 0 ? ext(x, wx, sx, WA) : fmt::format("{{{}, {}'b0}}", ext(x, wx, sx, WA - d), d);
    o += fmt::format("  wire signed [{}:0] {}_bins = {};\n", WA - 1, p, shifted);
  } else {
    o += fmt::format("  wire signed [{}:0] {}_wide = {};\n", WA - 1, p, ext(x, wx, sx, WA));
    o += fmt::format("  wire signed [{}:0] {}_bins = {}_wide >>> {};\n", WA - 1, p, p, -d);
  }
  o += fmt::format("  wire signed [{}:0] {}_off = {}_bins - {};\n", WA - 1, p, p, slit(lo, WA));
  const BigInt last = (BigInt(1) << lut.addr_bits) - 1;
  o += fmt::format("  assign {} = {}_off[{}] ? {} : ({}_off > {}) ? {} : {}_off[{}:0];\n", out,
                   p, WA - 1, lit(0, lut.addr_bits), p, slit(last, WA),
                   lit_big(last, lut.addr_bits), p, lut.addr_bits - 1);
}

// Rescale from frac_from to fmt: round half away from zero, then saturate.
void requant_lines(std::string& o, const std::string& x, int wx, bool sx, int frac_from,
                   const FixedPointFormat& f, const std::string& out, const std::string& p) {
  const int s = frac_from - f.frac_length;
  const int wo = f.word_length;
  if (s > wx) {
    o += fmt::format("  assign {} = {};\n", out, lit(0, wo));
    return;
  }
  int W;
  if (s > 0) {
    W = wx + 2;
    const BigInt half = BigInt(1) << (s - 1);
    o += fmt::format("  wire signed [{}:0] {}_x = {};\n", W - 1, p, ext(x, wx, sx, W));
    o += fmt::format("  wire [{}:0] {}_b = {}_x + ({}_x[{}] ? {} : {});\n", W - 1, p, p, p, W - 1,
                     lit_big(half - 1, W), lit_big(half, W));
    o += fmt::format("  wire signed [{}:0] {}_t = $signed({}_b) >>> {};\n", W - 1, p, p, s);
  } else if (s == 0) {
    W = wx + 1;
    o += fmt::format("  wire signed [{}:0] {}_t = {};\n", W - 1, p, ext(x, wx, sx, W));
  } else {
    W = wx + 1 - s;
    o += fmt::format("  wire signed [{}:0] {}_t = {{{}, {}'b0}};\n", W - 1, p,
                     ext(x, wx, sx, wx + 1), -s);
  }
  if (W <= wo) {
    o += fmt::format("  assign {} = {};\n", out, ext(p + "_t", W, true, wo));
    return;
  }
  const BigInt hi = (BigInt(1) << (wo - 1)) - 1;
  const BigInt lo = -(BigInt(1) << (wo - 1));
  o += fmt::format("  assign {} = ({}_t > {}) ? {} : ({}_t < {}) ? {} : {}_t[{}:0];\n", out, p,
                   slit(hi, W), lit_big(hi, wo), p, slit(lo, W), lit_big(lo, wo), p, wo - 1);
}

// Case body assigning `lhs` from a table indexed by `addr`.
void case_table(std::string& o, const std::string& indent, const std::string& addr,
                int addr_width, bool addr_signed, const std::string& lhs, int width,
                const std::vector<int128>& data, bool keep_zeros) {
  const std::uint64_t reach =
      addr_width >= 63 ? ~std::uint64_t{0}
                       : (std::uint64_t{1} << (addr_signed ? addr_width - 1 : addr_width));
  o += fmt::format("{}case ({})\n", indent, addr);
  for (std::size_t k = 0; k < data.size() && k < reach; ++k) {
    if (!keep_zeros && data[k] == 0) continue;
    o += fmt::format("{}  {}'d{}: {} = {};\n", indent, addr_width, k, lhs, lit(data[k], width));
  }
  o += fmt::format("{}  default: {} = {};\n", indent, lhs, lit(0, width));
  o += fmt::format("{}endcase\n", indent);
}

std::string mem_file(const std::vector<int128>& data, int width) {
  std::string s;
  for (int128 v : data) s += hex_of(big(v), width) + "\n";
  return s;
}

class Emitter {
 public:
  Emitter(const Netlist& n, const VerilogConfig& cfg);

  std::string group_module(Group g) const;
  std::string top() const;
  std::string testbench() const;
  std::string activation_module(bool end) const;
  std::string macc_module() const;
  bool has_maccs() const { return !maccs_.empty(); }
  bool has_activation(bool end) const { return (end ? end_lut_ : hidden_lut_) >= 0; }
  std::vector<std::pair<std::string, std::string>> mem_files() const;
  std::pair<std::string, std::string> testbench_data() const;

 private:
  std::string tap(const Edge& e) const {
    return e.delay == 0 ? names_[e.src] : fmt::format("{}_r{}", names_[e.src], e.delay);
  }
  std::string tap(const Tap& t) const { return tap(Edge{t.src, t.delay}); }
  int owner(int v) const {
    return n_.node(v).op == Op::kInput ? kTop : static_cast<int>(n_.node(v).group);
  }
  bool is_reg_tap(const Tap& t) const;
  void match_cells();
  void collect_uses();
  std::vector<Edge> external_edges(int v) const;
  void emit_node(std::string& decl, std::string& o, int v) const;
  std::string instance_name(const MaccMatch& m) const;
  std::string port_decl(const Tap& t, bool output) const;

  const Netlist& n_;
  const VerilogConfig& cfg_;
  std::vector<std::string> names_;
  std::vector<std::vector<Tap>> users_;  // per node: (user, delay); user -1 is a port
  std::vector<int> macc_of_;             // node -> index into maccs_
  std::vector<int> act_of_;              // node -> index into acts_
  std::vector<MaccMatch> maccs_;
  std::vector<ActMatch> acts_;
  int hidden_lut_ = -1;
  int end_lut_ = -1;
  std::array<std::set<Tap>, 5> uses_;  // taps read by each module
};

Emitter::Emitter(const Netlist& n, const VerilogConfig& cfg) : n_(n), cfg_(cfg) {
  n.validate();
  const int V = static_cast<int>(n.size());
  std::set<std::string, std::less<>> taken;
  names_.resize(V);
  for (int v : n.inputs()) {
    const std::string& name = n.node(v).name;
    if (!is_identifier(name) || reserved_words().count(name) || !taken.insert(name).second) {
      throw ValidationError(fmt::format("input name '{}' is not a usable port name", name));
    }
    names_[v] = name;
  }
  for (const OutputPort& p : n.outputs()) taken.insert(p.name);
  for (int v = 0; v < V; ++v) {
    if (n.node(v).op == Op::kInput) continue;
    std::string name = n.node(v).name;
    if (!is_identifier(name) || reserved_words().count(name) || has_register_suffix(name) ||
        name.find("__") != std::string::npos || taken.count(name)) {
      name = fmt::format("n{}", v);
      for (int k = 2; taken.count(name); ++k) name = fmt::format("n{}_{}", v, k);
    }
    taken.insert(name);
    names_[v] = name;
  }
  users_.resize(V);
  for (int v = 0; v < V; ++v) {
    for (const Edge& e : n.node(v).in) users_[e.src].push_back({v, e.delay});
  }
  for (const OutputPort& p : n.outputs()) users_[p.edge.src].push_back({-1, p.edge.delay});
  match_cells();
  collect_uses();
}

void Emitter::match_cells() {
  const int V = static_cast<int>(n_.size());
  macc_of_.assign(V, -1);
  act_of_.assign(V, -1);
  auto only_users = [&](int v, const std::vector<Tap>& allowed) {
    for (const Tap& u : users_[v]) {
      if (std::find(allowed.begin(), allowed.end(), u) == allowed.end()) return false;
    }
    return true;
  };

  std::map<int, std::vector<int>> cells;
  for (int v = 0; v < V; ++v) {
    if (n_.node(v).cell == Cell::kMacc) cells[n_.node(v).cell_index].push_back(v);
  }
  for (const auto& [index, members] : cells) {
    if (members.size() != 4) continue;
    MaccMatch m;
    m.cell_index = index;
    for (int v : members) {
      const NetNode& x = n_.node(v);
      if (x.op == Op::kMul) m.mul = v;
      if (x.op == Op::kAdd) m.sum = v;
      if (x.op == Op::kSelect && !x.regs.empty()) m.acc = v;
      if (x.op == Op::kSelect && x.regs.empty()) m.pre = v;
    }
    if (m.mul < 0 || m.sum < 0 || m.acc < 0 || m.pre < 0) continue;
    const NetNode& mul = n_.node(m.mul);
    const NetNode& pre = n_.node(m.pre);
    const NetNode& sum = n_.node(m.sum);
    const NetNode& acc = n_.node(m.acc);
    m.stages = static_cast<int>(mul.regs.size());
    const int AW = acc.width;
    bool ok = acc.in.size() == 3 && pre.in.size() == 3 && sum.in.size() == 2 &&
              mul.in.size() == 2;
    ok = ok && acc.regs == std::vector<int128>{0} &&
         std::all_of(mul.regs.begin(), mul.regs.end(), [](int128 r) { return r == 0; }) &&
         pre.regs.empty() && sum.regs.empty();
    ok = ok && acc.in[1] == Edge{m.sum, 0} && acc.in[2] == Edge{m.acc, 1} &&
         pre.in[2] == Edge{m.acc, 1} && sum.in[0] == Edge{m.pre, 0} &&
         sum.in[1] == Edge{m.mul, m.stages};
    ok = ok && pre.width == AW && sum.width == AW && mul.is_signed && pre.is_signed &&
         sum.is_signed && acc.is_signed;
    ok = ok && mul.group == acc.group && pre.group == acc.group && sum.group == acc.group;
    if (!ok) continue;
    m.a = mul.in[0];
    m.b = mul.in[1];
    m.en = acc.in[0];
    m.first = pre.in[0];
    m.init = pre.in[1];
    const NetNode& a = n_.node(m.a.src);
    const NetNode& b = n_.node(m.b.src);
    ok = a.is_signed && b.is_signed && mul.width == a.width + b.width;
    for (const Edge& e : {m.a, m.b, m.en, m.first, m.init}) {
      ok = ok && e.src != m.mul && e.src != m.pre && e.src != m.sum && e.src != m.acc;
    }
    ok = ok && only_users(m.mul, {{m.sum, m.stages}}) && only_users(m.pre, {{m.sum, 0}}) &&
         only_users(m.sum, {{m.acc, 0}});
    for (const Tap& u : users_[m.acc]) ok = ok && u.delay == 1;
    if (!ok) continue;
    for (int v : members) macc_of_[v] = static_cast<int>(maccs_.size());
    maccs_.push_back(m);
  }

  for (int v = 0; v < V; ++v) {
    const NetNode& r = n_.node(v);
    const bool end = r.cell == Cell::kEndActivationRom;
    if (r.op != Op::kRom || (r.cell != Cell::kActivationRom && !end)) continue;
    if (r.in.size() != 1 || r.in[0].delay != 0) continue;
    const int a = r.in[0].src;
    const NetNode& addr = n_.node(a);
    if (addr.op != Op::kLutAddr || addr.cell != r.cell || addr.group != r.group) continue;
    const LutRom& lut = n_.luts()[addr.param];
    const RomTable& rom = n_.roms()[r.param];
    const NetNode& x = n_.node(addr.in[0].src);
    bool ok = lut.materialized() && rom.data == lut.entries &&
              rom.width == lut.out_fmt.word_length && r.width == rom.width && r.is_signed &&
              rom.addr_bits == lut.addr_bits && x.width == lut.in_fmt.word_length &&
              x.is_signed && only_users(a, {{v, 0}}) && addr.regs.empty();
    if (end) {
      ok = ok && r.regs.empty();
    } else {
      ok = ok && r.regs == std::vector<int128>{0};
      for (const Tap& u : users_[v]) ok = ok && u.delay == 1;
    }
    int& shared = end ? end_lut_ : hidden_lut_;
    ok = ok && (shared < 0 || shared == addr.param);
    if (!ok) continue;
    shared = addr.param;
    ActMatch m{a, v, addr.in[0], addr.param, !end, r.cell_index};
    act_of_[a] = act_of_[v] = static_cast<int>(acts_.size());
    acts_.push_back(m);
  }
}

// Edges read by whatever emits node v (a cell instance is emitted at its
// accumulator or table node; the other members emit nothing).
std::vector<Edge> Emitter::external_edges(int v) const {
  if (macc_of_[v] >= 0) {
    const MaccMatch& m = maccs_[macc_of_[v]];
    if (v != m.acc) return {};
    return {m.a, m.b, m.first, m.en, m.init};
  }
  if (act_of_[v] >= 0) {
    const ActMatch& m = acts_[act_of_[v]];
    if (v != m.rom) return {};
    return {m.x};
  }
  return n_.node(v).in;
}

void Emitter::collect_uses() {
  for (std::size_t v = 0; v < n_.size(); ++v) {
    const int mod = owner(static_cast<int>(v));
    if (mod == kTop) continue;
    for (const Edge& e : external_edges(static_cast<int>(v))) uses_[mod].insert({e.src, e.delay});
  }
  for (const OutputPort& p : n_.outputs()) uses_[kTop].insert({p.edge.src, p.edge.delay});
}

bool Emitter::is_reg_tap(const Tap& t) const {
  const NetNode& x = n_.node(t.src);
  if (t.delay >= 1) return macc_of_[t.src] < 0 && act_of_[t.src] < 0;
  if (act_of_[t.src] >= 0) return false;
  return x.op == Op::kMux || x.op == Op::kRom;
}

std::string Emitter::port_decl(const Tap& t, bool output) const {
  const NetNode& x = n_.node(t.src);
  const char* kind = output ? (is_reg_tap(t) ? "output reg " : "output wire ") : "input wire ";
  return fmt::format("  {}{}{}", kind, decl_type(x.is_signed, x.width), tap(t));
}

std::string Emitter::instance_name(const MaccMatch& m) const {
  const int p = n_.info.multipliers_per_node;
  if (n_.info.layered && p > 0) {
    return fmt::format("node{}_macc{}", m.cell_index / p, m.cell_index % p);
  }
  return fmt::format("macc{}", m.cell_index);
}

void Emitter::emit_node(std::string& decl, std::string& o, int v) const {
  const NetNode& x = n_.node(v);
  const std::string& name = names_[v];
  const int w = x.width;
  auto src_w = [&](const Edge& e) { return n_.node(e.src).width; };
  auto src_s = [&](const Edge& e) { return n_.node(e.src).is_signed; };
  auto arg = [&](std::size_t i, int W) {
    const Edge& e = x.in[i];
    return ext(tap(e), src_w(e), src_s(e), W);
  };
  auto arg_u = [&](std::size_t i, int W) {
    const Edge& e = x.in[i];
    return ext_u(tap(e), src_w(e), src_s(e), W);
  };
  const std::string type = decl_type(x.is_signed, w);
  const bool comb_reg = x.op == Op::kMux || x.op == Op::kRom;
  auto declare = [&](bool as_reg) {
    decl += fmt::format("  {} {}{};\n", as_reg ? "reg" : "wire", type, name);
  };
  // Nets exported at delay 0 are declared in the port list.
  bool exported = false;
  for (int mod = 0; mod <= kTop; ++mod) {
    if (mod != static_cast<int>(x.group) && uses_[mod].count({v, 0})) exported = true;
  }

  if (macc_of_[v] >= 0) {
    const MaccMatch& m = maccs_[macc_of_[v]];
    if (v != m.acc) return;
    const std::string out = tap(Edge{m.acc, 1});
    bool out_exported = false;
    for (int mod = 0; mod <= kTop; ++mod) {
      if (mod != static_cast<int>(x.group) && uses_[mod].count({m.acc, 1})) out_exported = true;
    }
    if (!out_exported) decl += fmt::format("  wire {}{};\n", type, out);
    const int wa = src_w(m.a), wb = src_w(m.b);
    o += fmt::format("  macc #(.A_W({}), .B_W({}), .ACC_W({}), .STAGES({})) {} (\n", wa, wb, w,
                     m.stages, instance_name(m));
    o += "    .clock(clock),\n    .reset(reset),\n";
    o += fmt::format("    .a({}),\n", tap(m.a));
    o += fmt::format("    .b({}),\n", tap(m.b));
    o += fmt::format("    .first({}),\n", truth(tap(m.first), src_w(m.first)));
    o += fmt::format("    .en({}),\n", truth(tap(m.en), src_w(m.en)));
    o += fmt::format("    .init({}),\n", ext(tap(m.init), src_w(m.init), src_s(m.init), w));
    o += fmt::format("    .acc({})\n  );\n", out);
    return;
  }
  if (act_of_[v] >= 0) {
    const ActMatch& m = acts_[act_of_[v]];
    if (v != m.rom) return;
    const std::string out = m.registered ? tap(Edge{m.rom, 1}) : name;
    const Tap out_tap{m.rom, m.registered ? 1 : 0};
    bool out_exported = false;
    for (int mod = 0; mod <= kTop; ++mod) {
      if (mod != static_cast<int>(x.group) && uses_[mod].count(out_tap)) out_exported = true;
    }
    if (!out_exported) decl += fmt::format("  wire {}{};\n", type, out);
    const std::string inst =
        m.registered ? fmt::format("node{}_act", m.index) : fmt::format("out{}_act", m.index);
    if (m.registered) {
      o += fmt::format("  activation_rom {} (\n    .clock(clock),\n    .reset(reset),\n", inst);
    } else {
      o += fmt::format("  end_activation_rom {} (\n", inst);
    }
    o += fmt::format("    .x({}),\n    .y({})\n  );\n", tap(m.x), out);
    return;
  }

  if (!exported) declare(comb_reg);
  switch (x.op) {
    case Op::kInput:
      break;
    case Op::kConst:
      o += fmt::format("  assign {} = {};\n", name, lit(x.value, w));
      break;
    case Op::kAdd:
    case Op::kSub:
      o += fmt::format("  assign {} = {} {} {};\n", name, arg(0, w), x.op == Op::kAdd ? "+" : "-",
                       arg(1, w));
      break;
    case Op::kMul:
      if (src_s(x.in[0]) && src_s(x.in[1]) && w >= src_w(x.in[0]) + src_w(x.in[1])) {
        o += fmt::format("  assign {} = $signed({}) * $signed({});\n", name, tap(x.in[0]),
                         tap(x.in[1]));
      } else {
        o += fmt::format("  assign {} = {} * {};\n", name, arg(0, w), arg(1, w));
      }
      break;
    case Op::kSelect:
      o += fmt::format("  assign {} = {} ? {} : {};\n", name, truth(tap(x.in[0]), src_w(x.in[0])),
                       arg(1, w), arg(2, w));
      break;
    case Op::kMux: {
      const Edge& sel = x.in[0];
      const int ws = src_w(sel);
      const std::uint64_t reach =
          ws >= 63 ? ~std::uint64_t{0} : (std::uint64_t{1} << (src_s(sel) ? ws - 1 : ws));
      o += "  always @* begin\n";
      o += fmt::format("    case ({})\n", tap(sel));
      for (std::size_t k = 0; k + 1 < x.in.size() && k < reach; ++k) {
        o += fmt::format("      {}'d{}: {} = {};\n", ws, k, name, arg(k + 1, w));
      }
      o += fmt::format("      default: {} = {};\n    endcase\n  end\n", name, lit(0, w));
      break;
    }
    case Op::kEq:
    case Op::kLtu: {
      const int m = std::max(src_w(x.in[0]), src_w(x.in[1])) + 1;
      o += fmt::format("  assign {} = {} {} {};\n", name, arg_u(0, m),
                       x.op == Op::kEq ? "==" : "<", arg_u(1, m));
      break;
    }
    case Op::kAnd:
    case Op::kOr:
      o += fmt::format("  assign {} = {} {} {};\n", name, arg(0, w), x.op == Op::kAnd ? "&" : "|",
                       arg(1, w));
      break;
    case Op::kNot:
      o += fmt::format("  assign {} = ~{};\n", name, arg(0, w));
      break;
    case Op::kConcat:
      o += fmt::format("  assign {} = {{{}, {}}};\n", name, tap(x.in[0]), tap(x.in[1]));
      break;
    case Op::kRequant:
      requant_lines(o, tap(x.in[0]), src_w(x.in[0]), src_s(x.in[0]), x.frac_from, x.fmt, name,
                    name + "__q");
      break;
    case Op::kLutAddr: {
      const LutRom& lut = n_.luts()[x.param];
      // The table address is lut.addr_bits wide; widen or cut to the node.
      const std::string a = name + "__a";
      decl += fmt::format("  wire {}{};\n", range(lut.addr_bits), a);
      lut_address_lines(o, lut, tap(x.in[0]), src_w(x.in[0]), src_s(x.in[0]), a, name + "__l");
      o += fmt::format("  assign {} = {};\n", name, ext(a, lut.addr_bits, false, w));
      break;
    }
    case Op::kRom: {
      const RomTable& rom = n_.roms()[x.param];
      const Edge& addr = x.in[0];
      std::vector<int128> data(rom.data.size());
      for (std::size_t k = 0; k < data.size(); ++k) data[k] = normalize(rom.data[k], w, x.is_signed);
      if (cfg_.inline_roms || src_s(addr)) {
        o += "  always @* begin\n";
        case_table(o, "    ", tap(addr), src_w(addr), src_s(addr), name, w, data, false);
      } else {
        decl += fmt::format("  reg {}{}_mem [0:{}];\n", range(w), name, data.size() - 1);
        o += fmt::format("  initial $readmemh(\"{}.mem\", {}_mem);\n", rom.name, name);
        o += "  always @* begin\n";
        o += fmt::format("    {} = ({} < {}) ? {}_mem[{}] : {};\n", name,
                         ext_u(tap(addr), src_w(addr), false, src_w(addr) + 1),
                         lit(static_cast<int128>(data.size()), src_w(addr) + 1), name, tap(addr),
                         lit(0, w));
      }
      o += "  end\n";
      break;
    }
  }

  if (!x.regs.empty()) {
    const int R = static_cast<int>(x.regs.size());
    for (int d = 1; d <= R; ++d) {
      bool out = false;
      for (int mod = 0; mod <= kTop; ++mod) {
        if (mod != static_cast<int>(x.group) && uses_[mod].count({v, d})) out = true;
      }
      if (!out) decl += fmt::format("  reg {}{}_r{};\n", type, name, d);
    }
    o += "  always @(posedge clock) begin\n    if (reset) begin\n";
    for (int d = 1; d <= R; ++d) {
      o += fmt::format("      {}_r{} <= {};\n", name, d, lit(x.regs[d - 1], w));
    }
    o += "    end else begin\n";
    for (int d = 1; d <= R; ++d) {
      const std::string from = d == 1 ? name : fmt::format("{}_r{}", name, d - 1);
      o += fmt::format("      {}_r{} <= {};\n", name, d, from);
    }
    o += "    end\n  end\n";
  }
}

std::string Emitter::group_module(Group g) const {
  const int mod = static_cast<int>(g);
  std::vector<Tap> inputs, outputs;
  for (const Tap& t : uses_[mod]) {
    if (owner(t.src) != mod) inputs.push_back(t);
  }
  std::set<Tap> out_set;
  for (int other = 0; other <= kTop; ++other) {
    if (other == mod) continue;
    for (const Tap& t : uses_[other]) {
      if (owner(t.src) == mod) out_set.insert(t);
    }
  }
  outputs.assign(out_set.begin(), out_set.end());

  std::string o = fmt::format("// {} module.\n", module_of(g));
  o += fmt::format("module {} (\n  input wire clock,\n  input wire reset", module_of(g));
  for (const Tap& t : inputs) o += ",\n" + port_decl(t, false);
  for (const Tap& t : outputs) o += ",\n" + port_decl(t, true);
  o += "\n);\n";
  std::string decl, body;
  for (std::size_t v = 0; v < n_.size(); ++v) {
    if (owner(static_cast<int>(v)) == mod) emit_node(decl, body, static_cast<int>(v));
  }
  o += decl + body + "endmodule\n";
  return o;
}

std::string Emitter::top() const {
  const bool bus = n_.info.layered;
  std::vector<int> u_nodes;
  std::vector<const OutputPort*> y_ports;
  const OutputPort* dvo = nullptr;
  if (bus) {
    for (int j = 0; j < n_.info.inputs; ++j) {
      u_nodes.push_back(n_.inputs()[n_.input_index(fmt::format("u{}", j))]);
    }
    for (int i = 0; i < n_.info.outputs; ++i) {
      y_ports.push_back(&n_.outputs()[n_.output_index(fmt::format("y{}", i))]);
    }
    dvo = &n_.outputs()[n_.output_index("data_valid_out")];
  }
  int uw = 0, yw = 0;
  for (int v : u_nodes) uw += n_.node(v).width;
  for (const OutputPort* p : y_ports) yw += p->width;

  std::string o = "// Top level.\n";
  o += "module top (\n  input wire clock,\n  input wire reset";
  if (bus) {
    o += ",\n  input wire data_valid_in";
    o += fmt::format(",\n  input wire {}u", range(uw));
    o += fmt::format(",\n  output wire {}y", range(yw));
    o += ",\n  output wire data_valid_out";
  } else {
    for (int v : n_.inputs()) {
      o += fmt::format(",\n  input wire {}{}", decl_type(n_.node(v).is_signed, n_.node(v).width),
                       names_[v]);
    }
    for (const OutputPort& p : n_.outputs()) {
      o += fmt::format(",\n  output wire {}{}", decl_type(p.is_signed, p.width), p.name);
    }
  }
  o += "\n);\n";
  if (bus) {
    int lo = 0;
    for (int v : u_nodes) {
      const int w = n_.node(v).width;
      o += fmt::format("  wire {}{};\n", decl_type(true, w), names_[v]);
      o += fmt::format("  assign {} = u[{}:{}];\n", names_[v], lo + w - 1, lo);
      lo += w;
    }
  }
  std::set<Tap> wires;
  for (int mod = 0; mod < kTop; ++mod) {
    for (const Tap& t : uses_[mod]) {
      if (owner(t.src) != mod && owner(t.src) != kTop) wires.insert(t);
    }
  }
  for (const Tap& t : uses_[kTop]) {
    if (owner(t.src) != kTop) wires.insert(t);
  }
  for (const Tap& t : wires) {
    const NetNode& x = n_.node(t.src);
    o += fmt::format("  wire {}{};\n", decl_type(x.is_signed, x.width), tap(t));
  }
  for (Group g : kGroups) {
    const int mod = static_cast<int>(g);
    std::vector<Tap> ports;
    for (const Tap& t : uses_[mod]) {
      if (owner(t.src) != mod) ports.push_back(t);
    }
    std::set<Tap> outs;
    for (int other = 0; other <= kTop; ++other) {
      if (other == mod) continue;
      for (const Tap& t : uses_[other]) {
        if (owner(t.src) == mod) outs.insert(t);
      }
    }
    ports.insert(ports.end(), outs.begin(), outs.end());
    o += fmt::format("  {} {}_i (\n    .clock(clock),\n    .reset(reset)", module_of(g),
                     module_of(g));
    for (const Tap& t : ports) o += fmt::format(",\n    .{}({})", tap(t), tap(t));
    o += "\n  );\n";
  }
  if (bus) {
    std::string cat;
    for (auto it = y_ports.rbegin(); it != y_ports.rend(); ++it) {
      cat += (cat.empty() ? "" : ", ") + tap((*it)->edge);
    }
    o += fmt::format("  assign y = {{{}}};\n", cat);
    o += fmt::format("  assign data_valid_out = {};\n", tap(dvo->edge));
  } else {
    for (const OutputPort& p : n_.outputs()) {
      const NetNode& x = n_.node(p.edge.src);
      o += fmt::format("  assign {} = {};\n", p.name, ext(tap(p.edge), x.width, x.is_signed, p.width));
    }
  }
  o += "endmodule\n";
  return o;
}

std::string Emitter::activation_module(bool end) const {
  const LutRom& lut = n_.luts()[end ? end_lut_ : hidden_lut_];
  return emit_activation_rom(lut, cfg_, end ? "end_activation_rom" : "activation_rom", !end);
}

std::string Emitter::macc_module() const {
  const MaccMatch& m = maccs_.front();
  const NetNode& a = n_.node(m.a.src);
  const NetNode& b = n_.node(m.b.src);
  return emit_macc(FixedPointFormat{a.width, 0}, FixedPointFormat{b.width, 0},
                   n_.node(m.acc).width);
}

std::vector<std::pair<std::string, std::string>> Emitter::mem_files() const {
  std::vector<std::pair<std::string, std::string>> out;
  if (cfg_.inline_roms) return out;
  std::set<int> used;
  for (std::size_t v = 0; v < n_.size(); ++v) {
    const NetNode& x = n_.node(static_cast<int>(v));
    if (x.op == Op::kRom && act_of_[v] < 0 && !n_.node(x.in[0].src).is_signed) used.insert(x.param);
  }
  for (int r : used) {
    const RomTable& rom = n_.roms()[r];
    std::vector<int128> data(rom.data.size());
    for (std::size_t k = 0; k < data.size(); ++k) data[k] = rom.data[k];
    out.emplace_back(rom.name + ".mem", mem_file(data, rom.width));
  }
  if (hidden_lut_ >= 0) {
    const LutRom& lut = n_.luts()[hidden_lut_];
    out.emplace_back("activation_rom.mem", mem_file(lut.entries, lut.out_fmt.word_length));
  }
  if (end_lut_ >= 0) {
    const LutRom& lut = n_.luts()[end_lut_];
    out.emplace_back("end_activation_rom.mem", mem_file(lut.entries, lut.out_fmt.word_length));
  }
  return out;
}

std::vector<std::vector<double>> testbench_samples(const Netlist& n, const VerilogConfig& cfg) {
  if (!cfg.samples.empty()) return cfg.samples;
  return random_inputs(n.info.inputs, 16, 1);
}

std::pair<std::string, std::string> Emitter::testbench_data() const {
  const std::vector<std::vector<double>> samples = testbench_samples(n_, cfg_);
  std::vector<std::vector<int128>> expected = cfg_.expected;
  if (expected.empty()) expected = run_layered(n_, samples);
  if (expected.size() != samples.size()) {
    throw ValidationError(fmt::format("testbench has {} samples but {} expected outputs",
                                      samples.size(), expected.size()));
  }
  const std::vector<TimedInput> stim = layered_stimulus(n_, samples);
  std::string s, e;
  for (const TimedInput& t : stim) {
    std::vector<std::pair<int128, int>> fields;
    for (int j = 0; j < n_.info.inputs; ++j) {
      const int idx = n_.input_index(fmt::format("u{}", j));
      fields.emplace_back(t.values[idx], n_.node(n_.inputs()[idx]).width);
    }
    s += bus_hex(fields) + "\n";
  }
  for (const std::vector<int128>& y : expected) {
    std::vector<std::pair<int128, int>> fields;
    for (int i = 0; i < n_.info.outputs; ++i) {
      const OutputPort& p = n_.outputs()[n_.output_index(fmt::format("y{}", i))];
      fields.emplace_back(y.at(i), p.width);
    }
    e += bus_hex(fields) + "\n";
  }
  return {s, e};
}

std::string Emitter::testbench() const {
  const std::size_t samples = testbench_samples(n_, cfg_).size();
  int uw = 0, yw = 0;
  for (int j = 0; j < n_.info.inputs; ++j) {
    uw += n_.node(n_.inputs()[n_.input_index(fmt::format("u{}", j))]).width;
  }
  for (int i = 0; i < n_.info.outputs; ++i) {
    yw += n_.outputs()[n_.output_index(fmt::format("y{}", i))].width;
  }
  const std::uint64_t max_cycles =
      samples == 0 ? 1 : expected_output_cycle(n_, samples - 1) + 2;
  std::string o = "// Self-checking testbench: replays stimulus.hex and compares raw outputs\n"
                  "// with expected.hex.\n";
  o += "`timescale 1ns / 1ps\n";
  o += "module testbench;\n";
  o += fmt::format("  localparam SAMPLES = {};\n", samples);
  o += fmt::format("  localparam STREAMS = {};\n", n_.info.c_slow);
  o += fmt::format("  localparam RATIO = {};\n", n_.info.clock_ratio);
  o += fmt::format("  localparam MAX_CYCLES = {};\n", max_cycles);
  o += "  reg clock;\n  reg reset;\n  reg data_valid_in;\n";
  o += fmt::format("  reg {}u;\n  wire {}y;\n  wire data_valid_out;\n", range(uw), range(yw));
  o += fmt::format("  reg {}stimulus [0:SAMPLES-1];\n", range(uw));
  o += fmt::format("  reg {}expected [0:SAMPLES-1];\n", range(yw));
  o += "  integer cycle;\n  integer next_in;\n  integer next_out;\n  integer errors;\n\n";
  o += "  top dut (\n    .clock(clock),\n    .reset(reset),\n"
       "    .data_valid_in(data_valid_in),\n    .u(u),\n    .y(y),\n"
       "    .data_valid_out(data_valid_out)\n  );\n\n";
  o += "  function integer input_cycle;\n    input integer s;\n    begin\n"
       "      input_cycle = STREAMS * (s / STREAMS) * RATIO + s % STREAMS;\n"
       "    end\n  endfunction\n\n";
  o += "  always #5 clock = ~clock;\n\n";
  o += "  initial begin\n";
  o += "    $readmemh(\"stimulus.hex\", stimulus);\n";
  o += "    $readmemh(\"expected.hex\", expected);\n";
  o += "    clock = 0;\n    reset = 1;\n    data_valid_in = 0;\n    u = 0;\n";
  o += "    next_in = 0;\n    next_out = 0;\n    errors = 0;\n";
  o += "    @(posedge clock);\n    #1 reset = 0;\n";
  o += "    for (cycle = 0; cycle < MAX_CYCLES && next_out < SAMPLES; cycle = cycle + 1) begin\n";
  o += "      if (next_in < SAMPLES && cycle == input_cycle(next_in)) begin\n";
  o += "        data_valid_in = 1;\n        u = stimulus[next_in];\n"
       "        next_in = next_in + 1;\n";
  o += "      end else begin\n        data_valid_in = 0;\n        u = 0;\n      end\n";
  o += "      #1;\n";
  o += "      if (data_valid_out) begin\n";
  o += "        if (y !== expected[next_out]) begin\n          errors = errors + 1;\n";
  o += "          $display(\"MISMATCH sample %0d: got %h expected %h\", next_out, y, "
       "expected[next_out]);\n";
  o += "        end\n        next_out = next_out + 1;\n      end\n";
  o += "      @(posedge clock);\n      #1;\n    end\n";
  o += "    if (errors == 0 && next_out == SAMPLES) $display(\"PASS %0d samples\", SAMPLES);\n";
  o += "    else $display(\"FAIL %0d mismatches, %0d of %0d outputs\", errors, next_out, "
       "SAMPLES);\n";
  o += "    $finish;\n  end\nendmodule\n";
  return o;
}

void require_layered(const Netlist& n, const char* what) {
  if (!n.info.layered) throw ValidationError(fmt::format("{} needs a layered netlist", what));
}

}  // namespace

const std::string* VerilogProject::find(std::string_view name) const {
  for (const auto& [file, text] : files) {
    if (file == name) return &text;
  }
  return nullptr;
}

std::size_t VerilogProject::verilog_file_count() const {
  return static_cast<std::size_t>(std::count_if(files.begin(), files.end(), [](const auto& f) {
    return f.first.size() > 2 && f.first.ends_with(".v");
  }));
}

std::string emit_top(const Netlist& n, const VerilogConfig& cfg) { return Emitter(n, cfg).top(); }
std::string emit_input_layer(const Netlist& n, const VerilogConfig& cfg) {
  return Emitter(n, cfg).group_module(Group::kInputLayer);
}
std::string emit_hidden_layer(const Netlist& n, const VerilogConfig& cfg) {
  return Emitter(n, cfg).group_module(Group::kHiddenLayer);
}
std::string emit_output_layer(const Netlist& n, const VerilogConfig& cfg) {
  return Emitter(n, cfg).group_module(Group::kOutputLayer);
}
std::string emit_controller(const Netlist& n, const VerilogConfig& cfg) {
  return Emitter(n, cfg).group_module(Group::kController);
}

std::string emit_activation_rom(const LutRom& lut, const VerilogConfig& cfg,
                                std::string_view module_name, bool registered) {
  if (!lut.materialized()) {
    throw ValidationError(fmt::format("activation table of 2^{} entries is not materialized",
                                      lut.addr_bits));
  }
  const int wi = lut.in_fmt.word_length, wo = lut.out_fmt.word_length;
  std::string o = fmt::format("// {} table: {} entries over [{}, {}), input {}, output {}.\n",
                              activation_name(lut.kind), lut.size(), lut.lo, lut.hi,
                              lut.in_fmt.to_string(), lut.out_fmt.to_string());
  o += fmt::format("module {} (\n", module_name);
  if (registered) o += "  input wire clock,\n  input wire reset,\n";
  o += fmt::format("  input wire signed [{}:0] x,\n", wi - 1);
  o += fmt::format("  output reg signed [{}:0] y\n);\n", wo - 1);
  o += fmt::format("  wire [{}:0] addr;\n", lut.addr_bits - 1);
  lut_address_lines(o, lut, "x", wi, true, "addr", "addr");
  const std::string value = registered ? "value" : "y";
  if (registered) o += fmt::format("  reg signed [{}:0] value;\n", wo - 1);
  if (cfg.inline_roms) {
    o += "  always @* begin\n";
    case_table(o, "    ", "addr", lut.addr_bits, false, value, wo, lut.entries, true);
    o += "  end\n";
  } else {
    o += fmt::format("  reg [{}:0] rom_data [0:{}];\n", wo - 1, lut.entries.size() - 1);
    o += fmt::format("  initial $readmemh(\"{}.mem\", rom_data);\n", module_name);
    o += fmt::format("  always @* {} = rom_data[addr];\n", value);
  }
  if (registered) {
    o += "  always @(posedge clock) begin\n";
    o += fmt::format("    if (reset) y <= {};\n    else y <= value;\n  end\n", lit(0, wo));
  }
  o += "endmodule\n";
  return o;
}

std::string emit_macc(const FixedPointFormat& a, const FixedPointFormat& b, int acc_width) {
  std::string o = "// Signed multiplier with STAGES product registers feeding an accumulator:\n"
                  "// acc <= en ? (first ? init : acc) + a * b : acc.\n";
  o += "module macc #(\n";
  o += fmt::format("  parameter A_W = {},\n  parameter B_W = {},\n", a.word_length, b.word_length);
  o += fmt::format("  parameter ACC_W = {},\n  parameter STAGES = 0\n) (\n", acc_width);
  o += "  input wire clock,\n  input wire reset,\n";
  o += "  input wire signed [A_W-1:0] a,\n  input wire signed [B_W-1:0] b,\n";
  o += "  input wire first,\n  input wire en,\n";
  o += "  input wire signed [ACC_W-1:0] init,\n";
  o += "  output reg signed [ACC_W-1:0] acc\n);\n";
  o += "  localparam P_W = A_W + B_W;\n";
  o += "  localparam DEPTH = (STAGES == 0) ? 1 : STAGES;\n";
  o += "  wire signed [P_W-1:0] product = a * b;\n";
  o += "  reg signed [P_W-1:0] pipe [0:DEPTH-1];\n";
  o += "  integer s;\n";
  o += "  always @(posedge clock) begin\n";
  o += "    if (reset) begin\n";
  o += "      for (s = 0; s < DEPTH; s = s + 1) pipe[s] <= 0;\n";
  o += "    end else begin\n";
  o += "      pipe[0] <= product;\n";
  o += "      for (s = 1; s < DEPTH; s = s + 1) pipe[s] <= pipe[s - 1];\n";
  o += "    end\n  end\n";
  o += "  wire signed [P_W-1:0] term = (STAGES == 0) ? product : pipe[DEPTH-1];\n";
  o += "  wire signed [ACC_W-1:0] base = first ? init : acc;\n";
  o += "  wire signed [ACC_W-1:0] sum = base + term;\n";
  o += "  always @(posedge clock) begin\n";
  o += "    if (reset) acc <= 0;\n";
  o += "    else if (en) acc <= sum;\n";
  o += "  end\nendmodule\n";
  return o;
}

std::string emit_testbench(const Netlist& n, const VerilogConfig& cfg) {
  require_layered(n, "testbench");
  return Emitter(n, cfg).testbench();
}

VerilogProject emit_project(const Netlist& n, const VerilogConfig& cfg) {
  const Emitter e(n, cfg);
  VerilogProject p;
  p.files.emplace_back("top.v", e.top());
  p.files.emplace_back("input_layer.v", e.group_module(Group::kInputLayer));
  p.files.emplace_back("hidden_layer.v", e.group_module(Group::kHiddenLayer));
  p.files.emplace_back("output_layer.v", e.group_module(Group::kOutputLayer));
  if (e.has_activation(false)) p.files.emplace_back("activation_rom.v", e.activation_module(false));
  if (e.has_activation(true)) {
    p.files.emplace_back("end_activation_rom.v", e.activation_module(true));
  }
  if (e.has_maccs()) p.files.emplace_back("macc.v", e.macc_module());
  p.files.emplace_back("controller.v", e.group_module(Group::kController));
  if (n.info.layered) {
    p.files.emplace_back("testbench.v", e.testbench());
    auto [stim, expected] = e.testbench_data();
    p.files.emplace_back("stimulus.hex", std::move(stim));
    p.files.emplace_back("expected.hex", std::move(expected));
  }
  for (auto& f : e.mem_files()) p.files.push_back(std::move(f));
  return p;
}

void write_project(const VerilogProject& p, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError(fmt::format("cannot create {}: {}", dir.string(), ec.message()));
  for (const auto& [name, text] : p.files) {
    const std::filesystem::path path = dir / name;
    std::ofstream out(path, std::ios::binary);
    out << text;
    out.close();
    if (!out) throw IoError(fmt::format("cannot write {}", path.string()));
  }
}

std::string bus_hex(const std::vector<std::pair<int128, int>>& fields) {
  BigInt acc = 0;
  int shift = 0;
  for (const auto& [v, w] : fields) {
    BigInt x = big(v) % (BigInt(1) << w);
    if (x < 0) x += BigInt(1) << w;
    acc |= x << shift;
    shift += w;
  }
  return hex_of(acc, std::max(shift, 1));
}

namespace {

struct Token {
  std::string text;
  int line = 0;
};

std::vector<Token> tokenize(std::string_view src) {
  std::vector<Token> out;
  int line = 1;
  std::size_t i = 0;
  while (i < src.size()) {
    const char c = src[i];
    if (c == '\n') {
      ++line;
      ++i;
    } else if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
    } else if (src.substr(i, 2) == "//" || c == '`') {
      while (i < src.size() && src[i] != '\n') ++i;
    } else if (src.substr(i, 2) == "/*") {
      const std::size_t end = src.find("*/", i + 2);
      for (std::size_t k = i; k < std::min(end, src.size()); ++k) line += src[k] == '\n';
      i = end == std::string_view::npos ? src.size() : end + 2;
    } else if (c == '"') {
      std::size_t j = i + 1;
      while (j < src.size() && src[j] != '"') ++j;
      out.push_back({std::string(src.substr(i, j + 1 - i)), line});
      i = j + 1;
    } else if (std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '$' || c == '\'') {
      std::size_t j = i;
      while (j < src.size() && (std::isalnum(static_cast<unsigned char>(src[j])) ||
                                src[j] == '_' || src[j] == '$' || src[j] == '\'')) {
        ++j;
      }
      out.push_back({std::string(src.substr(i, j - i)), line});
      i = j;
    } else {
      out.push_back({std::string(1, c), line});
      ++i;
    }
  }
  return out;
}

bool is_name(const std::string& t) {
  return !t.empty() && (std::isalpha(static_cast<unsigned char>(t[0])) || t[0] == '_');
}

const std::set<std::string, std::less<>>& keywords() {
  static const std::set<std::string, std::less<>> words{
      "module",   "endmodule", "input",   "output",     "inout",   "wire",     "reg",
      "integer",  "signed",    "assign",  "always",     "initial", "begin",    "end",
      "if",       "else",      "case",    "endcase",    "default", "posedge",  "negedge",
      "or",       "for",       "function", "endfunction", "localparam", "parameter"};
  return words;
}

struct ModuleDef {
  std::string name;
  std::set<std::string> ports;
  std::set<std::string> params;
  std::size_t body_begin = 0;
  std::size_t body_end = 0;
};

// Index just past the bracket matching the one at i.
std::size_t skip_group(const std::vector<Token>& t, std::size_t i) {
  int depth = 0;
  for (; i < t.size(); ++i) {
    if (t[i].text == "(" || t[i].text == "[" || t[i].text == "{") ++depth;
    if (t[i].text == ")" || t[i].text == "]" || t[i].text == "}") {
      if (--depth == 0) return i + 1;
    }
  }
  return i;
}

// Names at depth 1 of a parenthesised list that are followed by ',' or ')'
// or, for parameters, by '='.
std::set<std::string> list_names(const std::vector<Token>& t, std::size_t open,
                                 std::size_t close, bool params) {
  std::set<std::string> names;
  int depth = 0;
  for (std::size_t i = open; i < close; ++i) {
    const std::string& s = t[i].text;
    if (s == "(" || s == "[" || s == "{") ++depth;
    if (s == ")" || s == "]" || s == "}") --depth;
    if (depth != 1 || !is_name(s) || keywords().count(s) || i + 1 >= close) continue;
    const std::string& next = t[i + 1].text;
    if (params ? next == "=" : (next == "," || next == ")")) names.insert(s);
  }
  return names;
}

}  // namespace

std::vector<std::string> verify_project(const VerilogProject& p) {
  std::vector<std::string> problems;
  std::map<std::string, ModuleDef> defs;
  struct Instance {
    std::string file, module, name;
    std::set<std::string> ports, params;
    int line;
  };
  std::vector<Instance> instances;

  for (const auto& [file, text] : p.files) {
    if (!file.ends_with(".v")) continue;
    const std::vector<Token> t = tokenize(text);
    auto report = [&](int line, const std::string& what) {
      problems.push_back(fmt::format("{}:{}: {}", file, line, what));
    };
    int paren = 0, square = 0, curly = 0;
    for (const Token& k : t) {
      paren += k.text == "(" ? 1 : k.text == ")" ? -1 : 0;
      square += k.text == "[" ? 1 : k.text == "]" ? -1 : 0;
      curly += k.text == "{" ? 1 : k.text == "}" ? -1 : 0;
      if (paren < 0 || square < 0 || curly < 0) {
        report(k.line, "unbalanced bracket");
        paren = square = curly = 0;
      }
    }
    if (paren || square || curly) report(t.empty() ? 0 : t.back().line, "unclosed bracket");

    std::size_t i = 0;
    while (i < t.size()) {
      if (t[i].text != "module") {
        report(t[i].line, fmt::format("'{}' outside a module", t[i].text));
        ++i;
        continue;
      }
      ModuleDef def;
      if (i + 1 >= t.size() || !is_name(t[i + 1].text)) {
        report(t[i].line, "module without a name");
        break;
      }
      def.name = t[i + 1].text;
      std::size_t j = i + 2;
      if (j < t.size() && t[j].text == "#") {
        const std::size_t close = skip_group(t, j + 1);
        def.params = list_names(t, j + 1, close, true);
        j = close;
      }
      if (j < t.size() && t[j].text == "(") {
        const std::size_t close = skip_group(t, j);
        def.ports = list_names(t, j, close, false);
        j = close;
      }
      if (j >= t.size() || t[j].text != ";") report(t[i].line, "module header not closed by ';'");
      def.body_begin = j + 1;
      std::size_t k = def.body_begin;
      int begins = 0, cases = 0, functions = 0;
      for (; k < t.size() && t[k].text != "endmodule"; ++k) {
        const std::string& s = t[k].text;
        if (s == "module") {
          report(t[k].line, "nested module");
          break;
        }
        if (s == "begin") ++begins;
        if (s == "end") --begins;
        if (s == "case") ++cases;
        if (s == "endcase") --cases;
        if (s == "function") ++functions;
        if (s == "endfunction") --functions;
        if (begins < 0 || cases < 0 || functions < 0) {
          report(t[k].line, "unbalanced block keyword");
          begins = std::max(begins, 0);
          cases = std::max(cases, 0);
          functions = std::max(functions, 0);
        }
      }
      if (k >= t.size() || t[k].text != "endmodule") {
        report(t[i].line, fmt::format("module {} has no endmodule", def.name));
      }
      if (begins != 0) report(t[i].line, fmt::format("begin/end unbalanced in {}", def.name));
      if (cases != 0) report(t[i].line, fmt::format("case/endcase unbalanced in {}", def.name));
      if (functions != 0) {
        report(t[i].line, fmt::format("function/endfunction unbalanced in {}", def.name));
      }
      def.body_end = std::min(k, t.size());

      // Instances: <module> [#(...)] <name> ( ... ) ;
      bool statement_start = true;
      for (std::size_t q = def.body_begin; q < def.body_end; ++q) {
        const std::string& s = t[q].text;
        const bool start = statement_start;
        statement_start = s == ";" || s == "begin" || s == "end" || s == "endcase";
        if (!start || !is_name(s) || keywords().count(s) || s[0] == '$') continue;
        std::size_t r = q + 1;
        Instance inst{file, s, "", {}, {}, t[q].line};
        if (r < def.body_end && t[r].text == "#") {
          const std::size_t close = skip_group(t, r + 1);
          for (std::size_t z = r + 1; z + 1 < close; ++z) {
            if (t[z].text == "." && is_name(t[z + 1].text)) inst.params.insert(t[z + 1].text);
          }
          r = close;
        }
        if (r + 1 >= def.body_end || !is_name(t[r].text) || t[r + 1].text != "(") continue;
        inst.name = t[r].text;
        const std::size_t close = skip_group(t, r + 1);
        int depth = 0;
        std::vector<std::string> connected;
        for (std::size_t z = r + 1; z < close; ++z) {
          if (t[z].text == "(") ++depth;
          if (t[z].text == ")") --depth;
          if (depth == 1 && t[z].text == "." && z + 1 < close) connected.push_back(t[z + 1].text);
        }
        for (const std::string& c : connected) {
          if (!inst.ports.insert(c).second) report(t[q].line, fmt::format("port {} connected twice", c));
        }
        instances.push_back(std::move(inst));
        q = close - 1;
      }
      if (!defs.emplace(def.name, def).second) {
        report(t[i].line, fmt::format("module {} defined twice", def.name));
      }
      i = k + 1;
    }
  }
  for (const Instance& inst : instances) {
    auto it = defs.find(inst.module);
    if (it == defs.end()) {
      problems.push_back(fmt::format("{}:{}: instance {} of undefined module {}", inst.file,
                                     inst.line, inst.name, inst.module));
      continue;
    }
    if (inst.ports != it->second.ports) {
      problems.push_back(fmt::format("{}:{}: instance {} connects {} ports, {} declares {}",
                                     inst.file, inst.line, inst.name, inst.ports.size(),
                                     inst.module, it->second.ports.size()));
    }
    for (const std::string& prm : inst.params) {
      if (!it->second.params.count(prm)) {
        problems.push_back(fmt::format("{}:{}: instance {} sets unknown parameter {}", inst.file,
                                       inst.line, inst.name, prm));
      }
    }
  }
  return problems;
}

std::map<std::string, int> declared_widths(std::string_view text) {
  static const std::regex module_re(R"(^\s*module\s+([A-Za-z_]\w*))");
  static const std::regex decl_re(
      R"(^\s*(?:input|output|inout|wire|reg)\s+(?:(?:wire|reg)\s+)?(?:signed\s+)?(?:\[(\d+):0\]\s*)?([A-Za-z_]\w*))");
  std::map<std::string, int> out;
  std::string module;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    const std::string line(text.substr(pos, end - pos));
    std::smatch m;
    if (std::regex_search(line, m, module_re)) {
      module = m[1];
    } else if (std::regex_search(line, m, decl_re)) {
      const int w = m[1].matched ? std::stoi(m[1]) + 1 : 1;
      out[module + "." + m[2].str()] = w;
    }
    pos = end + 1;
  }
  return out;
}

namespace {

int128 parse_hex(std::string_view digits, int width, bool is_signed) {
  uint128 v = 0;
  for (char c : digits) {
    if (c == '_') continue;
    const int d = std::isdigit(static_cast<unsigned char>(c))
                      ? c - '0'
                      : std::tolower(static_cast<unsigned char>(c)) - 'a' + 10;
    if (d < 0 || d > 15) throw ValidationError(fmt::format("bad hex digit '{}'", c));
    v = (v << 4) | static_cast<uint128>(d);
  }
  return normalize(static_cast<int128>(v), width, is_signed);
}

}  // namespace

std::vector<int128> parse_rom_module(std::string_view text, std::string_view module_name,
                                     int width, bool is_signed) {
  const std::string head = fmt::format("module {}", module_name);
  std::size_t begin = text.find(head + " ");
  if (begin == std::string_view::npos) begin = text.find(head + "(");
  if (begin == std::string_view::npos) begin = text.find(head + "\n");
  if (begin == std::string_view::npos) {
    throw ValidationError(fmt::format("module {} not found", module_name));
  }
  const std::size_t end = text.find("endmodule", begin);
  const std::string body(text.substr(begin, end - begin));
  static const std::regex item_re(R"((\d+)'d(\d+)\s*:\s*[A-Za-z_]\w*\s*=\s*\d+'h([0-9a-fA-F_]+)\s*;)");
  std::map<std::uint64_t, int128> items;
  int addr_bits = -1;
  for (auto it = std::sregex_iterator(body.begin(), body.end(), item_re);
       it != std::sregex_iterator(); ++it) {
    const std::smatch& m = *it;
    addr_bits = std::stoi(m[1]);
    items[std::stoull(m[2])] = parse_hex(m[3].str(), width, is_signed);
  }
  if (addr_bits < 0) throw ValidationError(fmt::format("module {} has no case table", module_name));
  if (addr_bits > 24) throw ValidationError("case table address too wide to expand");
  std::vector<int128> data(std::size_t{1} << addr_bits, 0);
  for (const auto& [a, v] : items) {
    if (a < data.size()) data[a] = v;
  }
  return data;
}

std::vector<int128> parse_mem_file(std::string_view text, int width, bool is_signed) {
  std::vector<int128> out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    while (!line.empty() && std::isspace(static_cast<unsigned char>(line.back()))) {
      line.remove_suffix(1);
    }
    if (!line.empty()) out.push_back(parse_hex(line, width, is_signed));
    pos = end + 1;
  }
  return out;
}

}  // namespace sshdl
