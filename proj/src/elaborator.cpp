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

#include <map>
#include <queue>
#include <set>

#include <fmt/format.h>

#include "sshdl/errors.hpp"

namespace sshdl {

std::string_view phase_name(Phase p) {
  switch (p) {
    case Phase::kIdle: return "IDLE";
    case Phase::kLoad: return "LOAD";
    case Phase::kMacc: return "MACC";
    case Phase::kRequant: return "REQ";
    case Phase::kActivate: return "ACT";
    case Phase::kOut: return "OUT";
  }
  return "?";
}

ControllerFsm::ControllerFsm(int layers, int macc_cycles, int mult_stages)
    : layers_(layers), macc_cycles_(macc_cycles), mult_stages_(mult_stages) {
  if (layers < 1 || macc_cycles < 1 || mult_stages < 0) {
    throw ValidationError(fmt::format(
        "controller needs layers >= 1, macc cycles >= 1, stages >= 0 (got {}, {}, {})",
        layers, macc_cycles, mult_stages));
  }
}

int ControllerFsm::layer_bits() const { return std::max(1, ceil_log2(layers_)); }
int ControllerFsm::cycle_bits() const { return std::max(1, ceil_log2(macc_phase_cycles())); }

ControllerState ControllerFsm::next(const ControllerState& s, bool valid_in,
                                    bool reset) const {
  if (reset) return initial();
  const bool accept = valid_in && (s.phase == Phase::kIdle || s.phase == Phase::kOut);
  const bool cycle_last = s.cycle == macc_phase_cycles() - 1;
  const bool layer_last = s.layer == layers_ - 1;
  ControllerState n = s;
  switch (s.phase) {
    case Phase::kIdle:
    case Phase::kOut:
      n.phase = accept ? Phase::kLoad : Phase::kIdle;
      break;
    case Phase::kLoad:
      n.phase = Phase::kMacc;
      break;
    case Phase::kMacc:
      n.phase = cycle_last ? Phase::kRequant : Phase::kMacc;
      break;
    case Phase::kRequant:
      n.phase = Phase::kActivate;
      break;
    case Phase::kActivate:
      n.phase = layer_last ? Phase::kOut : Phase::kMacc;
      break;
  }
  const int layer_mask = (1 << layer_bits()) - 1;
  if (s.phase == Phase::kLoad) {
    n.layer = 0;
  } else if (s.phase == Phase::kActivate) {
    n.layer = (s.layer + 1) & layer_mask;
  }
  n.cycle = s.phase == Phase::kMacc && !cycle_last ? s.cycle + 1 : 0;
  return n;
}

ControllerOutputs ControllerFsm::outputs(const ControllerState& s) const {
  ControllerOutputs o;
  const bool macc = s.phase == Phase::kMacc;
  o.first = macc && s.cycle == mult_stages_;
  o.enable = macc && s.cycle >= mult_stages_;
  o.load = s.phase == Phase::kLoad;
  o.activate = s.phase == Phase::kActivate;
  o.valid_out = s.phase == Phase::kOut;
  return o;
}

std::vector<ControllerState> ControllerFsm::reachable_states() const {
  std::set<ControllerState> seen{initial()};
  std::queue<ControllerState> work;
  work.push(initial());
  while (!work.empty()) {
    const ControllerState s = work.front();
    work.pop();
    for (bool dvi : {false, true}) {
      const ControllerState n = next(s, dvi, false);
      if (seen.insert(n).second) work.push(n);
    }
  }
  return {seen.begin(), seen.end()};
}

ControllerFsm build_controller(int layers, int macc_cycles, const Schedule& s) {
  return ControllerFsm(layers, macc_cycles, s.mult_stages);
}

int latency_formula(int layers, int macc_cycles, int mult_stages) {
  return 1 + layers * (macc_cycles + mult_stages + 2) + 1;
}

namespace {

Edge now(int id) { return Edge{id, 0}; }
Edge prev(int id) { return Edge{id, 1}; }

}  // namespace

ControllerSignals lower_controller(Netlist& n, const ControllerFsm& fsm, Edge valid_in) {
  constexpr Group g = Group::kController;
  const int pb = 3, kb = fsm.layer_bits(), cb = fsm.cycle_bits();
  auto cst = [&](int128 v, int w) { return n.add_const(v, w, false, g); };
  auto op = [&](Op o, std::vector<Edge> in, int w, std::string name = {}) {
    return n.add_op(o, std::move(in), w, false, g, std::move(name));
  };

  ControllerSignals sig;
  sig.phase = op(Op::kMux, {}, pb, "ctl_phase");
  sig.layer = op(Op::kSelect, {}, kb, "ctl_layer");
  sig.cycle = op(Op::kSelect, {}, cb, "ctl_cycle");
  for (int id : {sig.phase, sig.layer, sig.cycle}) n.node(id).regs = {0};

  std::vector<int> is(kPhaseCount), code(kPhaseCount);
  for (int p = 0; p < kPhaseCount; ++p) {
    code[p] = cst(p, pb);
    is[p] = op(Op::kEq, {prev(sig.phase), now(code[p])}, 1,
               fmt::format("ctl_is_{}", phase_name(static_cast<Phase>(p))));
  }
  auto phase_is = [&](Phase p) { return now(is[static_cast<int>(p)]); };
  auto phase_code = [&](Phase p) { return now(code[static_cast<int>(p)]); };

  const int waiting = op(Op::kOr, {phase_is(Phase::kIdle), phase_is(Phase::kOut)}, 1);
  const int accept = op(Op::kAnd, {valid_in, now(waiting)}, 1, "ctl_accept");
  const int cycle_last =
      op(Op::kEq, {prev(sig.cycle), now(cst(fsm.macc_phase_cycles() - 1, cb))}, 1);
  const int layer_last = op(Op::kEq, {prev(sig.layer), now(cst(fsm.layers() - 1, kb))}, 1);
  const int from_wait =
      op(Op::kSelect, {now(accept), phase_code(Phase::kLoad), phase_code(Phase::kIdle)}, pb);
  const int from_macc = op(Op::kSelect, {now(cycle_last), phase_code(Phase::kRequant),
                                         phase_code(Phase::kMacc)}, pb);
  const int from_act = op(Op::kSelect, {now(layer_last), phase_code(Phase::kOut),
                                        phase_code(Phase::kMacc)}, pb);
  n.node(sig.phase).in = {prev(sig.phase),         now(from_wait),
                          phase_code(Phase::kMacc), now(from_macc),
                          phase_code(Phase::kActivate), now(from_act),
                          now(from_wait)};

  const int layer_inc = op(Op::kAdd, {prev(sig.layer), now(cst(1, kb))}, kb);
  const int layer_step =
      op(Op::kSelect, {phase_is(Phase::kActivate), now(layer_inc), prev(sig.layer)}, kb);
  n.node(sig.layer).in = {phase_is(Phase::kLoad), now(cst(0, kb)), now(layer_step)};

  const int cycle_inc = op(Op::kAdd, {prev(sig.cycle), now(cst(1, cb))}, cb);
  const int counting = op(Op::kAnd, {phase_is(Phase::kMacc),
                                     now(op(Op::kNot, {now(cycle_last)}, 1))}, 1);
  n.node(sig.cycle).in = {now(counting), now(cycle_inc), now(cst(0, cb))};

  const int s = fsm.mult_stages();
  sig.first = op(Op::kAnd, {phase_is(Phase::kMacc),
                            now(op(Op::kEq, {prev(sig.cycle), now(cst(s, cb))}, 1))},
                 1, "ctl_first");
  if (s == 0) {
    sig.enable = is[static_cast<int>(Phase::kMacc)];
  } else {
    const int early = op(Op::kLtu, {prev(sig.cycle), now(cst(s, cb))}, 1);
    sig.enable = op(Op::kAnd, {phase_is(Phase::kMacc), now(op(Op::kNot, {now(early)}, 1))},
                    1, "ctl_enable");
  }
  sig.load = is[static_cast<int>(Phase::kLoad)];
  sig.activate = is[static_cast<int>(Phase::kActivate)];
  sig.valid_out = is[static_cast<int>(Phase::kOut)];
  n.info.controller_outputs = {sig.first, sig.enable, sig.load, sig.activate, sig.valid_out};
  return sig;
}

Netlist controller_netlist(const ControllerFsm& fsm) {
  Netlist n;
  const int dvi = n.add_input("data_valid_in", 1, false, Group::kController);
  const ControllerSignals sig = lower_controller(n, fsm, now(dvi));
  n.add_output("phase", prev(sig.phase));
  n.add_output("layer", prev(sig.layer));
  n.add_output("cycle", prev(sig.cycle));
  n.add_output("first", now(sig.first));
  n.add_output("enable", now(sig.enable));
  n.add_output("load", now(sig.load));
  n.add_output("activate", now(sig.activate));
  n.add_output("valid_out", now(sig.valid_out));
  n.validate();
  return n;
}

MaccCell add_macc_cell(Netlist& n, Edge a, Edge b, Edge first, Edge enable, Edge init,
                       int acc_width, int stages, Group g, int cell_index,
                       const std::string& prefix) {
  MaccCell c;
  const int wa = n.node(a.src).width, wb = n.node(b.src).width;
  c.mul = n.add_op(Op::kMul, {a, b}, wa + wb, true, g, prefix + "_mul");
  n.node(c.mul).regs.assign(stages, 0);
  c.acc = n.add_op(Op::kSelect, {}, acc_width, true, g, prefix + "_acc");
  n.node(c.acc).regs = {0};
  c.pre = n.add_op(Op::kSelect, {first, init, prev(c.acc)}, acc_width, true, g,
                   prefix + "_pre");
  c.sum = n.add_op(Op::kAdd, {now(c.pre), Edge{c.mul, stages}}, acc_width, true, g,
                   prefix + "_sum");
  n.node(c.acc).in = {enable, now(c.sum), prev(c.acc)};
  for (int id : {c.mul, c.pre, c.sum, c.acc}) {
    n.node(id).cell = Cell::kMacc;
    n.node(id).cell_index = cell_index;
  }
  return c;
}

Netlist macc_netlist(const FixedPointFormat& a, const FixedPointFormat& b, int acc_width,
                     int stages) {
  Netlist n;
  constexpr Group g = Group::kHiddenLayer;
  const int ia = n.add_input("a", a.word_length, true, g);
  const int ib = n.add_input("b", b.word_length, true, g);
  const int first = n.add_input("first", 1, false, g);
  const int en = n.add_input("en", 1, false, g);
  const int zero = n.add_const(0, acc_width, true, g);
  const MaccCell c =
      add_macc_cell(n, now(ia), now(ib), now(first), now(en), now(zero), acc_width, stages, g,
                    0, "macc");
  n.add_output("acc", prev(c.acc));
  n.validate();
  return n;
}

namespace {

// Balanced adder tree.
int add_tree(Netlist& n, std::vector<Edge> terms, int width, Group g,
             const std::string& name) {
  if (terms.size() == 1) {
    return n.add_op(Op::kAdd, {terms[0], now(n.add_const(0, width, true, g))}, width, true,
                    g, name);
  }
  while (terms.size() > 1) {
    std::vector<Edge> next;
    for (std::size_t i = 0; i + 1 < terms.size(); i += 2) {
      const bool last = terms.size() == 2;
      next.push_back(now(n.add_op(Op::kAdd, {terms[i], terms[i + 1]}, width, true, g,
                                  last ? name : std::string{})));
    }
    if (terms.size() % 2 == 1) next.push_back(terms.back());
    terms = std::move(next);
  }
  return terms[0].src;
}

}  // namespace

Netlist elaborate(const StateSpaceModel& m, const Schedule& sched, const FormatAssignment& f,
                  const ActivationTableConfig& lut_cfg) {
  const LayeredNetwork net = extract_layered(m);
  const QuantizedNetwork q = quantize_network(net, f);
  const int L = net.inputs, M = net.nodes, N = net.layers, P = net.outputs;
  const int K = net.operand_width;
  const int p = sched.multipliers_per_node == 0 ? M : sched.multipliers_per_node;
  if (p < 1 || p > M) {
    throw ScheduleError(fmt::format("multipliers per node {} outside [1, {}]", p, M));
  }
  if (sched.mult_stages < 0) throw ScheduleError("multiplier stages must be >= 0");
  const int stages = sched.mult_stages;
  const int C = (K + p - 1) / p;
  if (q.accumulator_width > kMaxWordLength || q.output_accumulator_width > kMaxWordLength) {
    throw ValidationError(fmt::format(
        "accumulator width {} exceeds the {}-bit netlist limit",
        std::max(q.accumulator_width, q.output_accumulator_width), kMaxWordLength));
  }
  const ControllerFsm fsm(N, C, stages);
  const int base = fsm.latency();
  const int ratio = sched.clock_ratio == 0 ? base : sched.clock_ratio;
  if (ratio < base) {
    throw ScheduleError(fmt::format("clock ratio {} is below the latency of {} cycles",
                                    ratio, base));
  }

  Netlist n;
  NetlistInfo& info = n.info;
  info.layered = true;
  info.inputs = L;
  info.nodes = M;
  info.layers = N;
  info.outputs = P;
  info.operand_width = K;
  info.multipliers_per_node = p;
  info.mult_stages = stages;
  info.macc_cycles = C;
  info.base_latency = base;
  info.clock_ratio = ratio;
  info.hidden_activation = net.hidden_activation;
  info.output_activation = net.output_activation;
  info.formats = f;
  info.accumulator_width = q.accumulator_width;
  info.output_accumulator_width = q.output_accumulator_width;

  auto make_lut = [&](const FixedPointFormat& out, const char* what) {
    if (lut_cfg.addr_bits > kMaxMaterializedAddrBits) {
      throw ValidationError(fmt::format("{} activation table of 2^{} entries is too large",
                                        what, lut_cfg.addr_bits));
    }
    return gen_activation_lut(ActivationKind::kTanh, f.accumulator, out, lut_cfg.addr_bits,
                              lut_cfg.lo, lut_cfg.hi);
  };
  auto rom_of = [](const LutRom& lut, std::string name) {
    return RomTable{std::move(name), lut.out_fmt.word_length, true, lut.addr_bits,
                    lut.entries};
  };
  int act_rom = -1, end_rom = -1;
  if (net.hidden_activation == ActivationKind::kTanh) {
    info.hidden_lut = n.add_lut(make_lut(f.state, "hidden"));
    act_rom = n.add_rom(rom_of(n.luts()[info.hidden_lut], "activation"));
  }
  if (net.output_activation == ActivationKind::kTanh) {
    info.end_lut = n.add_lut(make_lut(f.output, "output"));
    end_rom = n.add_rom(rom_of(n.luts()[info.end_lut], "end_activation"));
  }

  const int wx = f.state.word_length, ww = f.weight.word_length;
  const int AW = q.accumulator_width, OAW = q.output_accumulator_width;

  // Ports and controller.
  const int dvi = n.add_input("data_valid_in", 1, false, Group::kController);
  std::vector<int> u(L);
  for (int j = 0; j < L; ++j) {
    u[j] = n.add_input(fmt::format("u{}", j), f.input.word_length, true, Group::kInputLayer);
  }
  const ControllerSignals ctl = lower_controller(n, fsm, now(dvi));

  // Input layer: capture on data_valid_in, convert to the state format.
  std::vector<int> u_state(L);
  for (int j = 0; j < L; ++j) {
    const int reg = n.add_op(Op::kSelect, {}, f.input.word_length, true, Group::kInputLayer,
                             fmt::format("u_reg{}", j));
    n.node(reg).in = {now(dvi), now(u[j]), prev(reg)};
    n.node(reg).regs = {0};
    u_state[j] = n.add_op(Op::kRequant, {prev(reg)}, wx, true, Group::kInputLayer,
                          fmt::format("u_state{}", j));
    n.node(u_state[j]).frac_from = f.input.frac_length;
    n.node(u_state[j]).fmt = f.state;
  }

  // Hidden layer.
  constexpr Group hg = Group::kHiddenLayer;
  std::vector<int> bank(K);
  for (int j = 0; j < K; ++j) {
    bank[j] = n.add_op(Op::kSelect, {}, wx, true, hg, fmt::format("bank{}", j));
    n.node(bank[j]).regs = {0};
  }
  const int kb = fsm.layer_bits(), cb = fsm.cycle_bits();
  const int addr = n.add_op(Op::kConcat, {prev(ctl.layer), prev(ctl.cycle)}, kb + cb, false,
                            hg, "weight_addr");
  const int zero_x = n.add_const(0, wx, true, hg);
  const int zero_acc = n.add_const(0, AW, true, hg);
  std::vector<int> act(M);
  for (int i = 0; i < M; ++i) {
    RomTable bias_rom{fmt::format("bias_n{}", i), AW, true, kb, {}};
    bias_rom.data.assign(std::size_t{1} << kb, 0);
    for (int k = 0; k < N; ++k) bias_rom.data[k] = q.biases[k][i];
    const int bias_rd = n.add_op(Op::kRom, {prev(ctl.layer)}, AW, true, hg,
                                 fmt::format("bias_rd_n{}", i));
    n.node(bias_rd).param = n.add_rom(std::move(bias_rom));

    std::vector<Edge> partial;
    for (int mm = 0; mm < p; ++mm) {
      RomTable w_rom{fmt::format("weight_n{}_m{}", i, mm), ww, true, kb + cb, {}};
      w_rom.data.assign(std::size_t{1} << (kb + cb), 0);
      for (int k = 0; k < N; ++k) {
        for (int c = 0; c < C; ++c) {
          const int j = c * p + mm;
          if (j < K) w_rom.data[(std::size_t(k) << cb) | c] = q.weights[k][i * K + j];
        }
      }
      const int w_rd = n.add_op(Op::kRom, {now(addr)}, ww, true, hg,
                                fmt::format("weight_rd_n{}_m{}", i, mm));
      n.node(w_rd).param = n.add_rom(std::move(w_rom));

      Edge operand = prev(bank[mm]);
      if (C > 1) {
        std::vector<Edge> in{prev(ctl.cycle)};
        for (int c = 0; c < C; ++c) {
          const int j = c * p + mm;
          in.push_back(j < K ? prev(bank[j]) : now(zero_x));
        }
        operand = now(n.add_op(Op::kMux, std::move(in), wx, true, hg,
                               fmt::format("operand_n{}_m{}", i, mm)));
      }
      const MaccCell cell = add_macc_cell(
          n, operand, now(w_rd), now(ctl.first), now(ctl.enable),
          now(mm == 0 ? bias_rd : zero_acc), AW, stages, hg, i * p + mm,
          fmt::format("n{}_m{}", i, mm));
      partial.push_back(prev(cell.acc));
    }
    const int sum = add_tree(n, partial, AW, hg, fmt::format("node_sum{}", i));
    const int pre = n.add_op(Op::kRequant, {now(sum)}, f.accumulator.word_length, true, hg,
                             fmt::format("pre_act{}", i));
    n.node(pre).frac_from = f.state.frac_length + f.weight.frac_length;
    n.node(pre).fmt = f.accumulator;
    if (act_rom >= 0) {
      const LutRom& lut = n.luts()[info.hidden_lut];
      const int a = n.add_op(Op::kLutAddr, {now(pre)}, lut.addr_bits, false, hg,
                             fmt::format("act_addr{}", i));
      n.node(a).param = info.hidden_lut;
      act[i] = n.add_op(Op::kRom, {now(a)}, wx, true, hg, fmt::format("act{}", i));
      n.node(act[i]).param = act_rom;
      n.node(act[i]).cell = Cell::kActivationRom;
      n.node(act[i]).cell_index = i;
      n.node(a).cell = Cell::kActivationRom;
      n.node(a).cell_index = i;
    } else {
      act[i] = n.add_op(Op::kRequant, {now(pre)}, wx, true, hg, fmt::format("act{}", i));
      n.node(act[i]).frac_from = f.accumulator.frac_length;
      n.node(act[i]).fmt = f.state;
    }
    n.node(act[i]).regs = {0};
  }
  for (int j = 0; j < K; ++j) {
    const Edge loaded = now(j < L ? u_state[j] : zero_x);
    Edge held = prev(bank[j]);
    if (j < M) {
      held = now(n.add_op(Op::kSelect, {now(ctl.activate), prev(act[j]), prev(bank[j])}, wx,
                          true, hg, fmt::format("bank_hold{}", j)));
    }
    n.node(bank[j]).in = {now(ctl.load), loaded, held};
  }

  // Output layer: y = C * bank.
  constexpr Group og = Group::kOutputLayer;
  const FixedPointFormat cw = f.output_weight_format();
  n.add_output("data_valid_out", now(ctl.valid_out));
  for (int i = 0; i < P; ++i) {
    std::vector<Edge> products;
    for (int j = 0; j < M; ++j) {
      const int coef = n.add_const(q.output_weights[i * M + j], cw.word_length, true, og);
      n.node(coef).name = fmt::format("out_coef{}_{}", i, j);
      products.push_back(now(n.add_op(Op::kMul, {prev(bank[j]), now(coef)},
                                      wx + cw.word_length, true, og,
                                      fmt::format("out_mul{}_{}", i, j))));
    }
    const int sum = add_tree(n, products, OAW, og, fmt::format("out_sum{}", i));
    const int frac = f.state.frac_length + cw.frac_length;
    int y;
    if (end_rom < 0) {
      y = n.add_op(Op::kRequant, {now(sum)}, f.output.word_length, true, og,
                   fmt::format("y_val{}", i));
      n.node(y).frac_from = frac;
      n.node(y).fmt = f.output;
    } else {
      const int pre = n.add_op(Op::kRequant, {now(sum)}, f.accumulator.word_length, true, og,
                               fmt::format("out_pre{}", i));
      n.node(pre).frac_from = frac;
      n.node(pre).fmt = f.accumulator;
      const LutRom& lut = n.luts()[info.end_lut];
      const int a = n.add_op(Op::kLutAddr, {now(pre)}, lut.addr_bits, false, og,
                             fmt::format("out_addr{}", i));
      n.node(a).param = info.end_lut;
      y = n.add_op(Op::kRom, {now(a)}, f.output.word_length, true, og,
                   fmt::format("y_val{}", i));
      n.node(y).param = end_rom;
      for (int id : {a, y}) {
        n.node(id).cell = Cell::kEndActivationRom;
        n.node(id).cell_index = i;
      }
    }
    n.add_output(fmt::format("y{}", i), now(y));
  }
  n.validate();
  return n;
}

int latency(const Netlist& n) { return n.info.latency(); }

}  // namespace sshdl
