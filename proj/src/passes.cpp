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

#include "sshdl/passes.hpp"

#include <algorithm>
#include <deque>
#include <limits>
#include <tuple>

#include <fmt/format.h>

#include "sshdl/errors.hpp"

namespace sshdl {

Matrix transition_matrix(const ParamTable& a, int start, int count) {
  if (count < 1) throw ValidationError("transition product needs at least one factor");
  Matrix p = a.at(start);
  for (int k = start + 1; k < start + count; ++k) p = a.at(k) * p;
  return p;
}

LinearBlock make_linear_block(const ParamTable& a, int start, int span) {
  LinearBlock b;
  b.span = span;
  for (int k = start; k < start + span; ++k) b.steps.push_back(a.at(k));
  b.fused = transition_matrix(a, start, span);
  return b;
}

namespace {

// Table read by the x[k+1] = A[k] x[k] update, or a ValidationError
// naming the offending node.
std::string linear_update_table(const StateSpaceModel& m) {
  const DataflowGraph& g = m.update_graph;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const DfNode& n = g.node(static_cast<int>(i));
    const bool nonlinear =
        (n.op == DfOp::kActivation && n.activation != ActivationKind::kIdentity) ||
        n.op == DfOp::kScalarMul;
    if (nonlinear) {
      throw ValidationError(fmt::format("fusion needs a linear update; node {} ({}) is not linear",
                                        i, df_op_name(n.op)));
    }
  }
  if (g.outputs().size() != 1) {
    throw ValidationError("fusion needs a single update output");
  }
  int root = g.outputs().front();
  while (g.node(root).op == DfOp::kActivation) root = g.node(root).operands.front();
  const DfNode& mv = g.node(root);
  if (mv.op != DfOp::kMatVec) {
    throw ValidationError(fmt::format(
        "fusion needs x[k+1] = A[k] x[k]; node {} ({}) is not a state product", root,
        df_op_name(mv.op)));
  }
  bool whole_state = static_cast<int>(mv.operands.size()) == m.state_dim;
  for (std::size_t i = 0; whole_state && i < mv.operands.size(); ++i) {
    const DfNode& s = g.node(mv.operands[i]);
    whole_state = s.op == DfOp::kStateIn && s.index == static_cast<int>(i);
  }
  if (!whole_state) {
    throw ValidationError(fmt::format(
        "fusion needs x[k+1] = A[k] x[k]; node {} does not read the state in order", root));
  }
  return mv.table;
}

std::string fresh_table_name(const StateSpaceModel& m, const std::string& base) {
  std::string name = base;
  for (int i = 2; m.params.count(name) != 0; ++i) name = fmt::format("{}_{}", base, i);
  return name;
}

}  // namespace

StateSpaceModel fuse_state_transition(const StateSpaceModel& m, int j) {
  require_valid(m);
  if (j < 0) throw ValidationError(fmt::format("fusion depth {} is negative", j));
  const std::string a_name = linear_update_table(m);
  const ParamTable& a = m.params.at(a_name);
  const int span = j + 1;
  const int N = m.horizon;

  StateSpaceModel out = m;
  out.name = fmt::format("{}_fused{}", m.name, span);
  out.horizon = (N + span - 1) / span;

  ParamTable phi;
  for (int start = 0; start < N; start += span) {
    phi.steps.push_back(transition_matrix(a, start, std::min(span, N - start)));
  }
  const std::string phi_name = fresh_table_name(m, a_name + "_fused");
  out.params[phi_name] = std::move(phi);

  DataflowGraph ug;
  std::vector<int> states;
  for (int i = 0; i < m.state_dim; ++i) states.push_back(ug.add_state(i));
  ug.set_outputs({ug.add_matvec(phi_name, states)});
  out.update_graph = std::move(ug);

  // The output map runs at the final step; pin its step-indexed tables there
  // since the fused horizon renumbers the steps.
  DataflowGraph og;
  for (const DfNode& n : m.output_graph.nodes()) {
    DfNode c = n;
    if (c.op == DfOp::kMatVec && m.params.at(c.table).time_varying()) {
      const ParamTable& t = m.params.at(c.table);
      if (static_cast<int>(t.steps.size()) <= N) {
        throw ValidationError(fmt::format("output table {} has no entry for step {}", c.table, N));
      }
      const std::string pinned = fresh_table_name(out, c.table + "_final");
      out.params[pinned] = ParamTable{{t.steps[N]}};
      c.table = pinned;
    }
    og.add(std::move(c));
  }
  og.set_outputs(m.output_graph.outputs());
  out.output_graph = std::move(og);
  require_valid(out);
  return out;
}

std::vector<std::vector<double>> state_trajectory(const StateSpaceModel& m,
                                                  const std::vector<double>& u) {
  require_valid(m);
  if (static_cast<int>(u.size()) != m.input_dim) {
    throw ValidationError(fmt::format("input has {} entries, model expects {}", u.size(),
                                      m.input_dim));
  }
  GraphEvaluator ev(m, m.update_graph);
  std::vector<std::vector<double>> xs{m.initial_state};
  for (int k = 0; k < m.horizon; ++k) xs.push_back(ev.evaluate(xs.back(), u, k));
  return xs;
}

namespace {

// Applies f to the delay of every edge leaving node v, ports included.
template <typename F>
void for_fanout(Netlist& n, int v, F&& f) {
  for (NetNode& c : n.nodes()) {
    for (Edge& e : c.in) {
      if (e.src == v) f(e);
    }
  }
  for (OutputPort& p : n.outputs()) {
    if (p.edge.src == v) f(p.edge);
  }
}

std::vector<int> max_fanout_delay(const Netlist& n) {
  std::vector<int> d(n.size(), 0);
  for (const NetNode& c : n.nodes()) {
    for (const Edge& e : c.in) d[e.src] = std::max(d[e.src], e.delay);
  }
  for (const OutputPort& p : n.outputs()) d[p.edge.src] = std::max(d[p.edge.src], p.edge.delay);
  return d;
}

void trim_chains(Netlist& n) {
  const std::vector<int> d = max_fanout_delay(n);
  for (std::size_t v = 0; v < n.size(); ++v) {
    std::vector<int128>& regs = n.node(static_cast<int>(v)).regs;
    if (static_cast<int>(regs.size()) > d[v]) regs.resize(d[v]);
  }
}

}  // namespace

Netlist pipeline_multiplier(const Netlist& n, int node, int stages) {
  if (node < 0 || node >= static_cast<int>(n.size())) {
    throw ValidationError(fmt::format("node {} does not exist", node));
  }
  if (n.node(node).op != Op::kMul) {
    throw ValidationError(fmt::format("node {} ({}) is a {}, not a multiplier", node,
                                      n.node(node).name, op_name(n.node(node).op)));
  }
  if (stages < 0) throw ValidationError("pipeline stages must be non-negative");
  Netlist out = n;
  std::vector<int128>& regs = out.node(node).regs;
  regs.insert(regs.begin(), stages, 0);
  for_fanout(out, node, [&](Edge& e) { e.delay += stages; });
  return out;
}

int DelayModel::delay(Op op) const {
  switch (op) {
    case Op::kInput:
    case Op::kConst:
    case Op::kConcat:
      return 0;
    case Op::kMul:
      return mul;
    case Op::kAdd:
    case Op::kSub:
      return add;
    case Op::kLutAddr:
    case Op::kRom:
      return lut;
    default:
      return other;
  }
}

namespace {

std::vector<int> arrival_times(const Netlist& n, const DelayModel& d,
                               const std::vector<int>& order) {
  std::vector<int> at(n.size(), 0);
  for (int v : order) {
    int in = 0;
    for (const Edge& e : n.node(v).in) {
      if (e.delay == 0) in = std::max(in, at[e.src]);
    }
    at[v] = in + d.delay(n.node(v).op);
  }
  return at;
}

std::vector<int> checked_order(const Netlist& n) {
  int cycle = -1;
  auto order = comb_order(n, false, &cycle);
  if (!order) {
    throw ValidationError(fmt::format("combinational cycle through node {} ({})", cycle,
                                      n.node(cycle).name));
  }
  return std::move(*order);
}

TimingReport timing_from(const std::vector<int>& at) {
  TimingReport r;
  for (int a : at) r.critical_path = std::max(r.critical_path, a);
  for (int a : at) r.endpoints += a == r.critical_path ? 1 : 0;
  return r;
}

}  // namespace

TimingReport analyze_timing(const Netlist& n, const DelayModel& d) {
  return timing_from(arrival_times(n, d, checked_order(n)));
}

int critical_path(const Netlist& n, const DelayModel& d) {
  return analyze_timing(n, d).critical_path;
}

namespace {

bool has_self_loop(const NetNode& node, int v) {
  return std::any_of(node.in.begin(), node.in.end(), [&](const Edge& e) { return e.src == v; });
}

bool movable(const Netlist& n, int v) {
  const NetNode& node = n.node(v);
  return node.op != Op::kInput && node.op != Op::kConst && !node.in.empty() &&
         !has_self_loop(node, v);
}

// Moves one register from every input edge of v to its output.
bool move_forward(Netlist& n, int v) {
  if (!movable(n, v)) return false;
  NetNode& node = n.node(v);
  std::vector<int128> taps;
  for (const Edge& e : node.in) {
    if (e.delay < 1) return false;
    taps.push_back(n.node(e.src).regs[e.delay - 1]);
  }
  const int128 init = eval_node(n, node, taps);
  for (Edge& e : node.in) --e.delay;
  node.regs.insert(node.regs.begin(), init);
  for_fanout(n, v, [](Edge& e) { ++e.delay; });
  trim_chains(n);
  return true;
}

// Moves one register from every output edge of v to its inputs. New
// registers on the inputs start from 0 (or the constant they copy) and the
// move is taken only if v then reproduces its old reset value.
bool move_backward(Netlist& n, int v) {
  if (!movable(n, v)) return false;
  bool ok = !n.node(v).regs.empty();
  for_fanout(n, v, [&](Edge& e) { ok = ok && e.delay >= 1; });
  if (!ok) return false;
  NetNode& node = n.node(v);
  std::vector<int128> taps;
  for (const Edge& e : node.in) {
    const NetNode& src = n.node(e.src);
    if (static_cast<int>(src.regs.size()) > e.delay) {
      taps.push_back(src.regs[e.delay]);
    } else {
      taps.push_back(src.op == Op::kConst ? src.value : 0);
    }
  }
  if (eval_node(n, node, taps) != node.regs.front()) return false;
  node.regs.erase(node.regs.begin());
  for_fanout(n, v, [](Edge& e) { --e.delay; });
  for (std::size_t i = 0; i < n.node(v).in.size(); ++i) {
    const Edge e = n.node(v).in[i];
    std::vector<int128>& regs = n.node(e.src).regs;
    if (static_cast<int>(regs.size()) == e.delay) regs.push_back(taps[i]);
    ++n.node(v).in[i].delay;
  }
  trim_chains(n);
  return true;
}

std::vector<int> critical_nodes(const Netlist& n, const DelayModel& d,
                                const std::vector<int>& at, int cp) {
  std::vector<char> mark(n.size(), 0);
  std::vector<int> stack;
  for (std::size_t v = 0; v < n.size(); ++v) {
    if (at[v] == cp) {
      mark[v] = 1;
      stack.push_back(static_cast<int>(v));
    }
  }
  while (!stack.empty()) {
    const int v = stack.back();
    stack.pop_back();
    const int need = at[v] - d.delay(n.node(v).op);
    for (const Edge& e : n.node(v).in) {
      if (e.delay == 0 && at[e.src] == need && !mark[e.src]) {
        mark[e.src] = 1;
        stack.push_back(e.src);
      }
    }
  }
  std::vector<int> out;
  for (std::size_t v = 0; v < n.size(); ++v) {
    if (mark[v]) out.push_back(static_cast<int>(v));
  }
  return out;
}

}  // namespace

Netlist retime(const Netlist& n, const DelayModel& d) {
  n.validate();
  Netlist cur = n;
  trim_chains(cur);
  auto key = [](const TimingReport& r) { return std::make_tuple(r.critical_path, r.endpoints); };
  const int max_moves = 4 * static_cast<int>(n.size()) + 16;
  for (int iter = 0; iter < max_moves; ++iter) {
    const std::vector<int> at = arrival_times(cur, d, checked_order(cur));
    const TimingReport now = timing_from(at);
    bool moved = false;
    for (int v : critical_nodes(cur, d, at, now.critical_path)) {
      for (int dir = 0; dir < 2 && !moved; ++dir) {
        Netlist trial = cur;
        if (!(dir == 0 ? move_backward(trial, v) : move_forward(trial, v))) continue;
        int cycle = -1;
        auto order = comb_order(trial, false, &cycle);
        if (!order) continue;
        if (key(timing_from(arrival_times(trial, d, *order))) < key(now)) {
          cur = std::move(trial);
          moved = true;
        }
      }
      if (moved) break;
    }
    if (!moved) break;
  }
  cur.validate();
  return cur;
}

std::optional<std::vector<int>> retiming_lags(const Netlist& before, const Netlist& after) {
  if (before.size() != after.size() || before.outputs().size() != after.outputs().size()) {
    return std::nullopt;
  }
  const std::size_t V = before.size();
  // Constraint edges: r[b] - r[a] = diff; node V stands for the ports.
  struct Constraint {
    int a, b, diff;
  };
  std::vector<std::vector<Constraint>> adj(V + 1);
  auto link = [&](int a, int b, int diff) {
    adj[a].push_back({a, b, diff});
    adj[b].push_back({b, a, -diff});
  };
  for (std::size_t v = 0; v < V; ++v) {
    const NetNode& x = before.node(static_cast<int>(v));
    const NetNode& y = after.node(static_cast<int>(v));
    if (x.op != y.op || x.in.size() != y.in.size()) return std::nullopt;
    for (std::size_t i = 0; i < x.in.size(); ++i) {
      if (x.in[i].src != y.in[i].src || y.in[i].delay < 0) return std::nullopt;
      link(x.in[i].src, static_cast<int>(v), y.in[i].delay - x.in[i].delay);
    }
  }
  for (std::size_t p = 0; p < before.outputs().size(); ++p) {
    const Edge& x = before.outputs()[p].edge;
    const Edge& y = after.outputs()[p].edge;
    if (x.src != y.src || y.delay < 0) return std::nullopt;
    link(x.src, static_cast<int>(V), y.delay - x.delay);
  }
  for (int in : before.inputs()) link(static_cast<int>(V), in, 0);

  constexpr int kUnset = std::numeric_limits<int>::min();
  std::vector<int> r(V + 1, kUnset);
  auto solve_from = [&](int root) {
    r[root] = 0;
    std::deque<int> q{root};
    while (!q.empty()) {
      const int v = q.front();
      q.pop_front();
      for (const Constraint& c : adj[v]) {
        const int want = r[v] + c.diff;
        if (r[c.b] == kUnset) {
          r[c.b] = want;
          q.push_back(c.b);
        } else if (r[c.b] != want) {
          return false;
        }
      }
    }
    return true;
  };
  if (!solve_from(static_cast<int>(V))) return std::nullopt;
  for (std::size_t v = 0; v < V; ++v) {
    if (r[v] == kUnset && !solve_from(static_cast<int>(v))) return std::nullopt;
  }
  r.pop_back();
  return r;
}

Netlist c_slow(const Netlist& n, int c) {
  if (c < 1) throw ValidationError(fmt::format("c-slow factor {} must be at least 1", c));
  Netlist out = n;
  for (NetNode& node : out.nodes()) {
    std::vector<int128> regs;
    regs.reserve(node.regs.size() * c);
    for (int128 r : node.regs) regs.insert(regs.end(), c, r);
    node.regs = std::move(regs);
    for (Edge& e : node.in) e.delay *= c;
  }
  for (OutputPort& p : out.outputs()) p.edge.delay *= c;
  out.info.c_slow *= c;
  return out;
}

}  // namespace sshdl
