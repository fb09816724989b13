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

#ifndef SSHDL_PASSES_HPP_
#define SSHDL_PASSES_HPP_

#include <optional>
#include <vector>

#include "sshdl/model.hpp"
#include "sshdl/netlist.hpp"

namespace sshdl {

// Product A[start + count - 1] * ... * A[start] of a step-indexed table.
Matrix transition_matrix(const ParamTable& a, int start, int count);

struct LinearBlock {
  std::vector<Matrix> steps;  // A[k] for the fused span
  int span = 1;               // number of factors, j + 1
  Matrix fused;               // product of the factors, latest on the left
};

LinearBlock make_linear_block(const ParamTable& a, int start, int span);

// Requires an update map x[k+1] = A[k] x[k] (one MatVec over the whole
// state, optionally under an identity activation). The result advances j+1
// steps per update; a shorter last update covers a horizon that j+1 does
// not divide. Throws ValidationError naming the first node that breaks the
// pattern, nonlinear nodes first.
StateSpaceModel fuse_state_transition(const StateSpaceModel& m, int j);

// States x[0..N] after each update, in double precision.
std::vector<std::vector<double>> state_trajectory(const StateSpaceModel& m,
                                                  const std::vector<double>& u);

// Inserts `stages` registers at the output of a multiplier node. Throws
// ValidationError when the node is not a multiplier.
Netlist pipeline_multiplier(const Netlist& n, int node, int stages);

struct DelayModel {
  int mul = 3;
  int add = 1;
  int lut = 1;
  int other = 1;

  int delay(Op op) const;
};

struct TimingReport {
  int critical_path = 0;
  int endpoints = 0;  // nodes whose arrival equals the critical path
};

TimingReport analyze_timing(const Netlist& n, const DelayModel& d = {});
int critical_path(const Netlist& n, const DelayModel& d = {});

// Greedy register motion: repeatedly moves a register forward or backward
// across a node on a critical path while the move keeps reset behaviour
// and shortens (critical path, endpoint count). Inputs and output ports are
// never retimed, so I/O latency is preserved.
Netlist retime(const Netlist& n, const DelayModel& d = {});

// Lags r with w'(e) = w(e) + r(dst) - r(src) for every edge and r = 0 at
// the ports, if the two netlists differ by a legal retiming.
std::optional<std::vector<int>> retiming_lags(const Netlist& before, const Netlist& after);

// Replaces every register by C registers; the result interleaves C
// independent streams.
Netlist c_slow(const Netlist& n, int c);

}  // namespace sshdl

#endif  // SSHDL_PASSES_HPP_
