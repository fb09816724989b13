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

#ifndef SSHDL_CONFIG_HPP_
#define SSHDL_CONFIG_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sshdl/elaborator.hpp"
#include "sshdl/nn.hpp"
#include "sshdl/rtl_sim.hpp"
#include "sshdl/simkit.hpp"
#include "sshdl/verilog.hpp"

namespace sshdl {

struct PassSpec {
  enum class Kind { kFuse, kPipelineMult, kRetime, kCSlow };
  Kind kind = Kind::kRetime;
  int arg = 0;  // fuse depth, multiplier stages or the c-slow factor

  friend bool operator==(const PassSpec&, const PassSpec&) = default;
};

std::string pass_name(const PassSpec& p);

struct ProjectConfig {
  std::filesystem::path model;  // weights document
  FormatAssignment formats = uniform_formats(16, 12);
  Schedule schedule;
  ActivationTableConfig activation_table;
  std::vector<PassSpec> passes;
  std::filesystem::path out = "sshdl_out";
  std::uint64_t seed = 1;
  std::size_t gate_samples = 1000;
  bool inline_roms = true;
};

// Relative paths resolve against base_dir. Throws ValidationError naming
// the offending key, with the byte offset for syntax errors.
ProjectConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = {});
// Throws IoError when the file cannot be read.
ProjectConfig load_config(const std::filesystem::path& path);

// Config formats with the weights document's per-tensor overrides applied.
FormatAssignment effective_formats(const ProjectConfig& cfg, const NNSpec& nn);

struct CompileResult {
  StateSpaceModel model;
  Netlist netlist;
  std::vector<std::vector<double>> gate_inputs;
  EquivalenceReport gate;
  VerilogProject project;
};

// Builds the state-space model, elaborates it, runs the passes in order,
// checks the netlist against the functional simulator on gate_samples
// seeded inputs and emits Verilog. Multiplier pipelining is folded into
// elaboration. Throws EquivalenceError if the gate finds a divergence.
CompileResult compile_network(const NNSpec& nn, const ProjectConfig& cfg);

}  // namespace sshdl

#endif  // SSHDL_CONFIG_HPP_
