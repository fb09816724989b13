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

#ifndef SSHDL_VERILOG_HPP_
#define SSHDL_VERILOG_HPP_

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sshdl/netlist.hpp"
#include "sshdl/simkit.hpp"

namespace sshdl {

struct VerilogConfig {
  // Inline case ROMs keep every file self-contained; otherwise tables load
  // from <rom>.mem files through $readmemh.
  bool inline_roms = true;
  // Testbench stimulus (real inputs) and the raw outputs it must observe.
  // Empty samples default to a small seeded set; empty expected values are
  // taken from the netlist itself.
  std::vector<std::vector<double>> samples;
  std::vector<std::vector<int128>> expected;
};

struct VerilogProject {
  // File name to contents, in emission order.
  std::vector<std::pair<std::string, std::string>> files;

  const std::string* find(std::string_view name) const;
  std::size_t verilog_file_count() const;
};

std::string emit_top(const Netlist& n, const VerilogConfig& cfg = {});
std::string emit_input_layer(const Netlist& n, const VerilogConfig& cfg = {});
std::string emit_hidden_layer(const Netlist& n, const VerilogConfig& cfg = {});
std::string emit_output_layer(const Netlist& n, const VerilogConfig& cfg = {});
std::string emit_controller(const Netlist& n, const VerilogConfig& cfg = {});
// Registered-read table with the address computation for lut.in_fmt.
std::string emit_activation_rom(const LutRom& lut, const VerilogConfig& cfg = {},
                                std::string_view module_name = "activation_rom",
                                bool registered = true);
// Signed multiply into a widened accumulator; the widths are the default
// parameter values.
std::string emit_macc(const FixedPointFormat& a, const FixedPointFormat& b, int acc_width);
std::string emit_testbench(const Netlist& n, const VerilogConfig& cfg = {});

// Throws ValidationError for an invalid netlist.
VerilogProject emit_project(const Netlist& n, const VerilogConfig& cfg = {});

// Throws IoError.
void write_project(const VerilogProject& p, const std::filesystem::path& dir);

// Lightweight structural checks over the project text: module/endmodule,
// begin/end, case/endcase and bracket balance; every instantiated module
// defined; named port and parameter connections match the definition.
std::vector<std::string> verify_project(const VerilogProject& p);

// Declared bit width of every wire, reg and port in the text, keyed by
// "module.name".
std::map<std::string, int> declared_widths(std::string_view text);

// Contents of the case table in a ROM module, sign-extended when is_signed.
// Entries absent from the case body read as 0. Throws ValidationError when
// the module or its table is missing.
std::vector<int128> parse_rom_module(std::string_view text, std::string_view module_name,
                                     int width, bool is_signed);
// Contents of a $readmemh file.
std::vector<int128> parse_mem_file(std::string_view text, int width, bool is_signed);

// Hex digits of values concatenated into one bus, first element in the
// least significant position.
std::string bus_hex(const std::vector<std::pair<int128, int>>& fields);

}  // namespace sshdl

#endif  // SSHDL_VERILOG_HPP_
