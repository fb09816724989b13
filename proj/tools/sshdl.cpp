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

// Command-line driver: compile, sweep-bits, simulate, gen-nn.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "sshdl/config.hpp"
#include "sshdl/errors.hpp"
#include "sshdl/nn.hpp"
#include "sshdl/passes.hpp"
#include "sshdl/rtl_sim.hpp"
#include "sshdl/simkit.hpp"
#include "sshdl/verilog.hpp"

namespace {

using namespace sshdl;

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::vector<int> widths;
  std::optional<std::size_t> samples;
  std::string engine = "fixed";
  std::string inputs;
  std::string model;
  std::vector<int> dims;
};

ProjectConfig resolve_config(const Options& o) {
  ProjectConfig cfg;
  if (!o.config.empty()) cfg = load_config(o.config);
  if (!o.model.empty()) cfg.model = o.model;
  if (o.seed) cfg.seed = *o.seed;
  if (!o.out.empty()) cfg.out = o.out;
  if (o.samples) cfg.gate_samples = *o.samples;
  if (cfg.model.empty()) throw ValidationError("no model: pass --config with a 'model' or --model");
  return cfg;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot read '{}'", path));
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  out.close();
  if (!out) throw IoError(fmt::format("cannot write '{}'", path));
}

int cmd_compile(const Options& o) {
  const ProjectConfig cfg = resolve_config(o);
  const NNSpec nn = load_weights(cfg.model.string());
  const CompileResult r = compile_network(nn, cfg);
  write_project(r.project, cfg.out);
  fmt::print("{}: latency {} cycles, {} registers, gate {}\n", r.model.name,
             r.netlist.info.latency(), r.netlist.register_count(), r.gate.to_string());
  fmt::print("wrote {} files to {}\n", r.project.files.size(), cfg.out.string());
  return 0;
}

int cmd_sweep_bits(const Options& o) {
  if (o.widths.empty()) throw ValidationError("sweep-bits needs a non-empty --widths list");
  const ProjectConfig cfg = resolve_config(o);
  const NNSpec nn = load_weights(cfg.model.string());
  const StateSpaceModel m = build_state_space(nn);
  const std::size_t samples = o.samples.value_or(500);
  const auto inputs = random_inputs(nn.inputs, samples, cfg.seed);
  const SnrReport report = bit_sweep(m, inputs, o.widths, {}, cfg.seed);
  fmt::print("# model {} seed {} samples {}\n", report.model, report.seed, report.samples);
  fmt::print("{:>6}", "bits");
  for (int i = 0; i < nn.outputs; ++i) fmt::print(" {:>12}", fmt::format("y{} dB", i));
  fmt::print("\n");
  for (const SnrRow& row : report.rows) {
    fmt::print("{:>6}", row.bits);
    for (double v : row.snr_db) fmt::print(" {:>12.3f}", v);
    fmt::print("\n");
  }
  if (!o.out.empty()) write_file(o.out, report.to_csv());
  return 0;
}

std::vector<std::vector<double>> parse_inputs(const std::string& text, int dim) {
  std::vector<std::vector<double>> rows;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::vector<double> row;
    std::istringstream cells(line);
    std::string cell;
    while (std::getline(cells, cell, ',')) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cell, &used));
        if (cell.find_first_not_of(" \t\r", used) != std::string::npos) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw ValidationError(fmt::format("inputs line {}: '{}' is not a number", line_no, cell));
      }
    }
    if (static_cast<int>(row.size()) != dim) {
      throw ValidationError(
          fmt::format("inputs line {}: {} values, model takes {}", line_no, row.size(), dim));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string raw_text(int128 v) {
  if (v == 0) return "0";
  const bool neg = v < 0;
  uint128 mag = neg ? uint128(0) - uint128(v) : uint128(v);
  std::string s;
  while (mag != 0) {
    s.insert(s.begin(), static_cast<char>('0' + static_cast<int>(mag % 10)));
    mag /= 10;
  }
  return neg ? "-" + s : s;
}

int cmd_simulate(const Options& o) {
  if (o.inputs.empty()) throw ValidationError("simulate needs --inputs");
  if (o.engine != "reference" && o.engine != "fixed" && o.engine != "rtl") {
    throw ValidationError(fmt::format("unknown engine '{}'", o.engine));
  }
  ProjectConfig cfg = resolve_config(o);
  const std::string text = read_file(o.inputs);
  const NNSpec nn = load_weights(cfg.model.string());
  const StateSpaceModel m = build_state_space(nn);
  const auto inputs = parse_inputs(text, nn.inputs);
  std::string csv;
  if (o.engine == "reference") {
    csv = "sample,output,value\n";
    for (std::size_t s = 0; s < inputs.size(); ++s) {
      const std::vector<double> y = simulate_reference(m, inputs[s]);
      for (std::size_t i = 0; i < y.size(); ++i) csv += fmt::format("{},{},{:.17g}\n", s, i, y[i]);
    }
  } else {
    Schedule sched = cfg.schedule;
    for (const PassSpec& p : cfg.passes) {
      if (p.kind == PassSpec::Kind::kPipelineMult) sched.mult_stages += p.arg;
    }
    Netlist n = elaborate(m, sched, effective_formats(cfg, nn), cfg.activation_table);
    for (const PassSpec& p : cfg.passes) {
      if (p.kind == PassSpec::Kind::kRetime) n = retime(n);
      if (p.kind == PassSpec::Kind::kCSlow) n = c_slow(n, p.arg);
    }
    const FormatAssignment& f = n.info.formats;
    std::vector<std::vector<int128>> raws;
    if (o.engine == "fixed") {
      const FixedPointSimulator fn = functional_model(m, n);
      for (const auto& u : inputs) {
        std::vector<int128> row;
        for (const FpValue& y : fn.run(u)) row.push_back(y.raw);
        raws.push_back(std::move(row));
      }
    } else {
      raws = run_layered(n, inputs);
    }
    csv = "sample,output,raw,value\n";
    for (std::size_t s = 0; s < raws.size(); ++s) {
      for (std::size_t i = 0; i < raws[s].size(); ++i) {
        const double real = FpValue{raws[s][i], f.output}.real();
        csv += fmt::format("{},{},{},{:.17g}\n", s, i, raw_text(raws[s][i]), real);
      }
    }
  }
  if (o.out.empty()) {
    fmt::print("{}", csv);
  } else {
    write_file(o.out, csv);
  }
  return 0;
}

int cmd_gen_nn(const Options& o) {
  if (o.dims.size() != 4) throw ValidationError("gen-nn needs --dims L,N,M,P");
  for (int d : o.dims) {
    if (d < 1) throw ValidationError("gen-nn dimensions must be >= 1");
  }
  if (o.out.empty()) throw ValidationError("gen-nn needs --out");
  const NNSpec nn = random_nn(o.dims[0], o.dims[1], o.dims[2], o.dims[3], o.seed.value_or(1));
  save_weights(nn, o.out);
  fmt::print("wrote {}x{}x{}x{} network to {}\n", o.dims[0], o.dims[1], o.dims[2], o.dims[3],
             o.out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"State-space model to Verilog compiler"};
  app.require_subcommand(1);
  Options o;
  auto common = [&](CLI::App* c) {
    c->add_option("--config", o.config, "project config (JSON)");
    c->add_option("--model", o.model, "weights document; overrides the config");
    c->add_option("--seed", o.seed, "seed for generated inputs and networks");
    c->add_option("--out", o.out, "output directory or file");
  };
  CLI::App* compile = app.add_subcommand("compile", "elaborate, verify and emit Verilog");
  common(compile);
  compile->add_option("--samples", o.samples, "equivalence gate samples");
  CLI::App* sweep = app.add_subcommand("sweep-bits", "SNR against word length");
  common(sweep);
  sweep->add_option("--widths", o.widths, "word lengths")->delimiter(',');
  sweep->add_option("--samples", o.samples, "input samples (default 500)");
  CLI::App* sim = app.add_subcommand("simulate", "run one engine over an inputs file");
  common(sim);
  sim->add_option("--inputs", o.inputs, "CSV, one sample per line");
  sim->add_option("--engine", o.engine, "reference, fixed or rtl");
  CLI::App* gen = app.add_subcommand("gen-nn", "write a random weights document");
  gen->add_option("--dims", o.dims, "L,N,M,P")->delimiter(',');
  gen->add_option("--seed", o.seed, "generator seed");
  gen->add_option("--out", o.out, "weights file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }
  try {
    if (compile->parsed()) return cmd_compile(o);
    if (sweep->parsed()) return cmd_sweep_bits(o);
    if (sim->parsed()) return cmd_simulate(o);
    if (gen->parsed()) return cmd_gen_nn(o);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return e.exit_code();
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}
