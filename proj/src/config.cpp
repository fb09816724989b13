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

#include "sshdl/config.hpp"

#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "sshdl/errors.hpp"
#include "sshdl/passes.hpp"

namespace sshdl {

using json = nlohmann::json;

std::string pass_name(const PassSpec& p) {
  switch (p.kind) {
    case PassSpec::Kind::kFuse: return fmt::format("fuse:{}", p.arg);
    case PassSpec::Kind::kPipelineMult: return fmt::format("pipeline_mult:{}", p.arg);
    case PassSpec::Kind::kRetime: return "retime";
    case PassSpec::Kind::kCSlow: return fmt::format("c_slow:{}", p.arg);
  }
  return "?";
}

namespace {

int get_int(const json& j, const std::string& key, int lo, int hi) {
  if (!j.is_number_integer()) throw ValidationError(fmt::format("config: '{}' must be an integer", key));
  const auto v = j.get<std::int64_t>();
  if (v < lo || v > hi) {
    throw ValidationError(fmt::format("config: '{}' = {} outside [{}, {}]", key, v, lo, hi));
  }
  return static_cast<int>(v);
}

double get_double(const json& j, const std::string& key) {
  if (!j.is_number()) throw ValidationError(fmt::format("config: '{}' must be a number", key));
  return j.get<double>();
}

void reject_unknown(const json& obj, const std::string& where,
                    std::initializer_list<std::string_view> known) {
  for (const auto& [key, value] : obj.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw ValidationError(fmt::format("config: unknown key '{}{}'", where, key));
    }
  }
}

FixedPointFormat get_format(const json& j, const std::string& key) {
  if (!j.is_object() || !j.contains("word") || !j.contains("frac")) {
    throw ValidationError(fmt::format("config: '{}' needs word and frac", key));
  }
  reject_unknown(j, key + ".", {"word", "frac"});
  const int w = get_int(j["word"], key + ".word", 2, kMaxWordLength);
  const int f = get_int(j["frac"], key + ".frac", 0, w - 1);
  return FixedPointFormat{w, f};
}

FormatAssignment get_formats(const json& j) {
  if (!j.is_object()) throw ValidationError("config: 'formats' must be an object");
  reject_unknown(j, "formats.", {"word", "frac", "input", "weight", "accumulator", "state",
                                 "output", "bias", "output_weight"});
  FormatAssignment f = uniform_formats(16, 12);
  if (j.contains("word") || j.contains("frac")) {
    json base = json::object();
    if (j.contains("word")) base["word"] = j["word"];
    if (j.contains("frac")) base["frac"] = j["frac"];
    const FixedPointFormat u = get_format(base, "formats");
    f = uniform_formats(u.word_length, u.frac_length);
  }
  auto set = [&](const char* key, FixedPointFormat& slot) {
    if (j.contains(key)) slot = get_format(j[key], fmt::format("formats.{}", key));
  };
  set("input", f.input);
  set("weight", f.weight);
  set("accumulator", f.accumulator);
  set("state", f.state);
  set("output", f.output);
  if (j.contains("bias")) f.bias = get_format(j["bias"], "formats.bias");
  if (j.contains("output_weight")) {
    f.output_weight = get_format(j["output_weight"], "formats.output_weight");
  }
  return f;
}

PassSpec get_pass(const json& j, std::size_t index) {
  const std::string where = fmt::format("passes[{}]", index);
  if (j.is_string()) {
    if (j.get<std::string>() == "retime") return {PassSpec::Kind::kRetime, 0};
    throw ValidationError(fmt::format("config: {} names unknown pass '{}'", where,
                                      j.get<std::string>()));
  }
  if (!j.is_object() || j.size() != 1) {
    throw ValidationError(fmt::format("config: {} must be \"retime\" or a one-key object", where));
  }
  const auto it = j.begin();
  const std::string& key = it.key();
  const json& value = it.value();
  if (key == "fuse") return {PassSpec::Kind::kFuse, get_int(value, where + ".fuse", 0, 1 << 20)};
  if (key == "pipeline_mult") {
    return {PassSpec::Kind::kPipelineMult, get_int(value, where + ".pipeline_mult", 0, 64)};
  }
  if (key == "c_slow") return {PassSpec::Kind::kCSlow, get_int(value, where + ".c_slow", 1, 64)};
  if (key == "retime") return {PassSpec::Kind::kRetime, 0};
  throw ValidationError(fmt::format("config: {} names unknown pass '{}'", where, key));
}

}  // namespace

ProjectConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(fmt::format("config: parse error at byte {}: {}", e.byte, e.what()));
  }
  if (!doc.is_object()) throw ValidationError("config must be a JSON object");
  reject_unknown(doc, "", {"model", "formats", "schedule", "activation_table", "passes", "out",
                           "seed", "gate_samples", "inline_roms"});
  ProjectConfig cfg;
  auto path_of = [&](const json& j, const char* key) {
    if (!j.is_string()) throw ValidationError(fmt::format("config: '{}' must be a string", key));
    std::filesystem::path p = j.get<std::string>();
    return p.is_relative() && !base_dir.empty() ? base_dir / p : p;
  };
  if (doc.contains("model")) cfg.model = path_of(doc["model"], "model");
  if (doc.contains("out")) cfg.out = path_of(doc["out"], "out");
  if (doc.contains("formats")) cfg.formats = get_formats(doc["formats"]);
  if (doc.contains("schedule")) {
    const json& s = doc["schedule"];
    if (!s.is_object()) throw ValidationError("config: 'schedule' must be an object");
    reject_unknown(s, "schedule.", {"multipliers_per_node", "clock_ratio"});
    if (s.contains("multipliers_per_node")) {
      cfg.schedule.multipliers_per_node =
          get_int(s["multipliers_per_node"], "schedule.multipliers_per_node", 0, 1 << 20);
    }
    if (s.contains("clock_ratio")) {
      cfg.schedule.clock_ratio = get_int(s["clock_ratio"], "schedule.clock_ratio", 0, 1 << 30);
    }
  }
  if (doc.contains("activation_table")) {
    const json& a = doc["activation_table"];
    if (!a.is_object()) throw ValidationError("config: 'activation_table' must be an object");
    reject_unknown(a, "activation_table.", {"addr_bits", "lo", "hi"});
    if (a.contains("addr_bits")) {
      cfg.activation_table.addr_bits = get_int(a["addr_bits"], "activation_table.addr_bits", 1, 63);
    }
    if (a.contains("lo")) cfg.activation_table.lo = get_double(a["lo"], "activation_table.lo");
    if (a.contains("hi")) cfg.activation_table.hi = get_double(a["hi"], "activation_table.hi");
  }
  if (doc.contains("passes")) {
    const json& p = doc["passes"];
    if (!p.is_array()) throw ValidationError("config: 'passes' must be an array");
    for (std::size_t i = 0; i < p.size(); ++i) cfg.passes.push_back(get_pass(p[i], i));
  }
  if (doc.contains("seed")) {
    if (!doc["seed"].is_number_unsigned()) {
      throw ValidationError("config: 'seed' must be a non-negative integer");
    }
    cfg.seed = doc["seed"].get<std::uint64_t>();
  }
  if (doc.contains("gate_samples")) {
    cfg.gate_samples = static_cast<std::size_t>(
        get_int(doc["gate_samples"], "gate_samples", 1, 1 << 24));
  }
  if (doc.contains("inline_roms")) {
    if (!doc["inline_roms"].is_boolean()) {
      throw ValidationError("config: 'inline_roms' must be true or false");
    }
    cfg.inline_roms = doc["inline_roms"].get<bool>();
  }
  return cfg;
}

ProjectConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot read config '{}'", path.string()));
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config(ss.str(), path.parent_path());
  } catch (const ValidationError& e) {
    throw ValidationError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

FormatAssignment effective_formats(const ProjectConfig& cfg, const NNSpec& nn) {
  FormatAssignment f = cfg.formats;
  for (const auto& [key, fmt] : nn.tensor_formats) {
    if (key == "weight") f.weight = fmt;
    if (key == "bias") f.bias = fmt;
    if (key == "output_weight") f.output_weight = fmt;
  }
  return f;
}

CompileResult compile_network(const NNSpec& nn, const ProjectConfig& cfg) {
  CompileResult r;
  r.model = build_state_space(nn);
  require_valid(r.model);
  const FormatAssignment f = effective_formats(cfg, nn);
  Schedule sched = cfg.schedule;
  for (const PassSpec& p : cfg.passes) {
    if (p.kind == PassSpec::Kind::kFuse) r.model = fuse_state_transition(r.model, p.arg);
    if (p.kind == PassSpec::Kind::kPipelineMult) sched.mult_stages += p.arg;
  }
  r.netlist = elaborate(r.model, sched, f, cfg.activation_table);
  for (const PassSpec& p : cfg.passes) {
    if (p.kind == PassSpec::Kind::kRetime) r.netlist = retime(r.netlist);
    if (p.kind == PassSpec::Kind::kCSlow) r.netlist = c_slow(r.netlist, p.arg);
  }

  r.gate_inputs = random_inputs(nn.inputs, cfg.gate_samples, cfg.seed);
  const FixedPointSimulator fn = functional_model(r.model, r.netlist);
  r.gate = compare_with_functional(fn, r.netlist, r.gate_inputs);
  if (!r.gate.equivalent()) {
    throw EquivalenceError(fmt::format("equivalence gate failed: {}", r.gate.to_string()));
  }
  VerilogConfig vc;
  vc.inline_roms = cfg.inline_roms;
  vc.samples = r.gate_inputs;
  for (const std::vector<double>& u : r.gate_inputs) {
    std::vector<int128> raw;
    for (const FpValue& y : fn.run(u)) raw.push_back(y.raw);
    vc.expected.push_back(std::move(raw));
  }
  r.project = emit_project(r.netlist, vc);
  return r;
}

}  // namespace sshdl
