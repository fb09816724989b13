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

// Runs the command-line driver as a subprocess.

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

namespace {

namespace fs = std::filesystem;

struct Result {
  int code = -1;
  std::string out;
};

Result sshdl(const std::string& args) {
  const std::string cmd = std::string(SSHDL_CLI_PATH) + " " + args + " 2>&1";
  Result r;
  FILE* p = popen(cmd.c_str(), "r");
  if (p == nullptr) return r;
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("sshdl_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  std::string write(const std::string& name, const std::string& text) const {
    std::ofstream(dir_ / name, std::ios::binary) << text;
    return path(name);
  }

  std::string fig5() const {
    const Result r = sshdl("gen-nn --dims 3,4,4,2 --seed 7 --out " + path("nn.json"));
    EXPECT_EQ(r.code, 0) << r.out;
    return path("nn.json");
  }

  fs::path dir_;
};

TEST_F(Cli, GenNnIsDeterministic) {
  ASSERT_EQ(sshdl("gen-nn --dims 3,4,4,2 --seed 5 --out " + path("a.json")).code, 0);
  ASSERT_EQ(sshdl("gen-nn --dims 3,4,4,2 --seed 5 --out " + path("b.json")).code, 0);
  ASSERT_EQ(sshdl("gen-nn --dims 3,4,4,2 --seed 6 --out " + path("c.json")).code, 0);
  EXPECT_EQ(slurp(path("a.json")), slurp(path("b.json")));
  EXPECT_NE(slurp(path("a.json")), slurp(path("c.json")));
}

TEST_F(Cli, CompileWritesProject) {
  const std::string nn = fig5();
  const Result r = sshdl("compile --model " + nn + " --samples 50 --out " + path("out"));
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("latency 14 cycles"), std::string::npos) << r.out;
  for (const char* f : {"top.v", "input_layer.v", "hidden_layer.v", "output_layer.v",
                        "activation_rom.v", "macc.v", "controller.v", "testbench.v"}) {
    EXPECT_TRUE(fs::exists(dir_ / "out" / f)) << f;
  }
  const std::string top = slurp(dir_ / "out" / "top.v");
  ASSERT_EQ(sshdl("compile --model " + nn + " --samples 50 --out " + path("again")).code, 0);
  EXPECT_EQ(slurp(dir_ / "again" / "top.v"), top);
}

TEST_F(Cli, CompileWithConfigAndPasses) {
  const std::string nn = fig5();
  const std::string cfg = write("cfg.json", R"({
  "model": "nn.json",
  "formats": {"word": 16, "frac": 12},
  "schedule": {"multipliers_per_node": 2},
  "passes": ["retime", {"pipeline_mult": 1}, {"c_slow": 2}],
  "gate_samples": 40,
  "out": "proj"
})");
  const Result r = sshdl("compile --config " + cfg);
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_TRUE(fs::exists(dir_ / "proj" / "top.v"));
}

TEST_F(Cli, SimulateEngines) {
  const std::string nn = fig5();
  const std::string in = write("in.csv", "0.1,0.2,-0.3\n# comment\n0.5,-0.5,0.25\n");
  const Result fixed = sshdl("simulate --model " + nn + " --inputs " + in + " --engine fixed");
  const Result rtl = sshdl("simulate --model " + nn + " --inputs " + in + " --engine rtl");
  const Result ref = sshdl("simulate --model " + nn + " --inputs " + in + " --engine reference");
  ASSERT_EQ(fixed.code, 0) << fixed.out;
  ASSERT_EQ(rtl.code, 0) << rtl.out;
  ASSERT_EQ(ref.code, 0) << ref.out;
  EXPECT_EQ(fixed.out, rtl.out);
  EXPECT_EQ(fixed.out.rfind("sample,output,raw,value\n", 0), 0u);
  EXPECT_EQ(ref.out.rfind("sample,output,value\n", 0), 0u);
  EXPECT_EQ(std::count(fixed.out.begin(), fixed.out.end(), '\n'), 5);
  ASSERT_EQ(sshdl("simulate --model " + nn + " --inputs " + in + " --out " + path("y.csv")).code,
            0);
  EXPECT_EQ(slurp(path("y.csv")), fixed.out);
}

TEST_F(Cli, SweepBits) {
  const std::string nn = fig5();
  const Result r = sshdl("sweep-bits --model " + nn + " --widths 8,16,24 --samples 50 --out " +
                         path("snr.csv"));
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("y0 dB"), std::string::npos);
  const std::string csv = slurp(path("snr.csv"));
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 7);
}

TEST_F(Cli, ExitCodes) {
  const std::string nn = fig5();
  EXPECT_EQ(sshdl("").code, 1);
  EXPECT_EQ(sshdl("frobnicate").code, 1);
  EXPECT_EQ(sshdl("gen-nn --dims 3,4 --out " + path("x.json")).code, 1);
  EXPECT_EQ(sshdl("compile --model " + path("missing.json")).code, 4);
  EXPECT_EQ(sshdl("compile --config " + path("missing_cfg.json")).code, 4);
  const std::string bad = write("bad.json", R"({"model": "nn.json", "formats": {"word": 99}})");
  const Result v = sshdl("compile --config " + bad);
  EXPECT_EQ(v.code, 1);
  EXPECT_NE(v.out.find("formats"), std::string::npos) << v.out;
  const std::string sched =
      write("sched.json", R"({"model": "nn.json", "schedule": {"multipliers_per_node": 9}})");
  EXPECT_EQ(sshdl("compile --config " + sched + " --out " + path("o")).code, 2);
  const std::string ratio =
      write("ratio.json", R"({"model": "nn.json", "schedule": {"clock_ratio": 5}})");
  EXPECT_EQ(sshdl("compile --config " + ratio + " --out " + path("o")).code, 2);
  const std::string fuse = write("fuse.json", R"({"model": "nn.json", "passes": [{"fuse": 2}]})");
  EXPECT_EQ(sshdl("compile --config " + fuse + " --out " + path("o")).code, 1);
  const std::string in = write("in.csv", "0.1,zz,0.3\n");
  const Result parse = sshdl("simulate --model " + nn + " --inputs " + in);
  EXPECT_EQ(parse.code, 1);
  EXPECT_NE(parse.out.find("line 1"), std::string::npos) << parse.out;
  EXPECT_EQ(sshdl("simulate --model " + nn + " --inputs " + path("none.csv")).code, 4);
  EXPECT_EQ(sshdl("simulate --model " + nn + " --inputs " + in + " --engine magic").code, 1);
}

}  // namespace
