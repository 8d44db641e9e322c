// Copyright 2026 The mambapf Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <array>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>
#include <unistd.h>

#include "mambapf/checkpoint.hpp"
#include "mambapf/io.hpp"
#include "mambapf/shapes.hpp"

namespace mambapf {
namespace {

namespace fs = std::filesystem;

struct CliRun {
  int status = -1;
  std::string out;  // stdout and stderr
};

class Cli : public ::testing::Test {
 protected:
  fs::path dir;

  void SetUp() override {
    dir = fs::temp_directory_path() /
          ("mambapf_cli_" + std::to_string(::getpid()) + "_" +
           ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir);
    fs::create_directories(dir);
    ::unsetenv("MAMBAPF_SEED");
  }
  void TearDown() override { fs::remove_all(dir); }

  CliRun run(const std::string& args) const {
    const std::string cmd = "cd '" + dir.string() + "' && '" + MAMBAPF_CLI + "' " + args + " 2>&1";
    CliRun r;
    FILE* pipe = ::popen(cmd.c_str(), "r");
    if (pipe == nullptr) return r;
    std::array<char, 4096> buf{};
    std::size_t n = 0;
    while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) r.out.append(buf.data(), n);
    const int st = ::pclose(pipe);
    r.status = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
    return r;
  }

  std::string slurp(const std::string& name) const {
    std::ifstream in(dir / name, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  void write_clean(const std::string& name, Eigen::Index n = 300) const {
    save_cloud(dir / name, sample_sphere_box_union(n, 1));
  }
};

const char* kTinyTrain =
    "--set modules=1 --set iterations=2 --set mamba_layers=1 --set width=4 --set state_dim=2 --set expand=1 "
    "--set k_graph=3 --set patch_size=80 --set epochs=2 --set views=3 --set image_size=16 --set depth_bins=8 -q";

TEST_F(Cli, SynthNoiseSeedFallbackAndOverride) {
  write_clean("clean.xyz");
  ASSERT_EQ(run("synth-noise clean.xyz -o a.xyz --seed 4").status, 0);
  ::setenv("MAMBAPF_SEED", "4", 1);
  ASSERT_EQ(run("synth-noise clean.xyz -o b.xyz").status, 0);
  ASSERT_EQ(run("synth-noise clean.xyz -o c.xyz --seed 5").status, 0);
  ::unsetenv("MAMBAPF_SEED");
  EXPECT_EQ(slurp("a.xyz"), slurp("b.xyz"));
  EXPECT_NE(slurp("a.xyz"), slurp("c.xyz"));
  ::setenv("MAMBAPF_SEED", "-3", 1);
  const CliRun bad = run("synth-noise clean.xyz -o d.xyz");
  ::unsetenv("MAMBAPF_SEED");
  EXPECT_NE(bad.status, 0);
  EXPECT_NE(bad.out.find("error[E_INVALID_INPUT]"), std::string::npos) << bad.out;
}

TEST_F(Cli, EvalReportsCdAndP2m) {
  write_clean("a.xyz");
  std::ofstream(dir / "tri.off") << "OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n";
  std::ofstream(dir / "on.xyz") << "0 0 0\n0.5 0 0\n0 0.5 0\n";
  CliRun r = run("eval a.xyz a.xyz");
  ASSERT_EQ(r.status, 0) << r.out;
  EXPECT_NE(r.out.find("cd\t0\n"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("cd_x1e5\t0\n"), std::string::npos) << r.out;
  r = run("eval on.xyz on.xyz --mesh tri.off --json rep.json");
  ASSERT_EQ(r.status, 0) << r.out;
  EXPECT_NE(r.out.find("p2f\t0\n"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("p2m\t"), std::string::npos);
  const std::string json = slurp("rep.json");
  EXPECT_NE(json.find("\"p2m_x1e5\""), std::string::npos) << json;
}

TEST_F(Cli, TrainIsDeterministicAndDenoiseKeepsFormat) {
  write_clean("clean.ply");
  CliRun r = run(std::string("train clean.ply -o a.ckpt --loss-log a.csv --seed 9 ") + kTinyTrain);
  ASSERT_EQ(r.status, 0) << r.out;
  r = run(std::string("train clean.ply -o b.ckpt --loss-log b.csv --seed 9 --low-memory ") + kTinyTrain);
  ASSERT_EQ(r.status, 0) << r.out;
  EXPECT_EQ(slurp("a.ckpt"), slurp("b.ckpt"));
  EXPECT_EQ(slurp("a.csv"), slurp("b.csv"));
  EXPECT_EQ(slurp("a.csv").rfind("step,iter_t,recon,render,total\n", 0), 0u);

  ASSERT_EQ(run("synth-noise clean.ply -o noisy.ply --seed 1").status, 0);
  r = run("denoise -c a.ckpt noisy.ply -o out.ply");
  ASSERT_EQ(r.status, 0) << r.out;
  ASSERT_EQ(run("denoise -c a.ckpt noisy.ply -o out2.ply").status, 0);
  EXPECT_EQ(slurp("out.ply"), slurp("out2.ply"));
  EXPECT_EQ(slurp("out.ply").rfind("ply\n", 0), 0u);
  EXPECT_EQ(load_cloud(dir / "out.ply").rows(), 300);
}

TEST_F(Cli, ZeroDecoderCheckpointReturnsInput) {
  RunConfig c;
  c.modules = 2;
  c.mamba_layers = 1;
  c.width = 4;
  c.state_dim = 2;
  c.k_graph = 3;
  c.patch_size = 64;
  DenoiseModel model = init_model(c.net(), c.modules, 1);
  zero_decoders(model);
  save_checkpoint(dir / "zero.ckpt", c, model);
  write_clean("in.xyz", 500);
  const CliRun r = run("denoise -c zero.ckpt in.xyz -o out.xyz");
  ASSERT_EQ(r.status, 0) << r.out;
  EXPECT_TRUE((load_cloud(dir / "out.xyz").array() == load_cloud(dir / "in.xyz").array()).all());
}

TEST_F(Cli, ErrorsCarryCodes) {
  write_clean("clean.xyz");
  RunConfig c;
  c.width = 4;
  c.mamba_layers = 1;
  save_checkpoint(dir / "m.ckpt", c, init_model(c.net(), c.modules, 1));
  CliRun r = run("denoise -c m.ckpt clean.xyz -o o.xyz --set width=8");
  EXPECT_NE(r.status, 0);
  EXPECT_NE(r.out.find("error[E_CHECKPOINT_MISMATCH]"), std::string::npos) << r.out;
  std::ofstream(dir / "bad.xyz") << "1 2 3\n1 x 3\n";
  r = run("eval bad.xyz clean.xyz");
  EXPECT_NE(r.status, 0);
  EXPECT_NE(r.out.find("error[E_PARSE]: bad.xyz:2"), std::string::npos) << r.out;
  r = run("eval missing.xyz clean.xyz");
  EXPECT_NE(r.out.find("error[E_IO]"), std::string::npos) << r.out;
  std::ofstream(dir / "bad.cfg") << "lr = fast\n";
  r = run("render-debug clean.xyz --config bad.cfg");
  EXPECT_NE(r.out.find("error[E_PARSE]"), std::string::npos) << r.out;
  r = run("frobnicate");
  EXPECT_NE(r.status, 0);
  EXPECT_NE(r.out.find("error[E_USAGE]"), std::string::npos) << r.out;
}

TEST_F(Cli, RenderDebugWritesViews) {
  write_clean("clean.xyz");
  std::ofstream(dir / "r.cfg") << "views = 4\nimage_size = 24\n";
  const CliRun r = run("render-debug clean.xyz --config r.cfg -o views");
  ASSERT_EQ(r.status, 0) << r.out;
  for (int i = 0; i < 4; ++i) {
    const Eigen::MatrixXd img = read_pgm(dir / "views" / ("view_" + std::to_string(i) + ".pgm"));
    EXPECT_EQ(img.rows(), 24);
    EXPECT_GT(img.maxCoeff(), 0.0);
  }
  EXPECT_FALSE(fs::exists(dir / "views" / "view_4.pgm"));
}

}  // namespace
}  // namespace mambapf
