// Copyright 2026 The dynident Authors
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

// Drives the dynident executable end to end.

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "test_util.hpp"

namespace dynident {
namespace {

namespace fs = std::filesystem;

int run(const std::string& args, const fs::path& out_file = "/dev/null") {
  const std::string cmd = std::string(DYNIDENT_CLI) + " " + args + " > " + out_file.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = fs::path(::testing::TempDir()) / "dynident_cli";
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  static std::string model() { return testing::model_path("psm.model"); }
  static std::string path(const std::string& name) { return (dir_ / name).string(); }
  static fs::path dir_;
};

fs::path Cli::dir_;

TEST_F(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(run(""), 2);
  EXPECT_EQ(run("identify --log x.csv --out y.json"), 2);  // no --model
  EXPECT_EQ(run("traj optimize --model " + model() + " --out " + path("t.json") + " --nh 0"), 2);
  EXPECT_EQ(run("model check --model " + path("missing.model")), 2);
  EXPECT_EQ(run("frobnicate"), 2);
}

TEST_F(Cli, ModelCheckReportsBaseCount) {
  const fs::path out = dir_ / "check.txt";
  ASSERT_EQ(run("model check --model " + model(), out), 0) << slurp(out);
  const std::string text = slurp(out);
  EXPECT_NE(text.find("115"), std::string::npos) << text;
  EXPECT_NE(text.find("49"), std::string::npos) << text;
}

TEST_F(Cli, PsmPipeline) {
  const fs::path out = dir_ / "stdout.txt";
  ASSERT_EQ(run("traj optimize --model " + model() + " --out " + path("traj.json") + " --log " + path("opt.csv") +
                    " --ff 0.18 --nh 3 --multistart 1 --iterations 10 --seed 3",
                out),
            0)
      << slurp(out);
  ASSERT_EQ(run("traj export --traj " + path("traj.json") + " --out " + path("traj.csv") + " --rate 50", out), 0)
      << slurp(out);
  EXPECT_EQ(slurp(path("traj.csv")).substr(0, 4), "t,q1");
  ASSERT_EQ(run("sim generate --model " + model() + " --traj " + path("traj.json") + " --out " + path("train.csv") +
                    " --truth-out " + path("truth.json") + " --duration 25 --noise 0 --seed 3",
                out),
            0)
      << slurp(out);
  ASSERT_EQ(run("sim generate --model " + model() + " --traj " + path("traj.json") + " --out " + path("test.csv") +
                    " --duration 25 --noise 0 --seed 3",
                out),
            0)
      << slurp(out);
  const std::string filt = " --cutoff 5.4";
  ASSERT_EQ(run("identify --model " + model() + " --log " + path("train.csv") + " --out " + path("params.json") +
                    " --metrics " + path("metrics.csv") + filt,
                out),
            0)
      << slurp(out);
  const Json params = Json::parse(slurp(path("params.json")));
  EXPECT_TRUE(params.contains("feasibility"));
  EXPECT_GE(params["feasibility"]["worst"].get<double>(), -1e-9);

  ASSERT_EQ(run("validate --model " + model() + " --params " + path("params.json") + " --log " + path("test.csv") +
                    " --truth " + path("truth.json") + " --out " + path("errors.csv") + filt,
                out),
            0)
      << slurp(out);
  std::istringstream table(slurp(path("errors.csv")));
  std::string line, last;
  while (std::getline(table, line)) last = line;
  ASSERT_EQ(last.rfind("overall,", 0), 0u) << last;
  EXPECT_LT(std::stod(last.substr(8)), 1.0);

  // ols-base writes base parameters and no feasibility block.
  ASSERT_EQ(run("identify --model " + model() + " --log " + path("train.csv") + " --out " + path("base.json") +
                    " --method ols-base" + filt,
                out),
            0)
      << slurp(out);
  const Json base = Json::parse(slurp(path("base.json")));
  EXPECT_FALSE(base.contains("feasibility"));
  EXPECT_EQ(base["base"].size(), 49u);
  EXPECT_EQ(run("validate --model " + model() + " --params " + path("base.json") + " --log " + path("test.csv") + filt,
                out),
            0)
      << slurp(out);

  // Same inputs and seed: byte-identical outputs.
  const fs::path again = dir_ / "again";
  fs::create_directories(again);
  ASSERT_EQ(run("identify --model " + model() + " --log " + path("train.csv") + " --out " + (again / "params.json").string() +
                    filt,
                out),
            0);
  EXPECT_EQ(slurp(again / "params.json"), slurp(path("params.json")));

  // Provenance next to the outputs.
  const Json manifest = Json::parse(slurp(dir_ / "manifest.json"));
  ASSERT_TRUE(manifest["runs"].contains("params.json"));
  const Json& entry = manifest["runs"]["params.json"];
  EXPECT_EQ(entry["command"], "identify");
  ASSERT_TRUE(entry["outputs"].contains(path("params.json")));
  EXPECT_EQ(entry["outputs"][path("params.json")].get<std::string>().size(), 64u);
  EXPECT_TRUE(entry["inputs"].contains(model()));
  EXPECT_TRUE(manifest["runs"].contains("traj.json"));

  EXPECT_EQ(run("validate --model " + model() + " --params " + path("params.json") + " --log " + path("nope.csv"), out),
            2);
  EXPECT_EQ(run("identify --model " + model() + " --log " + path("train.csv") + " --out " + path("x.json") +
                    " --method magic",
                out),
            2);
  EXPECT_EQ(run("identify --model " + model() + " --log " + path("train.csv") + " --out " + path("x.json") +
                    " --cutoff 150",
                out),
            2);
}

}  // namespace
}  // namespace dynident
