// Copyright 2026 The RKT Authors.
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

#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "test_util.hpp"

namespace {

namespace fs = std::filesystem;

struct Result {
  int code = -1;
  std::string output;
};

Result run(const std::string& args) {
  const std::string cmd = std::string(RKT_CLI_PATH) + " " + args + " 2>&1";
  Result r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  while (std::fgets(buf, sizeof buf, pipe)) r.output += buf;
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

// Small synthetic data set shared by the tests below.
class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = rkt::testing::scratch_dir("cli");
    const auto r = run("gen-synth --out-dir " + dir_.string() +
                       " --students 40 --interactions 20 --seed 3");
    ASSERT_EQ(r.code, 0) << r.output;
  }
  static std::string path(const std::string& name) { return (dir_ / name).string(); }
  static fs::path dir_;
};

fs::path Cli::dir_;

TEST_F(Cli, GenSynthWritesFilesAndManifest) {
  for (const char* f : {"logs.jsonl", "exercises.jsonl", "truth.json", "manifest.json"})
    EXPECT_TRUE(fs::exists(dir_ / f)) << f;
  std::ifstream in(dir_ / "manifest.json");
  const auto m = nlohmann::json::parse(in);
  EXPECT_EQ(m["command"], "gen-synth");
  EXPECT_EQ(m["seed"], 3);
  EXPECT_TRUE(m.contains("checksums"));
}

TEST_F(Cli, HelpListsSubcommands) {
  const auto r = run("--help");
  EXPECT_EQ(r.code, 0);
  for (const char* sub : {"gen-synth", "build-relations", "train", "eval", "ablate",
                          "export-attention", "gradcheck", "rerun"})
    EXPECT_NE(r.output.find(sub), std::string::npos) << sub;
}

TEST_F(Cli, UsageErrorsExitOne) {
  EXPECT_EQ(run("").code, 1);
  EXPECT_EQ(run("train").code, 1);  // missing --logs
  EXPECT_EQ(run("frobnicate").code, 1);
  EXPECT_EQ(run("build-relations --logs " + path("logs.jsonl") + " --out " +
                path("x.csv") + " --method 9").code,
            1);
  // a relation file and mining options together
  EXPECT_EQ(run("train --logs " + path("logs.jsonl") + " --texts " + path("exercises.jsonl") +
                " --relations " + path("x.csv") + " --theta 0.5 --out-dir " + path("t"))
                .code,
            1);
  EXPECT_EQ(run("train --logs " + path("logs.jsonl") + " --texts " + path("exercises.jsonl") +
                " --no-relation --no-forget --lambda 0.5 --out-dir " + path("t"))
                .code,
            1);
  EXPECT_EQ(run("rerun " + path("missing.json")).code, 1);
}

TEST_F(Cli, SameConceptWithoutLabelsIsUsageError) {
  {
    std::ofstream out(dir_ / "nokc.jsonl");
    out << R"({"exercise_id": 0, "text": "add two numbers"})" << "\n";
    out << R"({"exercise_id": 1, "text": "subtract numbers"})" << "\n";
  }
  const auto r = run("build-relations --logs " + path("logs.jsonl") + " --texts " +
                     path("nokc.jsonl") + " --method 1 --out " + path("m1.csv"));
  EXPECT_EQ(r.code, 1) << r.output;
  EXPECT_NE(r.output.find("method 1"), std::string::npos) << r.output;
}

TEST_F(Cli, MalformedDataExitsTwo) {
  {
    std::ofstream out(dir_ / "bad.jsonl");
    out << R"({"student_id": 1, "exercise_id": 0, "correct": 1, "timestamp": 0})" << "\n";
    out << "{oops\n";
  }
  const auto r = run("build-relations --logs " + path("bad.jsonl") + " --method 3 --out " +
                     path("bad.csv"));
  EXPECT_EQ(r.code, 2) << r.output;
  EXPECT_NE(r.output.find(":2:"), std::string::npos) << r.output;
  // a path that does not exist is rejected while parsing arguments
  EXPECT_EQ(run("build-relations --logs " + path("nope.jsonl") + " --method 3 --out " +
                path("bad.csv")).code,
            1);
}

TEST_F(Cli, GradcheckPasses) {
  const auto r = run("gradcheck --d 4 --l 4 --coordinates 50");
  EXPECT_EQ(r.code, 0) << r.output;
  EXPECT_NE(r.output.find("PASS"), std::string::npos) << r.output;
  EXPECT_EQ(run("gradcheck --tolerance 1e-30").code, 3);
}

TEST_F(Cli, TrainEvalAndRerun) {
  const std::string out = path("model");
  auto r = run("train --logs " + path("logs.jsonl") + " --texts " + path("exercises.jsonl") +
               " --d 8 --l 10 --epochs 2 --batch-size 16 --out-dir " + out);
  ASSERT_EQ(r.code, 0) << r.output;
  for (const char* f : {"model.ckpt", "model.json", "report.json", "manifest.json"})
    EXPECT_TRUE(fs::exists(fs::path(out) / f)) << f;

  r = run("eval --model-dir " + out + " --logs " + path("logs.jsonl") + " --groups");
  ASSERT_EQ(r.code, 0) << r.output;
  std::ifstream in(fs::path(out) / "eval.json");
  const auto report = nlohmann::json::parse(in);
  EXPECT_GT(report["count"].get<int>(), 0);
  EXPECT_EQ(report["groups"].size(), 4u);

  r = run("export-attention --model-dir " + out + " --logs " + path("logs.jsonl") + " --out " +
          path("attn.csv"));
  ASSERT_EQ(r.code, 0) << r.output;
  std::ifstream csv(path("attn.csv"));
  std::string header;
  std::getline(csv, header);
  EXPECT_EQ(header, "t,j,alpha,rE,rT,beta");

  r = run("rerun " + (fs::path(out) / "manifest.json").string());
  EXPECT_EQ(r.code, 0) << r.output;
}

TEST_F(Cli, ConfigFileIsOverriddenByFlags) {
  {
    std::ofstream cfg(dir_ / "cfg.json");
    cfg << R"({"model": {"d": 6, "lambda": 0.25}, "train": {"epochs": 1, "batch_size": 8}})";
  }
  const std::string out = path("cfgmodel");
  const auto r = run("train --logs " + path("logs.jsonl") + " --texts " +
                     path("exercises.jsonl") + " --config " + path("cfg.json") +
                     " --l 10 --d 4 --out-dir " + out);
  ASSERT_EQ(r.code, 0) << r.output;
  std::ifstream in(fs::path(out) / "manifest.json");
  const auto m = nlohmann::json::parse(in);
  EXPECT_EQ(m["config"]["model"]["d"], 4);
  EXPECT_EQ(m["config"]["model"]["lambda"], 0.25);
  EXPECT_EQ(m["config"]["train"]["epochs"], 1);
}

}  // namespace
