// Copyright 2026 The adrl Authors.
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

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "json.hpp"

#include <sys/wait.h>
#include <unistd.h>

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

const char* kTinyConfig = R"({
  "generator": {"num_sessions": 150, "min_candidates": 5, "max_candidates": 8},
  "model": {"actor": {"hidden": [8]}, "critic": {"branch_width": 8, "joint": [8]}},
  "train": {"total_steps": 12, "serial": true, "batch_size": 16, "replay_per_worker": 100,
            "explore_per_step": 2, "eval_every": 4, "global_update_every": 1},
  "oracle": {"a1": [0.5, 2.0, 0.75], "a2": [0, 10, 10], "a3": [0.5, 2.0, 0.75], "a4": [0, 10, 10],
             "a5": [1.0, 1.0, 1.0], "max_records_per_state": 10},
  "es": {"n": 3, "iterations": 2, "sessions_per_iteration": 200, "traffic_share": 1.0},
  "holdout_sessions": 150
})";

struct Sandbox {
  fs::path dir;
  Sandbox() {
    dir = fs::temp_directory_path() / ("adrl_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter()++));
    fs::remove_all(dir);
    fs::create_directories(dir);
    std::ofstream(dir / "tiny.json") << kTinyConfig;
  }
  ~Sandbox() { fs::remove_all(dir); }
  static int& counter() {
    static int n = 0;
    return n;
  }

  // Runs the CLI with the tiny config and `out` as run directory.
  int run(const std::string& args, const std::string& out = "run") const {
    const std::string cmd = std::string("\"") + ADRL_CLI_PATH + "\" " + args + " --config \"" +
                            (dir / "tiny.json").string() + "\" --out-dir \"" + (dir / out).string() +
                            "\" > \"" + (dir / "stdout.txt").string() + "\" 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }
  int raw(const std::string& args) const {
    const std::string cmd = std::string("\"") + ADRL_CLI_PATH + "\" " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }
  [[nodiscard]] std::string slurp(const fs::path& rel) const {
    std::ifstream in(dir / rel, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }
};

}  // namespace

TEST_CASE("baseline at exponent 1 and the fixed eCPM action give identical reports") {
  Sandbox s;
  REQUIRE(s.run("generate-log") == 0);
  REQUIRE(s.run("calibrate") == 0);
  REQUIRE(s.run("evaluate --policy baseline --squash 1.0 --name a") == 0);
  REQUIRE(s.run("evaluate --policy fixed --action 1,0,1,0,1 --name b") == 0);
  const json a = json::parse(s.slurp("run/evaluation_a.json"));
  const json b = json::parse(s.slurp("run/evaluation_b.json"));
  CHECK(a.at("metrics") == b.at("metrics"));
  CHECK(a.at("metrics").at("impressions").get<int>() > 0);
}

TEST_CASE("full pipeline runs and is reproducible") {
  Sandbox s;
  for (const char* out : {"one", "two"}) {
    REQUIRE(s.run("generate-log", out) == 0);
    REQUIRE(s.run("calibrate", out) == 0);
    REQUIRE(s.run("oracle-search", out) == 0);
    REQUIRE(s.run("train-offline", out) == 0);
    REQUIRE(s.run("evaluate --policy actor", out) == 0);
    REQUIRE(s.run("evaluate --policy baseline", out) == 0);
    REQUIRE(s.run("es-online", out) == 0);
    REQUIRE(s.run("report", out) == 0);
  }
  for (const char* f : {"log.jsonl", "calibration.json", "oracle.json", "actor.bin", "critic.bin", "curve.csv",
                        "evaluation_actor.json", "es_actor.bin", "es_iterations.csv", "report.txt"}) {
    INFO(f);
    CHECK(s.slurp(fs::path("one") / f) == s.slurp(fs::path("two") / f));
  }
  const json ev = json::parse(s.slurp("one/evaluation_actor.json"));
  CHECK(ev.at("metrics").at("rpm").get<double>() > 0.0);

  // One curve row per checkpoint: the initial point plus every 4 updates.
  const std::string report = s.slurp("one/report.txt");
  CHECK(report.find("version,error_uniform,error_impressions") != std::string::npos);
  for (const char* row : {"\n0,", "\n4,", "\n8,", "\n12,"}) CHECK(report.find(row) != std::string::npos);
  CHECK(report.find("dRPM") != std::string::npos);
  CHECK(s.slurp("one/config.resolved.json").find("\"total_steps\": 12") != std::string::npos);
  CHECK(s.slurp("one/manifest.txt").find("command: train-offline") != std::string::npos);
}

TEST_CASE("a different seed changes the log") {
  Sandbox s;
  REQUIRE(s.run("generate-log", "a") == 0);
  REQUIRE(s.run("generate-log --seed 2", "b") == 0);
  CHECK(s.slurp("a/log.jsonl") != s.slurp("b/log.jsonl"));
}

TEST_CASE("exit codes") {
  Sandbox s;
  CHECK(s.raw("") == 1);
  CHECK(s.raw("evaluate --no-such-flag") == 1);
  CHECK(s.raw("frobnicate") == 1);
  CHECK(s.raw("--help") == 0);
  CHECK(s.run("calibrate", "empty") == 2);
  CHECK(s.run("evaluate --policy fixed") == 1);
  CHECK(s.run("evaluate --policy baseline --action 1,0,1,0,1") == 1);
  std::ofstream(s.dir / "bad.json") << R"({"generator": {"sessions": 3}})";
  CHECK(s.raw("generate-log --config \"" + (s.dir / "bad.json").string() + "\" --out-dir \"" +
              (s.dir / "x").string() + "\"") == 1);
  std::ofstream(s.dir / "broken.jsonl") << "{\"not\": \"a record\"}\n";
  CHECK(s.run("calibrate --log \"" + (s.dir / "broken.jsonl").string() + "\"") == 2);
}
