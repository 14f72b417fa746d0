// Copyright 2026 The kdt Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <catch2/catch_amalgamated.hpp>

namespace fs = std::filesystem;

namespace {

std::string cli() {
  const char* p = std::getenv("KDT_CLI");
  REQUIRE(p != nullptr);
  return p;
}

int run(const std::string& args) {
  std::string cmd = cli() + " " + args + " > /dev/null 2>&1";
  int rc = std::system(cmd.c_str());
  return WEXITSTATUS(rc);
}

fs::path workdir() {
  auto d = fs::temp_directory_path() / "kdt_cli_test";
  fs::create_directories(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_CASE("cli: synth -> featurize -> train -> report smoke test") {
  auto d = workdir();
  auto csv = (d / "events.csv").string();
  auto kdf = (d / "feat.kdf").string();

  REQUIRE(run("synth --seed 3 --users 2 --keystrokes 900 --out " + csv) == 0);
  REQUIRE(fs::exists(csv));

  REQUIRE(run("featurize --in " + csv + " --out " + kdf +
              " --mode kdi --length 100 --min-keystrokes 100") == 0);
  auto payload = slurp(kdf);
  CHECK(payload.substr(0, 4) == "KDF1");

  REQUIRE(run("train --in " + kdf +
              " --model cnn --user synth0 --cutout on --epochs 1 --folds 2"
              " --seed 5 --out-dir " + (d / "run").string()) == 0);
  auto metrics = d / "run" / "metrics.csv";
  REQUIRE(fs::exists(metrics));
  auto text = slurp(metrics);
  CHECK(text.find("synth0") != std::string::npos);
  CHECK(text.find("mean") != std::string::npos);
  CHECK(fs::exists(d / "run" / "checkpoint_synth0.json"));

  REQUIRE(run("report --in " + metrics.string() + " --out " +
              (d / "report.csv").string()) == 0);
  CHECK(slurp(d / "report.csv").find("overall") != std::string::npos);
}

TEST_CASE("cli: eval rejects a layout/model mismatch with exit 2") {
  auto d = workdir();
  auto kdf = (d / "feat.kdf").string();  // KDI features from the smoke test
  if (!fs::exists(kdf)) {
    auto csv = (d / "events.csv").string();
    REQUIRE(run("synth --seed 3 --users 2 --keystrokes 900 --out " + csv) ==
            0);
    REQUIRE(run("featurize --in " + csv + " --out " + kdf +
                " --mode kdi --length 100 --min-keystrokes 100") == 0);
  }
  CHECK(run("train --in " + kdf + " --model cnn-rnn --user synth0 --epochs 1"
            " --folds 2 --out-dir " + (d / "x").string()) == 2);
}

TEST_CASE("cli: missing input file exits 1") {
  CHECK(run("featurize --in /nonexistent/events.csv --out /tmp/x.kdf") == 1);
}

TEST_CASE("cli: bad arguments exit 2") {
  auto d = workdir();
  CHECK(run("definitely-not-a-command") == 2);
  CHECK(run("synth --users 0 --out " + (d / "z.csv").string()) == 2);
  CHECK(run("featurize --in " + (d / "events.csv").string() +
            " --out /tmp/x.kdf --length 1") == 2);
  CHECK(run("featurize --in " + (d / "events.csv").string() +
            " --out /tmp/x.kdf --mode kde") == 2);
}

TEST_CASE("cli: gridsearch dry run enumerates the full grid") {
  auto d = workdir();
  auto kdf = (d / "feat.kdf").string();
  auto out = (d / "grid.csv").string();
  REQUIRE(run("gridsearch --in " + kdf + " --grid paper --dry-run --out " +
              out) == 0);
  auto text = slurp(out);
  std::size_t rows = std::count(text.begin(), text.end(), '\n');
  CHECK(rows == 49);  // header + 48 cells
}
