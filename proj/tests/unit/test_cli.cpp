/*
 * Copyright 2026 The voxsynth Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */


#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <fmt/format.h>
#include <sys/wait.h>

#include "catch_amalgamated.hpp"
#include "golden.hpp"
#include "voxsynth/verify.hpp"

namespace fs = std::filesystem;

namespace {

const fs::path kDir = fs::temp_directory_path() / "voxsynth_cli";

int cli(const std::string& args) {
  const auto cmd = fmt::format("cd '{}' && '{}' {} >out.txt 2>err.txt", kDir.string(), VOXSYNTH_CLI, args);
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string out() { return voxsynth::testing::read_file(kDir / "out.txt"); }
std::string err() { return voxsynth::testing::read_file(kDir / "err.txt"); }

struct Workspace {
  Workspace() {
    fs::remove_all(kDir);
    fs::create_directories(kDir);
    std::ofstream(kDir / "corpus.csv") << voxsynth::voice_fixture_csv(8, 6, 3);
  }
  ~Workspace() { fs::remove_all(kDir); }
};

}  // namespace

TEST_CASE("usage errors exit 2") {
  Workspace w;
  CHECK(cli("") == 2);
  CHECK(cli("run --no-such-flag 1") == 2);
  CHECK(cli("heatmap corpus.csv --class nobody") == 2);
  CHECK(cli("synth --kind tvae --out s.csv") == 2);
  CHECK(cli("run --input corpus.csv --output o --epochs zero") == 2);
  CHECK(cli("--version") == 0);
  CHECK(out().find("0.1.0") != std::string::npos);
}

TEST_CASE("data errors exit 3") {
  Workspace w;
  CHECK(cli("ingest missing.csv") == 3);
  std::ofstream(kDir / "bad.csv") << "a,b\n1,2\n";
  CHECK(cli("ingest bad.csv") == 3);
  CHECK(cli("run --input missing.csv --output run") == 3);
  CHECK_FALSE(fs::exists(kDir / "run" / "config_resolved.txt"));
  CHECK(fs::exists(kDir / "run" / "manifest.json"));
}

TEST_CASE("subcommands chain through files") {
  Workspace w;
  REQUIRE(cli("ingest corpus.csv --json") == 0);
  CHECK(out().find("\"rows\": 48") != std::string::npos);
  REQUIRE(cli("heatmap corpus.csv --out h.svg") == 0);
  CHECK(fs::file_size(kDir / "h.svg") > 0);
  REQUIRE(cli("synth --input corpus.csv --kind ctgan --epochs 3 --hidden 16 --embedding_dim 8 --pac 4 "
                   "--batch_size 16 --n-healthy 20 --n-patient 24 --out s.csv --model-out m.vxgen") == 0);
  REQUIRE(cli("synth --model m.vxgen --n-healthy 5 --n-patient 6 --out s2.csv") == 0);
  CHECK(err().find("11 rows") != std::string::npos);
  REQUIRE(cli("quality --real corpus.csv --synthetic s.csv --out q.csv") == 0);
  REQUIRE(cli("select --input s.csv --ranking-out r.json --out g.csv --k_max 3 --n_trees 5 --rfe_trees 5") == 0);
  CHECK(voxsynth::testing::read_file(kDir / "g.csv").rfind("k,d,f1_mean,", 0) == 0);
  REQUIRE(cli("train --input s.csv --ranking r.json --d 4 --n_trees 5 --test corpus.csv --model-out c.vxclf") == 0);
  CHECK(out().find("accuracy") != std::string::npos);
  CHECK(cli("explain --model c.vxclf --input corpus.csv --attribution shapley") == 2);
  REQUIRE(cli("explain --model c.vxclf --input corpus.csv --background s.csv --attribution shapley "
                   "--n_permutations 5 --out i.json") == 0);
  CHECK(fs::file_size(kDir / "i.json") > 0);
  CHECK(cli("quality --real corpus.csv --synthetic s.csv --out q.svg") == 2);
}

TEST_CASE("run, refuse reuse, verify") {
  Workspace w;
  std::ofstream(kDir / "small.cfg") << "input = corpus.csv\ngenerators = tvae\nepochs = 2\nhidden = 8\n"
                                       "embedding_dim = 4\nn_trees = 3\nrfe_trees = 3\nk_max = 2\nmax_d = 2\n"
                                       "seed = 1\n";
  REQUIRE(setenv("VOXSYNTH_SEED", "44", 1) == 0);
  const int first = cli("run --config small.cfg --output run");
  unsetenv("VOXSYNTH_SEED");
  REQUIRE(first == 0);
  const auto manifest = voxsynth::testing::read_file(kDir / "run" / "manifest.json");
  CHECK(manifest.find("\"seed\": 44") != std::string::npos);
  CHECK(manifest.find("\"seed_source\": \"env\"") != std::string::npos);
  CHECK(cli("run --config small.cfg --output run") == 2);
  REQUIRE(cli("run --config small.cfg --output run --overwrite true --seed 45") == 0);
  CHECK(voxsynth::testing::read_file(kDir / "run" / "manifest.json").find("\"seed_source\": \"flag\"") !=
        std::string::npos);
  CHECK(cli("verify --run run") == 0);
  std::ofstream(kDir / "run" / "extra.txt") << "x";
  CHECK(cli("verify --run run") == 1);
  CHECK(out().find("FAIL manifest.no_orphans") != std::string::npos);
}
