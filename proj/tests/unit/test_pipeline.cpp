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

#include <filesystem>
#include <fstream>
#include <set>

#include "catch_amalgamated.hpp"
#include "golden.hpp"
#include "standin.hpp"
#include "voxsynth/error.hpp"
#include "voxsynth/pipeline.hpp"
#include "voxsynth/rng.hpp"

using namespace voxsynth;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("voxsynth_pipeline_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

fs::path standin_file(const fs::path& dir) {
  const auto path = dir / "standin.csv";
  std::ofstream(path) << voxsynth::testing::standin_csv(1);
  return path;
}

KeyValues tiny_run(const fs::path& input, const fs::path& output) {
  return {{"input", input.string()},
          {"output", output.string()},
          {"epochs", "2"},
          {"batch_size", "20"},
          {"pac", "5"},
          {"embedding_dim", "8"},
          {"hidden", "16"},
          {"n_trees", "5"},
          {"rfe_trees", "5"},
          {"k_min", "2"},
          {"k_max", "3"},
          {"max_d", "3"},
          {"attribution", "shapley"},
          {"n_permutations", "5"},
          {"seed", "17"}};
}

}  // namespace

TEST_CASE("config text parsing") {
  const auto kv = parse_config_text("# comment\n\nseed = 12\n  epochs=3   # trailing\nprotocol = tstr\n");
  REQUIRE(kv.at("seed") == "12");
  REQUIRE(kv.at("epochs") == "3");
  REQUIRE(kv.at("protocol") == "tstr");
  REQUIRE(kv.size() == 3);
  REQUIRE_THROWS_AS(parse_config_text("seed 12\n"), ConfigError);
  REQUIRE_THROWS_AS(parse_config_text("colour = red\n"), ConfigError);
  REQUIRE_THROWS_AS(parse_config_text("seed = 1\nseed = 2\n"), ConfigError);
  try {
    parse_config_text("seed = 1\n\nbogus = 2\n");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    REQUIRE(std::string(e.what()).find("line 3") != std::string::npos);
  }
  for (const auto& key : config_keys()) REQUIRE(!key.help.empty());
}

TEST_CASE("flags beat the environment, which beats the file") {
  const KeyValues file{{"seed", "5"}, {"epochs", "7"}};
  const auto from_file = make_run_config(file, {}, nullptr);
  REQUIRE(from_file.seed == 5);
  REQUIRE(from_file.seed_source == "config");
  REQUIRE(from_file.generator.epochs == 7);
  const auto from_env = make_run_config(file, {}, "9");
  REQUIRE(from_env.seed == 9);
  REQUIRE(from_env.seed_source == "env");
  const auto from_flag = make_run_config(file, {{"seed", "11"}, {"epochs", "4"}}, "9");
  REQUIRE(from_flag.seed == 11);
  REQUIRE(from_flag.seed_source == "flag");
  REQUIRE(from_flag.generator.epochs == 4);
  REQUIRE(make_run_config({}, {}, nullptr).seed_source == "default");
  REQUIRE_THROWS_AS(make_run_config({}, {}, "nine"), ConfigError);
}

TEST_CASE("config values are validated") {
  REQUIRE_THROWS_AS(make_run_config({{"epochs", "abc"}}, {}, nullptr), ConfigError);
  REQUIRE_THROWS_AS(make_run_config({{"epochs", "0"}}, {}, nullptr), ConfigError);
  REQUIRE_THROWS_AS(make_run_config({{"generators", "tvae,gan"}}, {}, nullptr), ConfigError);
  REQUIRE_THROWS_AS(make_run_config({{"k_min", "5"}, {"k_max", "3"}}, {}, nullptr), ConfigError);
  REQUIRE_THROWS_AS(make_run_config({{"counts", "92"}}, {}, nullptr), ConfigError);
  REQUIRE_THROWS_AS(make_run_config({{"counts_preset", "paper2030"}}, {}, nullptr), ConfigError);
  const auto c = make_run_config({{"generators", "ctgan"}, {"counts", "10:12"}, {"undersample", "48:48"},
                                  {"hidden", "32,16"}, {"classifier", "xgb"}},
                                 {}, nullptr);
  REQUIRE(c.generators == std::vector<GeneratorKind>{GeneratorKind::ctgan});
  REQUIRE(c.counts_for(GeneratorKind::ctgan).healthy == 10);
  REQUIRE(c.counts_for(GeneratorKind::ctgan).patient == 12);
  REQUIRE(c.undersample->healthy == 48);
  REQUIRE(c.generator.critic_hidden == std::vector<std::size_t>{32, 16});
  REQUIRE(c.classifier == ClassifierKind::xgb);
  const auto preset = make_run_config({}, {}, nullptr);
  REQUIRE(preset.counts_for(GeneratorKind::tvae).healthy == 92);
  REQUIRE(preset.counts_for(GeneratorKind::copulagan).patient == 94);
}

TEST_CASE("config hash ignores run location") {
  const auto a = make_run_config({{"output", "/tmp/a"}, {"threads", "1"}}, {}, nullptr);
  const auto b = make_run_config({{"output", "/tmp/b"}, {"threads", "4"}, {"overwrite", "true"}}, {}, nullptr);
  const auto c = make_run_config({{"output", "/tmp/a"}, {"epochs", "5"}}, {}, nullptr);
  REQUIRE(config_hash(a) == config_hash(b));
  REQUIRE(config_hash(a) != config_hash(c));
  REQUIRE(config_hash(a).size() == 64);
  const auto text = to_config_text(a);
  REQUIRE(make_run_config(parse_config_text(text), {}, nullptr).generator.epochs == a.generator.epochs);
}

TEST_CASE("stage seeds and digests") {
  REQUIRE(stage_seed(42, "fit:tvae") == derive_seed(42, "fit:tvae"));
  REQUIRE(stage_seed(42, "fit:tvae") != stage_seed(42, "fit:ctgan"));
  REQUIRE(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  REQUIRE(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST_CASE("exit codes follow error classes") {
  REQUIRE(exit_code_for(ConfigError("x")) == 2);
  REQUIRE(exit_code_for(FormatError("x")) == 2);
  REQUIRE(exit_code_for(ParseError("x")) == 3);
  REQUIRE(exit_code_for(FoldInfeasible("x")) == 3);
  REQUIRE(exit_code_for(NumericalDivergence("x")) == 4);
  REQUIRE(exit_code_for(std::runtime_error("x")) == 1);
}

TEST_CASE("an occupied output directory is refused") {
  const auto dir = scratch("occupied");
  const auto input = standin_file(dir);
  auto kv = tiny_run(input, dir);
  REQUIRE_THROWS_AS(run_pipeline(make_run_config(kv, {}, nullptr)), ConfigError);
  const auto nested = scratch("nested");
  fs::create_directories(nested / "sub");
  kv = tiny_run(input, nested);
  kv["overwrite"] = "true";
  REQUIRE_THROWS_AS(run_pipeline(make_run_config(kv, {}, nullptr)), ConfigError);
}

TEST_CASE("a missing input fails at ingest without data files") {
  const auto dir = scratch("missing");
  const auto out = dir / "out";
  const auto outcome = run_pipeline(make_run_config(tiny_run(dir / "absent.csv", out), {}, nullptr));
  REQUIRE(outcome.exit_code == 3);
  REQUIRE(outcome.manifest.status == "failed");
  REQUIRE(outcome.manifest.failed_stage == "ingest");
  REQUIRE(outcome.manifest.files.empty());
  std::vector<std::string> present;
  for (const auto& e : fs::directory_iterator(out)) present.push_back(e.path().filename().string());
  REQUIRE(present == std::vector<std::string>{"manifest.json"});
}

TEST_CASE("a late stage failure leaves partial outputs and exit code 5") {
  const auto dir = scratch("partial");
  auto kv = tiny_run(standin_file(dir), dir / "out");
  kv["generators"] = "tvae";
  kv["counts"] = "3:3";
  kv["k_max"] = "5";
  const auto outcome = run_pipeline(make_run_config(kv, {}, nullptr));
  REQUIRE(outcome.exit_code == 5);
  REQUIRE(outcome.manifest.status == "failed");
  REQUIRE(outcome.manifest.failed_stage == "sweep:tvae");
  REQUIRE(!outcome.manifest.files.empty());
  const auto j = nlohmann::json::parse(voxsynth::testing::read_file(dir / "out" / "manifest.json"));
  REQUIRE(j.at("status") == "failed");
}

TEST_CASE("end-to-end runs are deterministic and fully manifested") {
  const auto dir = scratch("e2e");
  const auto input = standin_file(dir);
  const auto first = run_pipeline(make_run_config(tiny_run(input, dir / "a"), {}, nullptr));
  INFO(first.message);
  REQUIRE(first.exit_code == 0);
  REQUIRE(first.manifest.status == "complete");
  const auto second = run_pipeline(make_run_config(tiny_run(input, dir / "b"), {}, nullptr));
  REQUIRE(second.exit_code == 0);

  auto strip = [](RunManifest m) {
    m.started.clear();
    m.finished.clear();
    return m.to_json();
  };
  REQUIRE(strip(first.manifest) == strip(second.manifest));

  std::set<std::string> listed;
  for (const auto& f : first.manifest.files) {
    listed.insert(f.path);
    const auto bytes = voxsynth::testing::read_file(dir / "a" / f.path);
    REQUIRE(sha256_hex(bytes) == f.sha256);
    REQUIRE(bytes.size() == f.bytes);
  }
  std::set<std::string> present;
  for (const auto& e : fs::directory_iterator(dir / "a")) {
    if (e.path().filename() != "manifest.json") present.insert(e.path().filename().string());
  }
  REQUIRE(listed == present);
  for (const auto* name : {"quality_tvae.json", "eval_grid_ctgan.csv", "influence_copulagan.svg",
                           "quality_summary.csv", "best_configs.csv", "synthetic_tvae.csv"}) {
    REQUIRE(listed.count(name) == 1);
  }
  REQUIRE(first.manifest.stage_seeds.at("fit:tvae") == stage_seed(17, "fit:tvae"));

  // Re-running into an existing directory with overwrite replaces it.
  auto kv = tiny_run(input, dir / "a");
  kv["overwrite"] = "true";
  const auto third = run_pipeline(make_run_config(kv, {}, nullptr));
  REQUIRE(strip(third.manifest) == strip(first.manifest));
}
