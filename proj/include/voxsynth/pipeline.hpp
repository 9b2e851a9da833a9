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

// End-to-end run: configuration, stage seeds, outputs and the manifest.
//
// Config files are flat "key = value" text ('#' starts a comment). The
// precedence is built-in default < config file < VOXSYNTH_SEED (seed only)
// < command-line flag. Each stage draws its seed as
// derive_seed(master_seed, "<stage>:<generator>").
//
// Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
// divergence, 5 a stage failed after earlier outputs were written (partial
// results plus a manifest marked "failed"), 1 anything unexpected.

#ifndef VOXSYNTH_PIPELINE_HPP_
#define VOXSYNTH_PIPELINE_HPP_

#include <cstdint>
#include <exception>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "voxsynth/attribution.hpp"
#include "voxsynth/classifiers.hpp"
#include "voxsynth/generators.hpp"
#include "voxsynth/selection.hpp"
#include "voxsynth/table.hpp"

namespace voxsynth {

inline constexpr std::string_view kToolName = "voxsynth";
inline constexpr std::string_view kToolVersion = "0.1.0";

using KeyValues = std::map<std::string, std::string>;

struct ConfigKey {
  std::string name;
  std::string default_value;
  std::string help;
};

// Every accepted key with its default, in documentation order.
const std::vector<ConfigKey>& config_keys();

// Throws ConfigError (with the line number) on malformed lines, unknown or
// repeated keys.
KeyValues parse_config_text(std::string_view text);
KeyValues load_config_file(const std::filesystem::path& path);

struct RunConfig {
  std::filesystem::path input;
  std::filesystem::path output;
  std::vector<GeneratorKind> generators{GeneratorKind::tvae, GeneratorKind::ctgan,
                                        GeneratorKind::copulagan};
  GeneratorConfig generator;  // kind and seed are set per generator
  std::string counts_preset = "paper2023";
  std::optional<ClassCounts> counts;           // overrides the preset
  std::optional<ClassCounts> undersample;      // applied to the real table before fitting
  CvProtocol protocol = CvProtocol::synthetic_cv;
  ClassifierKind classifier = ClassifierKind::rf;
  ClassifierParams classifier_params;
  ClassifierParams rfe_params = rfe_base_params();
  std::size_t k_min = 2;
  std::size_t k_max = 9;
  std::size_t max_d = 0;
  AttributionMethod attribution = AttributionMethod::permutation;
  InfluenceOptions influence;
  std::uint64_t seed = 2023;
  std::string seed_source = "default";  // default | config | env | flag
  std::size_t threads = 1;
  bool overwrite = false;

  ClassCounts counts_for(GeneratorKind kind) const;
};

// Layers defaults, file values, the VOXSYNTH_SEED value (may be null) and
// flag values. Throws ConfigError on invalid values.
RunConfig make_run_config(const KeyValues& file, const KeyValues& flags, const char* env_seed);

// Canonical "key = value" rendering of every key, sorted by key.
std::string to_config_text(const RunConfig& config);
// SHA-256 of the canonical text without output, overwrite and threads.
std::string config_hash(const RunConfig& config);

std::uint64_t stage_seed(std::uint64_t master, std::string_view stage);

std::string sha256_hex(std::string_view bytes);

struct ManifestFile {
  std::string path;  // relative to the output directory
  std::string sha256;
  std::uint64_t bytes = 0;
};

struct RunManifest {
  std::string tool{kToolName};
  std::string version{kToolVersion};
  std::string config_hash;
  std::string started;
  std::string finished;
  std::string status = "running";  // complete | failed
  std::string failed_stage;
  std::string error;
  std::uint64_t seed = 0;
  std::string seed_source;
  std::map<std::string, std::uint64_t> stage_seeds;
  std::vector<ManifestFile> files;

  nlohmann::json to_json() const;
  static RunManifest from_json(const nlohmann::json& j);
};

struct RunOutcome {
  RunManifest manifest;
  int exit_code = 0;
  std::string message;
};

using LogFn = std::function<void(std::string_view)>;

// Throws ConfigError when the output directory is non-empty and overwrite
// is off, or holds subdirectories. Stage failures are reported through the
// outcome, never thrown.
RunOutcome run_pipeline(const RunConfig& config, const LogFn& log = {});

// Exit code for an exception escaping a command.
int exit_code_for(const std::exception& e);

// The UCI Parkinson's CSV with its recording-name group column.
Table ingest(const std::filesystem::path& path);

}  // namespace voxsynth

#endif  // VOXSYNTH_PIPELINE_HPP_
