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

// Deterministic invariant checks behind `voxsynth verify`, and digest checks
// for a finished run directory.

#ifndef VOXSYNTH_VERIFY_HPP_
#define VOXSYNTH_VERIFY_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace voxsynth {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

struct VerifyOptions {
  // Corpus for the end-to-end determinism check; a generated voice-schema
  // fixture is used when absent.
  std::optional<std::filesystem::path> input;
  // Scratch space for the determinism runs (removed afterwards).
  std::filesystem::path scratch = std::filesystem::temp_directory_path() / "voxsynth_verify";
};

// transforms.round_trip, em.monotone, nn.gradient_check, gp.analytic,
// quality.hand_cases, shapley.brute_force, shapley.residual,
// boosting.loss_monotone, folds.stratified, manifest.determinism.
std::vector<CheckResult> run_invariant_suite(const VerifyOptions& options = {});

// Every manifest entry exists with its digest and size, no unlisted files,
// and the manifest reports a complete run.
std::vector<CheckResult> verify_run_directory(const std::filesystem::path& dir);

// CSV text in the UCI layout with random positive feature values for
// `subjects` subjects of `recordings` rows each (alternating status).
std::string voice_fixture_csv(std::size_t subjects, std::size_t recordings, std::uint64_t seed);

}  // namespace voxsynth

#endif  // VOXSYNTH_VERIFY_HPP_
