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

// Fixed toy artifacts whose rendered reports are checked in under
// tests/golden/.

#ifndef VOXSYNTH_TESTS_GOLDEN_HPP_
#define VOXSYNTH_TESTS_GOLDEN_HPP_

#include <filesystem>
#include <string>
#include <vector>

#include "voxsynth/attribution.hpp"
#include "voxsynth/selection.hpp"
#include "voxsynth/table.hpp"

namespace voxsynth::testing {

EvalGrid toy_grid();
InfluenceReport toy_influence();
CorrelationMatrix toy_correlation();

std::filesystem::path golden_dir();

struct GoldenCase {
  std::string file;      // name under golden_dir()
  std::string rendered;  // current rendering
};

// Every golden file with its current rendering.
std::vector<GoldenCase> golden_cases();

std::string read_file(const std::filesystem::path& path);

}  // namespace voxsynth::testing

#endif  // VOXSYNTH_TESTS_GOLDEN_HPP_
