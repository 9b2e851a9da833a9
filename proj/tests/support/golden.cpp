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

#include "golden.hpp"

#include <fstream>
#include <iterator>

#include "voxsynth/report.hpp"

namespace voxsynth::testing {

EvalGrid toy_grid() {
  EvalGrid g;
  g.ks = {2, 3};
  g.max_d = 3;
  g.ranking.elimination_order = {"spread2", "ppe", "spread1"};
  g.ranking.eliminations = 2;
  g.seed = 7;
  const double f1[2][3] = {{0.75, 0.8125, 0.875}, {0.7, 0.9, 0.85}};
  for (std::size_t k : g.ks) {
    for (std::size_t d = 1; d <= 3; ++d) {
      const double m = f1[k - 2][d - 1];
      std::vector<double> folds(k, m);
      folds[0] = m - 0.0625;
      folds[1] = m + 0.0625;
      g.cells.push_back({k, d, m, folds});
    }
  }
  return g;
}

InfluenceReport toy_influence() {
  InfluenceReport r;
  r.method = AttributionMethod::shapley;
  r.rows = 12;
  r.seed = 3;
  r.background = {40, 40, 100, 99};
  r.mean_residual = 0.001;
  r.max_residual = 0.004;
  r.features = {{"mdvp_fo_hz", 0.02, -0.01, 3},
                {"ppe", 0.11, 0.09, 1},
                {"spread1", 0.07, 0.05, 2},
                {"hnr", 0.0, 0.0, 4}};
  return r;
}

CorrelationMatrix toy_correlation() {
  CorrelationMatrix m;
  m.names = {"a", "b", "c"};
  m.values.resize(3, 3);
  m.values << 1.0, -1.0, 0.5, -1.0, 1.0, 0.0, 0.5, 0.0, 1.0;
  m.zero_variance = {false, false, false};
  return m;
}

std::filesystem::path golden_dir() {
  return std::filesystem::path(VOXSYNTH_SOURCE_DIR) / "tests" / "golden";
}

std::vector<GoldenCase> golden_cases() {
  return {{"eval_grid.csv", render(toy_grid(), ReportFormat::csv)},
          {"eval_grid.svg", render(toy_grid(), ReportFormat::svg)},
          {"influence.json", render(toy_influence(), ReportFormat::json)},
          {"influence.svg", render(toy_influence(), ReportFormat::svg)},
          {"correlation.csv", render(toy_correlation(), ReportFormat::csv)},
          {"correlation.svg", render(toy_correlation(), ReportFormat::svg)}};
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace voxsynth::testing
