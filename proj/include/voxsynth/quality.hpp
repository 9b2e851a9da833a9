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

// Synthetic-data fidelity scores.
//
// Column shapes: 1 - KS statistic for continuous columns, 1 - total
// variation distance for discrete ones. Column-pair trends: for every
// unordered pair of continuous features, 1 - |rho_real - rho_synth| / 2.
// The overall score is the mean of the two component means.

#ifndef VOXSYNTH_QUALITY_HPP_
#define VOXSYNTH_QUALITY_HPP_

#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "voxsynth/table.hpp"

namespace voxsynth {

double ks_complement(std::span<const double> real, std::span<const double> synth);
// Inputs are category codes in [0, categories).
double tv_complement(std::span<const double> real, std::span<const double> synth,
                     std::size_t categories);
double correlation_similarity_from(double rho_real, double rho_synth);

struct PairTrend {
  std::string a;
  std::string b;
  double real_rho = 0.0;
  double synth_rho = 0.0;
  double score = 0.0;
  // Either side had a zero-variance column; its rho was taken as 0.
  bool zero_variance = false;
};

PairTrend correlation_similarity(const Table& real, const Table& synth, const std::string& a,
                                 const std::string& b,
                                 CorrelationMethod method = CorrelationMethod::pearson);

struct ColumnShape {
  std::string name;
  std::string metric;  // "ks_complement" or "tv_complement"
  double score = 0.0;
};

struct QualityOptions {
  bool include_target = true;
  CorrelationMethod method = CorrelationMethod::pearson;
};

struct QualityReport {
  std::vector<ColumnShape> shapes;
  std::vector<PairTrend> trends;
  double column_shapes_mean = 0.0;
  double column_pair_trends_mean = 0.0;
  double overall = 0.0;
  CorrelationMethod method = CorrelationMethod::pearson;
};

// Group columns are ignored; the remaining schemas must match.
QualityReport quality_score(const Table& real, const Table& synth,
                            const QualityOptions& options = {});

nlohmann::json to_json(const QualityReport& report);

}  // namespace voxsynth

#endif  // VOXSYNTH_QUALITY_HPP_
