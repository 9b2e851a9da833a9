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

// Feature influence for fitted classifiers: permutation importance on F1 and
// permutation-sampling Shapley values with marginal background replacement.
//
// Shapley values explain the patient-class probability. For one permutation
// and one background row b the estimator walks from b to x, switching one
// feature at a time, and credits each step's change in f to the switched
// feature; the per-pair contributions therefore sum to f(x) - f(b).

#ifndef VOXSYNTH_ATTRIBUTION_HPP_
#define VOXSYNTH_ATTRIBUTION_HPP_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "voxsynth/classifiers.hpp"
#include "voxsynth/table.hpp"

namespace voxsynth {

// Batch scorers: one output per row of the input matrix.
using LabelFn = std::function<std::vector<int>(const Matrix&)>;
using ScoreFn = std::function<std::vector<double>(const Matrix&)>;

// importance(j) = f1(X) - mean over repeats of f1(X with column j permuted).
// Repeat r of column j shuffles with derive_seed(derive_seed(seed, j), r).
// Throws ShapeError on size mismatch or fewer than 2 rows, ConfigError for
// repeats == 0 and DegenerateLabels when y has no patient rows.
std::vector<double> permutation_importance(const LabelFn& predict_labels, const Matrix& x,
                                           std::span<const int> y, std::size_t repeats,
                                           std::uint64_t seed);
std::vector<double> permutation_importance(const ClassifierModel& model, const Matrix& x,
                                           std::span<const int> y, std::size_t repeats,
                                           std::uint64_t seed);

enum class ShapleyMode {
  sampled,     // n_permutations random (permutation, background row) pairs
  exhaustive,  // every permutation of the features times every background row
};

struct ShapleyResult {
  std::vector<double> values;
  // Standard error of each value (0 in exhaustive mode).
  std::vector<double> std_error;
  double prediction = 0.0;       // f(x)
  double background_mean = 0.0;  // mean f over the background rows
  // |sum(values) - (prediction - background_mean)|
  double residual = 0.0;
  std::size_t evaluations = 0;   // (permutation, background row) pairs walked
};

// Throws ConfigError for n_permutations == 0 (sampled mode) or more than 10
// features in exhaustive mode, and ShapeError when the row width or an empty
// background does not fit.
ShapleyResult shapley_sampled(const ScoreFn& score, std::span<const double> x,
                              const Matrix& background, std::size_t n_permutations,
                              std::uint64_t seed, ShapleyMode mode = ShapleyMode::sampled);
ShapleyResult shapley_sampled(const ClassifierModel& model, std::span<const double> x,
                              const Matrix& background, std::size_t n_permutations,
                              std::uint64_t seed, ShapleyMode mode = ShapleyMode::sampled);

enum class AttributionMethod { permutation, shapley };

std::string_view to_string(AttributionMethod method);
AttributionMethod parse_attribution_method(std::string_view text);

struct InfluenceOptions {
  int class_filter = 1;
  std::size_t repeats = 10;           // permutation
  std::size_t n_permutations = 200;   // shapley, per explained row
  std::size_t background_cap = 100;   // shapley
};

struct FeatureInfluence {
  std::string feature;
  double mean_abs = 0.0;  // mean |attribution| (|importance| for permutation)
  double mean = 0.0;      // signed mean attribution or importance
  std::size_t rank = 0;   // 1 = most influential
};

struct BackgroundInfo {
  std::size_t rows_available = 0;
  std::size_t rows_used = 0;
  std::size_t cap = 0;
  std::uint64_t seed = 0;
};

struct InfluenceReport {
  AttributionMethod method = AttributionMethod::permutation;
  std::vector<FeatureInfluence> features;  // model feature order
  std::size_t rows = 0;                    // rows scored
  int class_filter = 1;
  BackgroundInfo background;               // shapley only
  double mean_residual = 0.0;              // shapley only
  double max_residual = 0.0;
  std::uint64_t seed = 0;

  // Feature names ordered by rank.
  std::vector<std::string> ranked() const;
  nlohmann::json to_json() const;
};

// Shapley explains the rows of `test` whose target equals
// options.class_filter; permutation importance is a dataset-level score and
// uses every row of `test` (F1 needs both classes).
// `background` (shapley) is typically the model's training table; at most
// background_cap rows are drawn from it with derive_seed(seed, "background").
// Ranks sort by mean_abs descending, ties in model feature order. Throws
// InsufficientData when no row matches the filter.
InfluenceReport influence_report(const ClassifierModel& model, const Table& test,
                                 AttributionMethod method, std::uint64_t seed,
                                 const Table* background = nullptr,
                                 const InfluenceOptions& options = {});

}  // namespace voxsynth

#endif  // VOXSYNTH_ATTRIBUTION_HPP_
