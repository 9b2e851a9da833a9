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

// Recursive feature elimination and the (fold count x subset size)
// cross-validation sweep.
//
// Every seeded procedure here first reorders rows with canonical_row_order,
// so results do not depend on the row order of the input table.

#ifndef VOXSYNTH_SELECTION_HPP_
#define VOXSYNTH_SELECTION_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "voxsynth/classifiers.hpp"
#include "voxsynth/table.hpp"

namespace voxsynth {

struct RfeRanking {
  // First eliminated ... last survivor; a permutation of the feature names.
  std::vector<std::string> elimination_order;
  ClassifierParams base_params;
  std::uint64_t seed = 0;
  std::size_t eliminations = 0;

  std::size_t size() const noexcept { return elimination_order.size(); }
  // The d last survivors, best first. Throws IndexError unless 1 <= d <= size().
  std::vector<std::string> subset(std::size_t d) const;

  nlohmann::json to_json() const;
  static RfeRanking from_json(const nlohmann::json& j);
};

// Random forest used as the RFE base learner: 100 trees, defaults otherwise.
ClassifierParams rfe_base_params();

// Fits the base forest on the surviving features and drops the one with the
// lowest impurity importance (ties: earliest in schema order) until one is
// left. Iteration i uses derive_seed(seed, i).
RfeRanking rfe_rank(const Table& table, const ClassifierParams& base_params, std::uint64_t seed);

// Fold id per row: rows are visited in a seeded shuffle and dealt round-robin
// within each class. Throws ConfigError for k < 2 and FoldInfeasible when a
// class has fewer than k rows.
std::vector<std::size_t> stratified_folds(std::span<const int> labels, std::size_t k,
                                          std::uint64_t seed);

enum class CvProtocol {
  synthetic_cv,  // folds over the synthetic table
  augmented,     // train: real training folds + all synthetic rows; test: real fold
  tstr,          // train: synthetic training folds; test: the matching real fold
};

std::string_view to_string(CvProtocol protocol);
CvProtocol parse_cv_protocol(std::string_view text);

struct CvResult {
  double mean = 0.0;
  std::vector<double> folds;
};

// Stratified k-fold F1 (positive class = patient, status 1). `real` is
// required by the augmented and tstr protocols.
CvResult cv_f1(const Table& table, std::span<const std::string> features, std::size_t k,
               ClassifierKind kind, const ClassifierParams& params, std::uint64_t seed,
               CvProtocol protocol = CvProtocol::synthetic_cv, const Table* real = nullptr);

struct GridCell {
  std::size_t k = 0;
  std::size_t d = 0;
  double f1 = 0.0;
  std::vector<double> folds;
};

struct EvalGrid {
  std::vector<std::size_t> ks;
  std::size_t max_d = 0;
  std::vector<GridCell> cells;  // k-major, then d ascending
  RfeRanking ranking;
  ClassifierKind kind = ClassifierKind::rf;
  CvProtocol protocol = CvProtocol::synthetic_cv;
  std::uint64_t seed = 0;

  const GridCell& at(std::size_t k, std::size_t d) const;  // throws IndexError
};

struct SweepOptions {
  std::size_t k_min = 2;
  std::size_t k_max = 9;
  std::size_t max_d = 0;  // 0: every ranked feature
  ClassifierKind kind = ClassifierKind::rf;
  ClassifierParams params;
  CvProtocol protocol = CvProtocol::synthetic_cv;
  const Table* real = nullptr;
  std::size_t threads = 1;
};

// Cell (k, d) is cv_f1 on ranking.subset(d) with seed derive_seed(seed, k),
// so all subset sizes of one k share a fold assignment. The grid does not
// depend on `threads`.
EvalGrid sweep(const Table& table, const RfeRanking& ranking, const SweepOptions& options,
               std::uint64_t seed);

struct BestConfig {
  std::size_t k = 0;
  std::size_t d = 0;
  double f1 = 0.0;
};

// Highest mean F1; ties go to the smaller d, then the smaller k.
BestConfig best_config(const EvalGrid& grid);

}  // namespace voxsynth

#endif  // VOXSYNTH_SELECTION_HPP_
