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

// Binary classifiers on dense feature matrices.
//
// Labels are 0 (healthy) and 1 (patient); probabilities are for class 1 and
// predict() thresholds them at 0.5 (proba >= 0.5 -> 1).
//
// Trees are CART: weighted Gini for classification, split thresholds at
// midpoints of consecutive distinct values, a split is taken only when it
// strictly lowers impurity, and equal-gain candidates resolve to the lowest
// feature index and then the lowest threshold.
//
//  dt        a single tree over all features
//  rf        bootstrap samples, sqrt(d) candidate features per split
//  et        no bootstrap, one uniform random threshold per candidate feature
//  gb        logistic-loss boosting: squared-error trees on residuals y - p,
//            Newton leaf values sum(r) / sum(p (1 - p)), shrinkage 0.1
//  xgb       second-order boosting: gain from G^2 / (H + lambda), leaf
//            weight -G / (H + lambda), minimum child hessian 1
//  adaboost  SAMME with depth-1 stumps; proba is the alpha-weighted share of
//            stumps voting 1
//  svm       standardized inputs, hinge loss + L2 by SGD with step
//            1 / (penalty * (t + t0)); proba = logistic(margin)

#ifndef VOXSYNTH_CLASSIFIERS_HPP_
#define VOXSYNTH_CLASSIFIERS_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "voxsynth/table.hpp"

namespace voxsynth {

enum class ClassifierKind { dt, rf, et, gb, xgb, adaboost, svm };

std::string_view to_string(ClassifierKind kind);
ClassifierKind parse_classifier_kind(std::string_view text);

struct ClassifierParams {
  // Forests.
  std::size_t n_trees = 100;
  std::optional<std::size_t> max_depth;  // none: grow until pure
  std::size_t min_samples_leaf = 1;
  std::optional<bool> bootstrap;            // default: rf yes, others no
  std::optional<std::size_t> max_features;  // default: rf/et sqrt(d), dt d
  // Boosting.
  std::size_t rounds = 100;
  double learning_rate = 0.1;
  std::size_t boost_depth = 3;
  double lambda = 1.0;
  double min_child_weight = 1.0;
  std::size_t stumps = 50;
  // Linear SVM.
  std::size_t svm_epochs = 1000;
  double svm_penalty = 1e-4;

  nlohmann::json to_json() const;
  static ClassifierParams from_json(const nlohmann::json& j);
};

struct TreeNode {
  int feature = -1;  // -1 for a leaf
  double threshold = 0.0;  // go left when x <= threshold
  int left = -1;
  int right = -1;
  double value = 0.0;   // leaf: positive frequency or additive score
  double weight = 0.0;  // total sample weight reaching the node
  double impurity = 0.0;

  bool is_leaf() const noexcept { return feature < 0; }
};

struct Tree {
  std::vector<TreeNode> nodes;  // root at 0

  double evaluate(std::span<const double> row) const;
  std::size_t depth() const;
  std::size_t leaves() const;
};

struct ClassifierModel {
  ClassifierKind kind = ClassifierKind::rf;
  ClassifierParams params;
  std::uint64_t seed = 0;
  std::vector<std::string> feature_names;

  std::vector<Tree> trees;
  std::vector<double> tree_weights;  // adaboost alphas
  double base_score = 0.0;           // boosting: initial log-odds
  std::vector<double> svm_weights;   // on standardized inputs
  double svm_bias = 0.0;
  std::vector<double> feature_mean;
  std::vector<double> feature_scale;

  // gb/xgb: training log-loss before round 1 and after each kept round.
  std::vector<double> training_loss;
  // adaboost: weighted training error of each fitted stump.
  std::vector<double> stump_errors;
  // Normalized mean decrease in impurity (|w| for svm).
  std::vector<double> importances;
};

ClassifierModel fit_classifier(ClassifierKind kind, const Matrix& x, std::span<const int> y,
                               std::vector<std::string> feature_names,
                               const ClassifierParams& params, std::uint64_t seed);

// Throws SchemaMismatch when the column count differs from the model.
std::vector<double> predict_proba(const ClassifierModel& model, const Matrix& x);
std::vector<int> predict(const ClassifierModel& model, const Matrix& x);

// Columns of `table` named by the model, in model order; throws
// SchemaMismatch when one is missing.
Matrix model_inputs(const ClassifierModel& model, const Table& table);

// Rows of the named continuous columns.
Matrix feature_matrix(const Table& table, std::span<const std::string> names);

struct MetricsReport {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
};

MetricsReport evaluate(std::span<const int> y_true, std::span<const int> y_pred);
double f1_score(std::span<const int> y_true, std::span<const int> y_pred);

double gini(double positive_weight, double total_weight);

std::string serialize_classifier(const ClassifierModel& model);
ClassifierModel deserialize_classifier(std::string_view bytes);
void save_classifier(const ClassifierModel& model, const std::filesystem::path& path);
ClassifierModel load_classifier(const std::filesystem::path& path);

}  // namespace voxsynth

#endif  // VOXSYNTH_CLASSIFIERS_HPP_
