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

#include <algorithm>
#include <cmath>
#include <numeric>

#include "catch_amalgamated.hpp"
#include "standin.hpp"
#include "voxsynth/attribution.hpp"
#include "voxsynth/error.hpp"
#include "voxsynth/rng.hpp"

using namespace voxsynth;
using voxsynth::testing::signal_table;

namespace {

double toy(const double* z) { return z[0] * z[1] + std::sin(z[2]) + 0.5 * z[0] * z[0]; }

ScoreFn toy_fn() {
  return [](const Matrix& m) {
    std::vector<double> out;
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      const double z[3] = {m(r, 0), m(r, 1), m(r, 2)};
      out.push_back(toy(z));
    }
    return out;
  };
}

// Exact Shapley values of v(S) = mean_b f(x_S, b_rest) over all coalitions.
std::vector<double> brute_force(std::span<const double> x, const Matrix& bg) {
  const int d = 3;
  auto v = [&](unsigned mask) {
    double total = 0.0;
    for (Eigen::Index r = 0; r < bg.rows(); ++r) {
      double z[3];
      for (int j = 0; j < d; ++j) z[j] = (mask >> j) & 1U ? x[static_cast<std::size_t>(j)] : bg(r, j);
      total += toy(z);
    }
    return total / static_cast<double>(bg.rows());
  };
  const double fact[] = {1, 1, 2, 6};
  std::vector<double> phi(d, 0.0);
  for (int j = 0; j < d; ++j) {
    for (unsigned s = 0; s < 8; ++s) {
      if ((s >> j) & 1U) continue;
      const int size = __builtin_popcount(s);
      const double w = fact[size] * fact[d - size - 1] / fact[d];
      phi[static_cast<std::size_t>(j)] += w * (v(s | (1U << j)) - v(s));
    }
  }
  return phi;
}

Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  Rng rng(seed);
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = rng.normal();
  }
  return m;
}

// status = 1[2 f0 + f1 + 0.5 f2 + 0 f3 + noise > 0]
Table graded_table(std::size_t rows, std::uint64_t seed) {
  Rng rng(seed);
  Schema s;
  for (int f = 0; f < 4; ++f) s.columns.push_back({"f" + std::to_string(f), ColumnKind::continuous, "", {}});
  s.columns.push_back({"status", ColumnKind::discrete, "", {"0", "1"}});
  s.target_column = "status";
  std::vector<std::vector<double>> cols(5);
  for (std::size_t r = 0; r < rows; ++r) {
    double z = 0.3 * rng.normal();
    const double w[] = {2.0, 1.0, 0.5, 0.0};
    for (int f = 0; f < 4; ++f) {
      const double v = rng.normal();
      cols[static_cast<std::size_t>(f)].push_back(v);
      z += w[f] * v;
    }
    cols[4].push_back(z > 0 ? 1.0 : 0.0);
  }
  return Table(std::move(s), std::move(cols));
}

double spearman(std::span<const double> a, std::span<const double> b) {
  const auto ra = ranks(a);
  const auto rb = ranks(b);
  return pearson(ra, rb).value_or(0.0);
}

}  // namespace

TEST_CASE("exhaustive Shapley equals the brute-force coalition formula") {
  const Matrix bg = random_matrix(6, 3, 4);
  for (std::uint64_t s = 0; s < 5; ++s) {
    const Matrix xm = random_matrix(1, 3, 100 + s);
    const std::vector<double> x{xm(0, 0), xm(0, 1), xm(0, 2)};
    const auto r = shapley_sampled(toy_fn(), x, bg, 1, s, ShapleyMode::exhaustive);
    const auto exact = brute_force(x, bg);
    REQUIRE(r.evaluations == 6 * 6);
    for (std::size_t j = 0; j < 3; ++j) {
      REQUIRE(std::abs(r.values[j] - exact[j]) <= 1e-9);
      REQUIRE(r.std_error[j] == 0.0);
    }
    REQUIRE(r.residual <= 1e-12);
  }
}

TEST_CASE("a constant model gets zero attributions") {
  const ScoreFn constant = [](const Matrix& m) { return std::vector<double>(static_cast<std::size_t>(m.rows()), 0.7); };
  const Matrix bg = random_matrix(20, 4, 1);
  const std::vector<double> x{1, 2, 3, 4};
  const auto r = shapley_sampled(constant, x, bg, 50, 3);
  for (double v : r.values) REQUIRE(v == 0.0);
  REQUIRE(r.residual <= 1e-12);
  REQUIRE(r.prediction == 0.7);
}

TEST_CASE("duplicated features receive equal value within 3 standard errors") {
  const ScoreFn f = [](const Matrix& m) {
    std::vector<double> out;
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      out.push_back(1.0 / (1.0 + std::exp(-(m(r, 0) + m(r, 1) + 0.3 * m(r, 2)))));
    }
    return out;
  };
  Matrix bg = random_matrix(50, 3, 8);
  bg.col(1) = bg.col(0);
  const std::vector<double> x{1.5, 1.5, -0.4};
  const auto r = shapley_sampled(f, x, bg, 2000, 12);
  const double se = std::sqrt(r.std_error[0] * r.std_error[0] + r.std_error[1] * r.std_error[1]);
  REQUIRE(se > 0.0);
  REQUIRE(std::abs(r.values[0] - r.values[1]) < 3.0 * se);
}

TEST_CASE("efficiency residual shrinks with the permutation budget") {
  const Matrix bg = random_matrix(40, 3, 21);
  const std::vector<double> x{0.8, -1.2, 2.0};
  std::vector<double> medians;
  for (std::size_t budget : {10, 100, 1000}) {
    std::vector<double> res;
    for (std::uint64_t s = 0; s < 20; ++s) res.push_back(shapley_sampled(toy_fn(), x, bg, budget, s).residual);
    std::sort(res.begin(), res.end());
    medians.push_back(0.5 * (res[9] + res[10]));
  }
  REQUIRE(medians[1] < medians[0]);
  REQUIRE(medians[2] < medians[1]);
}

TEST_CASE("Shapley argument checks") {
  const Matrix bg = random_matrix(5, 3, 1);
  const std::vector<double> x{0, 0, 0};
  REQUIRE_THROWS_AS(shapley_sampled(toy_fn(), x, bg, 0, 1), ConfigError);
  REQUIRE_THROWS_AS(shapley_sampled(toy_fn(), std::vector<double>{0, 0}, bg, 5, 1), ShapeError);
  REQUIRE_THROWS_AS(shapley_sampled(toy_fn(), x, Matrix(0, 3), 5, 1), ShapeError);
  const auto a = shapley_sampled(toy_fn(), x, bg, 30, 7);
  const auto b = shapley_sampled(toy_fn(), x, bg, 30, 7);
  REQUIRE(a.values == b.values);
}

TEST_CASE("permutation importance isolates the feature a tree uses") {
  const auto t = signal_table(120, 4, 3);
  const auto names4 = t.schema().feature_names();
  const Matrix x = feature_matrix(t, names4);
  const auto y = t.labels();
  const auto dt = fit_classifier(ClassifierKind::dt, x, y, names4, {}, 1);
  const auto imp = permutation_importance(dt, x, y, 5, 9);
  REQUIRE(imp[0] >= 0.3);
  for (std::size_t j = 1; j < 4; ++j) {
    REQUIRE(imp[j] == 0.0);
    REQUIRE(imp[0] >= 5.0 * std::abs(imp[j]));
  }
  REQUIRE(permutation_importance(dt, x, y, 5, 9) == imp);
}

TEST_CASE("permutation importance is close under row duplication") {
  const auto t = graded_table(150, 2);
  const auto n = t.schema().feature_names();
  const Matrix x = feature_matrix(t, n);
  const auto y = t.labels();
  ClassifierParams p;
  p.n_trees = 20;
  const auto rf = fit_classifier(ClassifierKind::rf, x, y, n, p, 3);
  Matrix x2(2 * x.rows(), x.cols());
  x2 << x, x;
  std::vector<int> y2 = y;
  y2.insert(y2.end(), y.begin(), y.end());
  const auto a = permutation_importance(rf, x, y, 60, 5);
  const auto b = permutation_importance(rf, x2, y2, 60, 5);
  for (std::size_t j = 0; j < a.size(); ++j) REQUIRE(std::abs(a[j] - b[j]) < 0.03);
}

TEST_CASE("permutation importance argument checks") {
  const Matrix x = random_matrix(6, 2, 1);
  const LabelFn ones = [](const Matrix& m) { return std::vector<int>(static_cast<std::size_t>(m.rows()), 1); };
  REQUIRE_THROWS_AS(permutation_importance(ones, x, std::vector<int>(6, 0), 2, 1), DegenerateLabels);
  REQUIRE_THROWS_AS(permutation_importance(ones, x, std::vector<int>(5, 1), 2, 1), ShapeError);
  REQUIRE_THROWS_AS(permutation_importance(ones, x, std::vector<int>(6, 1), 0, 1), ConfigError);
  REQUIRE_THROWS_AS(permutation_importance(ones, random_matrix(1, 2, 1), std::vector<int>{1}, 2, 1),
                    ShapeError);
}

TEST_CASE("influence report ranks, filters and caps the background") {
  const auto t = graded_table(300, 5);
  const auto n = t.schema().feature_names();
  ClassifierParams p;
  p.n_trees = 20;
  const auto rf = fit_classifier(ClassifierKind::rf, feature_matrix(t, n), t.labels(), n, p, 3);
  InfluenceOptions o;
  o.n_permutations = 20;
  const auto test = graded_table(40, 6);
  const auto r = influence_report(rf, test, AttributionMethod::shapley, 4, &t, o);
  REQUIRE(r.method == AttributionMethod::shapley);
  REQUIRE(r.background.rows_available == 300);
  REQUIRE(r.background.rows_used == 100);
  const auto y = test.labels();
  REQUIRE(r.rows == static_cast<std::size_t>(std::count(y.begin(), y.end(), 1)));
  std::vector<std::size_t> ranks_seen;
  for (const auto& f : r.features) {
    REQUIRE(f.mean_abs >= 0.0);
    ranks_seen.push_back(f.rank);
  }
  std::sort(ranks_seen.begin(), ranks_seen.end());
  REQUIRE(ranks_seen == std::vector<std::size_t>{1, 2, 3, 4});
  REQUIRE(r.ranked().front() == "f0");
  REQUIRE(r.to_json().at("method") == "shapley");

  const auto again = influence_report(rf, test, AttributionMethod::shapley, 4, &t, o);
  REQUIRE(again.to_json() == r.to_json());

  std::vector<std::size_t> healthy;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] == 0) healthy.push_back(i);
  }
  REQUIRE_THROWS_AS(influence_report(rf, test.select_rows(healthy), AttributionMethod::permutation, 1),
                    InsufficientData);
  REQUIRE_THROWS_AS(influence_report(rf, test, AttributionMethod::shapley, 1), ConfigError);
}

TEST_CASE("a single-feature model ranks its feature first") {
  const auto t = signal_table(60, 3, 2);
  const std::vector<std::string> one{"f0"};
  const auto dt = fit_classifier(ClassifierKind::dt, feature_matrix(t, one), t.labels(), one, {}, 1);
  for (auto m : {AttributionMethod::permutation, AttributionMethod::shapley}) {
    const auto r = influence_report(dt, t, m, 3, &t);
    REQUIRE(r.features.size() == 1);
    REQUIRE(r.features[0].rank == 1);
    REQUIRE(r.ranked() == one);
  }
}

TEST_CASE("permutation and Shapley rankings agree on planted signals") {
  const auto train = graded_table(400, 11);
  const auto test = graded_table(200, 12);
  const auto n = train.schema().feature_names();
  ClassifierParams p;
  p.n_trees = 50;
  const auto rf = fit_classifier(ClassifierKind::rf, feature_matrix(train, n), train.labels(), n, p, 5);
  InfluenceOptions o;
  o.n_permutations = 30;
  const auto perm = influence_report(rf, test, AttributionMethod::permutation, 2, nullptr, o);
  const auto shap = influence_report(rf, test, AttributionMethod::shapley, 2, &train, o);
  std::vector<double> a, b;
  for (std::size_t j = 0; j < n.size(); ++j) {
    a.push_back(perm.features[j].mean_abs);
    b.push_back(shap.features[j].mean_abs);
  }
  REQUIRE(spearman(a, b) > 0.5);
  REQUIRE(perm.ranked().front() == "f0");
  REQUIRE(shap.ranked().front() == "f0");
  REQUIRE(parse_attribution_method("shapley") == AttributionMethod::shapley);
  REQUIRE_THROWS_AS(parse_attribution_method("lime"), ConfigError);
}
