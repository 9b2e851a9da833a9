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

#include "voxsynth/attribution.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "voxsynth/error.hpp"
#include "voxsynth/rng.hpp"

namespace voxsynth {

namespace {

using Index = Eigen::Index;

constexpr std::size_t kMaxExhaustiveFeatures = 10;

double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

ScoreFn model_score(const ClassifierModel& model) {
  return [&model](const Matrix& m) { return predict_proba(model, m); };
}

}  // namespace

std::vector<double> permutation_importance(const LabelFn& predict_labels, const Matrix& x,
                                           std::span<const int> y, std::size_t repeats,
                                           std::uint64_t seed) {
  if (static_cast<std::size_t>(x.rows()) != y.size() || y.size() < 2) {
    throw ShapeError(fmt::format("permutation importance needs >= 2 matching rows ({} vs {})",
                                 x.rows(), y.size()));
  }
  if (repeats == 0) throw ConfigError("permutation importance needs at least one repeat");
  if (std::find(y.begin(), y.end(), 1) == y.end()) {
    throw DegenerateLabels("F1 is undefined without patient rows");
  }
  const double baseline = f1_score(y, predict_labels(x));
  const auto n = static_cast<std::size_t>(x.rows());
  std::vector<double> out(static_cast<std::size_t>(x.cols()), 0.0);
  Matrix shuffled = x;
  std::vector<std::size_t> order(n);
  for (Index j = 0; j < x.cols(); ++j) {
    const auto column_seed = derive_seed(seed, static_cast<std::uint64_t>(j));
    double drop = 0.0;
    for (std::size_t r = 0; r < repeats; ++r) {
      std::iota(order.begin(), order.end(), 0);
      Rng rng(derive_seed(column_seed, static_cast<std::uint64_t>(r)));
      rng.shuffle(order);
      for (std::size_t i = 0; i < n; ++i) {
        shuffled(static_cast<Index>(i), j) = x(static_cast<Index>(order[i]), j);
      }
      drop += baseline - f1_score(y, predict_labels(shuffled));
    }
    shuffled.col(j) = x.col(j);
    out[static_cast<std::size_t>(j)] = drop / static_cast<double>(repeats);
  }
  return out;
}

std::vector<double> permutation_importance(const ClassifierModel& model, const Matrix& x,
                                           std::span<const int> y, std::size_t repeats,
                                           std::uint64_t seed) {
  return permutation_importance([&model](const Matrix& m) { return predict(model, m); }, x, y,
                                repeats, seed);
}

ShapleyResult shapley_sampled(const ScoreFn& score, std::span<const double> x,
                              const Matrix& background, std::size_t n_permutations,
                              std::uint64_t seed, ShapleyMode mode) {
  const std::size_t d = x.size();
  if (background.rows() == 0 || static_cast<std::size_t>(background.cols()) != d) {
    throw ShapeError(fmt::format("background of {}x{} does not fit a row of {} features",
                                 background.rows(), background.cols(), d));
  }
  if (mode == ShapleyMode::sampled && n_permutations == 0) {
    throw ConfigError("Shapley sampling needs at least one permutation");
  }
  if (mode == ShapleyMode::exhaustive && d > kMaxExhaustiveFeatures) {
    throw ConfigError(fmt::format("exhaustive Shapley is limited to {} features", kMaxExhaustiveFeatures));
  }

  ShapleyResult out;
  out.values.assign(d, 0.0);
  out.std_error.assign(d, 0.0);
  Matrix xm(1, static_cast<Index>(d));
  for (std::size_t j = 0; j < d; ++j) xm(0, static_cast<Index>(j)) = x[j];
  out.prediction = score(xm).at(0);
  out.background_mean = mean_of(score(background));

  std::vector<double> sum(d, 0.0), sum_sq(d, 0.0);
  Matrix path(static_cast<Index>(d + 1), static_cast<Index>(d));
  auto walk = [&](const std::vector<std::size_t>& perm, Index b) {
    path.row(0) = background.row(b);
    for (std::size_t s = 0; s < d; ++s) {
      path.row(static_cast<Index>(s + 1)) = path.row(static_cast<Index>(s));
      path(static_cast<Index>(s + 1), static_cast<Index>(perm[s])) = x[perm[s]];
    }
    const auto f = score(path);
    for (std::size_t s = 0; s < d; ++s) {
      const double c = f[s + 1] - f[s];
      sum[perm[s]] += c;
      sum_sq[perm[s]] += c * c;
    }
    ++out.evaluations;
  };

  std::vector<std::size_t> perm(d);
  std::iota(perm.begin(), perm.end(), 0);
  if (mode == ShapleyMode::exhaustive) {
    do {
      for (Index b = 0; b < background.rows(); ++b) walk(perm, b);
    } while (std::next_permutation(perm.begin(), perm.end()));
  } else {
    Rng rng(seed);
    for (std::size_t i = 0; i < n_permutations; ++i) {
      std::iota(perm.begin(), perm.end(), 0);
      rng.shuffle(perm);
      walk(perm, static_cast<Index>(rng.below(static_cast<std::size_t>(background.rows()))));
    }
  }

  const auto n = static_cast<double>(out.evaluations);
  for (std::size_t j = 0; j < d; ++j) {
    out.values[j] = sum[j] / n;
    if (mode == ShapleyMode::sampled && out.evaluations > 1) {
      const double var = std::max(0.0, (sum_sq[j] - n * out.values[j] * out.values[j]) / (n - 1));
      out.std_error[j] = std::sqrt(var / n);
    }
  }
  const double total = std::accumulate(out.values.begin(), out.values.end(), 0.0);
  out.residual = std::abs(total - (out.prediction - out.background_mean));
  return out;
}

ShapleyResult shapley_sampled(const ClassifierModel& model, std::span<const double> x,
                              const Matrix& background, std::size_t n_permutations,
                              std::uint64_t seed, ShapleyMode mode) {
  return shapley_sampled(model_score(model), x, background, n_permutations, seed, mode);
}

std::string_view to_string(AttributionMethod method) {
  return method == AttributionMethod::shapley ? "shapley" : "permutation";
}

AttributionMethod parse_attribution_method(std::string_view text) {
  if (text == "permutation") return AttributionMethod::permutation;
  if (text == "shapley") return AttributionMethod::shapley;
  throw ConfigError(fmt::format("unknown attribution method '{}' (permutation, shapley)", text));
}

std::vector<std::string> InfluenceReport::ranked() const {
  std::vector<const FeatureInfluence*> order;
  for (const auto& f : features) order.push_back(&f);
  std::sort(order.begin(), order.end(),
            [](const auto* a, const auto* b) { return a->rank < b->rank; });
  std::vector<std::string> out;
  for (const auto* f : order) out.push_back(f->feature);
  return out;
}

nlohmann::json InfluenceReport::to_json() const {
  nlohmann::json feats = nlohmann::json::array();
  for (const auto& f : features) {
    feats.push_back({{"feature", f.feature}, {"mean_abs", f.mean_abs}, {"mean", f.mean}, {"rank", f.rank}});
  }
  nlohmann::json j = {{"method", std::string(to_string(method))},
                      {"class_filter", class_filter},
                      {"rows", rows},
                      {"seed", seed},
                      {"features", feats}};
  if (method == AttributionMethod::shapley) {
    j["background"] = {{"rows_available", background.rows_available},
                       {"rows_used", background.rows_used},
                       {"cap", background.cap},
                       {"seed", background.seed}};
    j["mean_residual"] = mean_residual;
    j["max_residual"] = max_residual;
  }
  return j;
}

InfluenceReport influence_report(const ClassifierModel& model, const Table& test,
                                 AttributionMethod method, std::uint64_t seed,
                                 const Table* background, const InfluenceOptions& options) {
  if (method == AttributionMethod::shapley && background == nullptr) {
    throw ConfigError("Shapley attribution needs a background table");
  }
  const auto labels = test.labels();
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == options.class_filter) keep.push_back(i);
  }
  if (keep.empty()) {
    throw InsufficientData(fmt::format("no rows with status {} to explain", options.class_filter));
  }
  const Table rows = test.select_rows(keep);
  const Matrix x = model_inputs(model, rows);
  const std::size_t d = model.feature_names.size();

  InfluenceReport report;
  report.method = method;
  report.rows = method == AttributionMethod::shapley ? keep.size() : labels.size();
  report.class_filter = options.class_filter;
  report.seed = seed;
  std::vector<double> mean_abs(d, 0.0), mean(d, 0.0);

  if (method == AttributionMethod::permutation) {
    mean = permutation_importance(model, model_inputs(model, test), labels, options.repeats, seed);
    for (std::size_t j = 0; j < d; ++j) mean_abs[j] = std::abs(mean[j]);
  } else {
    const Matrix all = model_inputs(model, *background);
    const auto available = static_cast<std::size_t>(all.rows());
    std::vector<std::size_t> pick(available);
    std::iota(pick.begin(), pick.end(), 0);
    const auto bg_seed = derive_seed(seed, "background");
    if (available > options.background_cap) {
      Rng rng(bg_seed);
      rng.shuffle(pick);
      pick.resize(options.background_cap);
      std::sort(pick.begin(), pick.end());
    }
    Matrix bg(static_cast<Index>(pick.size()), all.cols());
    for (std::size_t i = 0; i < pick.size(); ++i) {
      bg.row(static_cast<Index>(i)) = all.row(static_cast<Index>(pick[i]));
    }
    report.background = {available, pick.size(), options.background_cap, bg_seed};
    const auto score = model_score(model);
    std::vector<double> row(d);
    for (Index r = 0; r < x.rows(); ++r) {
      for (std::size_t j = 0; j < d; ++j) row[j] = x(r, static_cast<Index>(j));
      const auto s = shapley_sampled(score, row, bg, options.n_permutations,
                                     derive_seed(seed, static_cast<std::uint64_t>(r)));
      for (std::size_t j = 0; j < d; ++j) {
        mean_abs[j] += std::abs(s.values[j]);
        mean[j] += s.values[j];
      }
      report.mean_residual += s.residual;
      report.max_residual = std::max(report.max_residual, s.residual);
    }
    const auto n = static_cast<double>(x.rows());
    for (std::size_t j = 0; j < d; ++j) {
      mean_abs[j] /= n;
      mean[j] /= n;
    }
    report.mean_residual /= n;
  }

  std::vector<std::size_t> order(d);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return mean_abs[a] > mean_abs[b]; });
  report.features.resize(d);
  for (std::size_t j = 0; j < d; ++j) report.features[j] = {model.feature_names[j], mean_abs[j], mean[j], 0};
  for (std::size_t r = 0; r < d; ++r) report.features[order[r]].rank = r + 1;
  return report;
}

}  // namespace voxsynth
