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

#include "voxsynth/quality.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "voxsynth/error.hpp"

namespace voxsynth {

double ks_complement(std::span<const double> real, std::span<const double> synth) {
  if (real.empty() || synth.empty()) throw InsufficientData("KS needs two nonempty samples");
  std::vector<double> a(real.begin(), real.end()), b(synth.begin(), synth.end());
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() || j < b.size()) {
    double x;
    if (j == b.size() || (i < a.size() && a[i] <= b[j])) {
      x = a[i];
    } else {
      x = b[j];
    }
    while (i < a.size() && a[i] == x) ++i;
    while (j < b.size() && b[j] == x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return 1.0 - d;
}

double tv_complement(std::span<const double> real, std::span<const double> synth,
                     std::size_t categories) {
  if (real.empty() || synth.empty()) throw InsufficientData("TV needs two nonempty samples");
  std::vector<double> pr(categories, 0.0), ps(categories, 0.0);
  for (double v : real) pr.at(static_cast<std::size_t>(v)) += 1.0;
  for (double v : synth) ps.at(static_cast<std::size_t>(v)) += 1.0;
  double tv = 0.0;
  for (std::size_t k = 0; k < categories; ++k) {
    tv += std::abs(pr[k] / static_cast<double>(real.size()) -
                   ps[k] / static_cast<double>(synth.size()));
  }
  return std::clamp(1.0 - 0.5 * tv, 0.0, 1.0);
}

double correlation_similarity_from(double rho_real, double rho_synth) {
  return std::clamp(1.0 - std::abs(rho_real - rho_synth) / 2.0, 0.0, 1.0);
}

namespace {

struct RhoResult {
  double rho = 0.0;
  bool zero_variance = false;
};

RhoResult rho_of(std::span<const double> x, std::span<const double> y, CorrelationMethod m) {
  std::optional<double> r;
  if (m == CorrelationMethod::spearman) {
    const auto rx = ranks(x), ry = ranks(y);
    r = pearson(rx, ry);
  } else {
    r = pearson(x, y);
  }
  if (!r) return {0.0, true};
  return {*r, false};
}

}  // namespace

PairTrend correlation_similarity(const Table& real, const Table& synth, const std::string& a,
                                 const std::string& b, CorrelationMethod method) {
  if (real.num_rows() < 2 || synth.num_rows() < 2) {
    throw InsufficientData("correlation similarity needs at least two rows per table");
  }
  const auto r = rho_of(real.column(a), real.column(b), method);
  const auto s = rho_of(synth.column(a), synth.column(b), method);
  PairTrend p;
  p.a = a;
  p.b = b;
  p.real_rho = r.rho;
  p.synth_rho = s.rho;
  p.zero_variance = r.zero_variance || s.zero_variance;
  p.score = correlation_similarity_from(r.rho, s.rho);
  return p;
}

QualityReport quality_score(const Table& real_in, const Table& synth_in,
                            const QualityOptions& options) {
  const Table real = real_in.without_group();
  const Table synth = synth_in.without_group();
  if (real.schema().fingerprint() != synth.schema().fingerprint()) {
    throw SchemaMismatch("real and synthetic schemas differ");
  }
  const auto& schema = real.schema();
  QualityReport q;
  q.method = options.method;
  for (std::size_t c = 0; c < schema.columns.size(); ++c) {
    const auto& col = schema.columns[c];
    if (!options.include_target && col.name == schema.target_column) continue;
    ColumnShape s;
    s.name = col.name;
    if (col.kind == ColumnKind::continuous) {
      s.metric = "ks_complement";
      s.score = ks_complement(real.column(c), synth.column(c));
    } else {
      s.metric = "tv_complement";
      s.score = tv_complement(real.column(c), synth.column(c), col.categories.size());
    }
    q.shapes.push_back(s);
  }
  const auto features = schema.feature_names();
  for (std::size_t i = 0; i < features.size(); ++i) {
    for (std::size_t j = i + 1; j < features.size(); ++j) {
      q.trends.push_back(correlation_similarity(real, synth, features[i], features[j], options.method));
    }
  }
  double shapes = 0.0, trends = 0.0;
  for (const auto& s : q.shapes) shapes += s.score;
  for (const auto& t : q.trends) trends += t.score;
  q.column_shapes_mean = q.shapes.empty() ? 0.0 : shapes / static_cast<double>(q.shapes.size());
  q.column_pair_trends_mean =
      q.trends.empty() ? q.column_shapes_mean : trends / static_cast<double>(q.trends.size());
  q.overall = (q.column_shapes_mean + q.column_pair_trends_mean) / 2.0;
  return q;
}

nlohmann::json to_json(const QualityReport& report) {
  nlohmann::json shapes = nlohmann::json::array();
  for (const auto& s : report.shapes) {
    shapes.push_back({{"column", s.name}, {"metric", s.metric}, {"score", s.score}});
  }
  nlohmann::json trends = nlohmann::json::array();
  for (const auto& t : report.trends) {
    trends.push_back({{"column_a", t.a},
                      {"column_b", t.b},
                      {"real", t.real_rho},
                      {"synthetic", t.synth_rho},
                      {"score", t.score},
                      {"zero_variance", t.zero_variance}});
  }
  return {{"overall", report.overall},
          {"overall_percent", 100.0 * report.overall},
          {"column_shapes_mean", report.column_shapes_mean},
          {"column_pair_trends_mean", report.column_pair_trends_mean},
          {"correlation_method",
           report.method == CorrelationMethod::pearson ? "pearson" : "spearman"},
          {"column_shapes", shapes},
          {"column_pair_trends", trends}};
}

}  // namespace voxsynth
