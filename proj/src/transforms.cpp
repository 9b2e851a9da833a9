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

#include "voxsynth/transforms.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <set>

#include <fmt/format.h>

#include "voxsynth/error.hpp"

namespace voxsynth {

namespace {

constexpr double kLogSqrt2Pi = 0.91893853320467274178;

double log_normal_pdf(double x, double mean, double std) {
  const double z = (x - mean) / std;
  return -0.5 * z * z - std::log(std) - kLogSqrt2Pi;
}

double log_sum_exp(std::span<const double> v) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : v) m = std::max(m, x);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

double sample_std(std::span<const double> x) {
  if (x.size() < 2) return 0.0;
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
  double ss = 0.0;
  for (double v : x) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / static_cast<double>(x.size() - 1));
}

std::vector<double> kmeanspp_centers(std::span<const double> x, std::size_t k, Rng& rng) {
  std::vector<double> centers{x[rng.below(x.size())]};
  std::vector<double> dist(x.size());
  while (centers.size() < k) {
    for (std::size_t i = 0; i < x.size(); ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (double c : centers) best = std::min(best, (x[i] - c) * (x[i] - c));
      dist[i] = best;
    }
    const double total = std::accumulate(dist.begin(), dist.end(), 0.0);
    if (total <= 0.0) break;
    centers.push_back(x[rng.categorical(dist)]);
  }
  return centers;
}

}  // namespace

VgmFit fit_vgm_traced(std::span<const double> column, const VgmOptions& options,
                      std::uint64_t seed) {
  if (column.empty()) throw InsufficientData("cannot fit a mixture to an empty column");
  if (options.max_modes < 1) throw ConfigError("max_modes must be at least 1");
  for (double v : column) {
    if (!std::isfinite(v)) throw ParseError("non-finite value in mixture input");
  }
  const std::size_t n = column.size();
  const std::set<double> distinct(column.begin(), column.end());
  const std::size_t k = std::min(options.max_modes, distinct.size());

  VgmFit fit;
  if (k == 1) {
    const double mean =
        std::accumulate(column.begin(), column.end(), 0.0) / static_cast<double>(n);
    const double std = std::max(sample_std(column), kStdFloor);
    fit.model = {{1.0}, {mean}, {std}};
    double ll = 0.0;
    for (double v : column) ll += log_normal_pdf(v, mean, std);
    fit.log_likelihood.push_back(ll);
    return fit;
  }

  Rng rng(seed);
  std::vector<double> means = kmeanspp_centers(column, k, rng);
  const std::size_t m = means.size();
  std::vector<double> weights(m, 1.0 / static_cast<double>(m));
  std::vector<double> stds(m, 0.0);
  {
    // Hard assignment to the nearest seed gives the starting spreads.
    const double fallback = std::max(sample_std(column) / static_cast<double>(m), kStdFloor);
    std::vector<double> sum(m, 0.0), sq(m, 0.0), cnt(m, 0.0);
    for (double v : column) {
      std::size_t best = 0;
      for (std::size_t j = 1; j < m; ++j) {
        if (std::abs(v - means[j]) < std::abs(v - means[best])) best = j;
      }
      sum[best] += v;
      sq[best] += (v - means[best]) * (v - means[best]);
      cnt[best] += 1.0;
    }
    for (std::size_t j = 0; j < m; ++j) {
      stds[j] = cnt[j] > 1.0 ? std::max(std::sqrt(sq[j] / cnt[j]), kStdFloor) : fallback;
    }
  }

  std::vector<double> resp(n * m);
  std::vector<double> logs(m);
  for (std::size_t iter = 0; iter < options.max_iterations; ++iter) {
    // E-step.
    double ll = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < m; ++j) {
        logs[j] = weights[j] > 0.0
                      ? std::log(weights[j]) + log_normal_pdf(column[i], means[j], stds[j])
                      : -std::numeric_limits<double>::infinity();
      }
      const double lse = log_sum_exp(logs);
      ll += lse;
      for (std::size_t j = 0; j < m; ++j) resp[i * m + j] = std::exp(logs[j] - lse);
    }
    fit.log_likelihood.push_back(ll);
    if (iter > 0) {
      const double prev = fit.log_likelihood[iter - 1];
      if (ll - prev < options.tolerance) break;
    }
    // M-step; a component with no mass keeps its parameters at weight zero.
    for (std::size_t j = 0; j < m; ++j) {
      double nk = 0.0, sx = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        nk += resp[i * m + j];
        sx += resp[i * m + j] * column[i];
      }
      weights[j] = nk / static_cast<double>(n);
      if (nk < 1e-12) {
        weights[j] = 0.0;
        continue;
      }
      means[j] = sx / nk;
      double sv = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double d = column[i] - means[j];
        sv += resp[i * m + j] * d * d;
      }
      stds[j] = std::max(std::sqrt(sv / nk), kStdFloor);
    }
  }

  std::vector<std::size_t> kept;
  for (std::size_t j = 0; j < m; ++j) {
    if (weights[j] >= options.prune_below) kept.push_back(j);
  }
  if (kept.empty()) {
    kept.push_back(static_cast<std::size_t>(
        std::max_element(weights.begin(), weights.end()) - weights.begin()));
  }
  std::sort(kept.begin(), kept.end(), [&](auto a, auto b) {
    return means[a] < means[b] || (means[a] == means[b] && a < b);
  });
  double total = 0.0;
  for (auto j : kept) total += weights[j];
  for (auto j : kept) {
    fit.model.weights.push_back(weights[j] / total);
    fit.model.means.push_back(means[j]);
    fit.model.stds.push_back(stds[j]);
  }
  return fit;
}

VgmModel fit_vgm(std::span<const double> column, const VgmOptions& options,
                 std::uint64_t seed) {
  return fit_vgm_traced(column, options, seed).model;
}

namespace {

std::vector<double> log_posterior(const VgmModel& model, double value) {
  std::vector<double> logs(model.modes());
  for (std::size_t j = 0; j < model.modes(); ++j) {
    logs[j] = std::log(model.weights[j]) +
              log_normal_pdf(value, model.means[j], model.stds[j]);
  }
  return logs;
}

}  // namespace

std::vector<double> vgm_responsibilities(const VgmModel& model, double value) {
  auto logs = log_posterior(model, value);
  const double lse = log_sum_exp(logs);
  for (auto& l : logs) l = std::exp(l - lse);
  return logs;
}

VgmCode vgm_encode(const VgmModel& model, double value, Rng& rng) {
  if (model.modes() == 0) throw IndexError("mixture has no modes");
  const auto logs = log_posterior(model, value);
  std::vector<std::size_t> candidates;
  for (std::size_t j = 0; j < model.modes(); ++j) {
    if (std::abs(value - model.means[j]) <= 4.0 * model.stds[j]) candidates.push_back(j);
  }
  if (candidates.empty()) {
    candidates.resize(model.modes());
    std::iota(candidates.begin(), candidates.end(), 0);
  }
  std::size_t mode = candidates.front();
  if (candidates.size() > 1) {
    double best = -std::numeric_limits<double>::infinity();
    for (auto j : candidates) best = std::max(best, logs[j]);
    std::vector<double> probs;
    for (auto j : candidates) probs.push_back(std::exp(logs[j] - best));
    mode = candidates[rng.categorical(probs)];
  }
  const double alpha = (value - model.means[mode]) / (4.0 * model.stds[mode]);
  return {std::clamp(alpha, -1.0, 1.0), mode};
}

VgmCode vgm_encode(const VgmModel& model, double value, std::uint64_t seed) {
  Rng rng(seed);
  return vgm_encode(model, value, rng);
}

double vgm_decode(const VgmModel& model, double alpha, std::size_t mode) {
  if (mode >= model.modes()) {
    throw IndexError(fmt::format("mode {} out of range ({} modes)", mode, model.modes()));
  }
  return model.means[mode] + 4.0 * model.stds[mode] * alpha;
}

// ---------------------------------------------------------------- normal

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double normal_quantile(double p) {
  if (p <= 0.0) return -std::numeric_limits<double>::infinity();
  if (p >= 1.0) return std::numeric_limits<double>::infinity();
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double p_low = 0.02425;
  double x = 0.0;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - p_low) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  // Halley refinement.
  const double e = normal_cdf(x) - p;
  const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
  return x - u / (1.0 + 0.5 * x * u);
}

// ---------------------------------------------------------------- copula

CopulaModel CopulaModel::fit(std::span<const double> column) {
  if (column.empty()) throw InsufficientData("cannot fit a copula to an empty column");
  std::vector<double> sorted(column.begin(), column.end());
  std::sort(sorted.begin(), sorted.end());
  CopulaModel m;
  m.n_ = sorted.size();
  const double n = static_cast<double>(m.n_);
  m.epsilon_ = 1.0 / (2.0 * n);
  std::size_t i = 0;
  while (i < sorted.size()) {
    std::size_t j = i;
    while (j + 1 < sorted.size() && sorted[j + 1] == sorted[i]) ++j;
    // Positions i+1 .. j+1 share the mean plotting position.
    const double mean_pos = 0.5 * static_cast<double>(i + j) + 1.0;
    m.knots_.push_back(sorted[i]);
    m.probs_.push_back((mean_pos - 0.5) / n);
    i = j + 1;
  }
  return m;
}

CopulaModel CopulaModel::identity() {
  CopulaModel m;
  m.identity_ = true;
  return m;
}

double CopulaModel::cdf(double value) const {
  if (knots_.empty()) return 0.5;
  if (value <= knots_.front()) return probs_.front();
  if (value >= knots_.back()) return probs_.back();
  const auto it = std::upper_bound(knots_.begin(), knots_.end(), value);
  const auto hi = static_cast<std::size_t>(it - knots_.begin());
  const auto lo = hi - 1;
  const double t = (value - knots_[lo]) / (knots_[hi] - knots_[lo]);
  return probs_[lo] + t * (probs_[hi] - probs_[lo]);
}

double CopulaModel::inverse_cdf(double probability) const {
  if (knots_.empty()) return 0.0;
  if (probability <= probs_.front()) return knots_.front();
  if (probability >= probs_.back()) return knots_.back();
  const auto it = std::upper_bound(probs_.begin(), probs_.end(), probability);
  const auto hi = static_cast<std::size_t>(it - probs_.begin());
  const auto lo = hi - 1;
  const double t = (probability - probs_[lo]) / (probs_[hi] - probs_[lo]);
  return knots_[lo] + t * (knots_[hi] - knots_[lo]);
}

double CopulaModel::map(double value, CopulaDirection direction) const {
  if (identity_) return value;
  if (direction == CopulaDirection::to_gaussian) {
    const double p = std::clamp(cdf(value), epsilon_, 1.0 - epsilon_);
    return normal_quantile(p);
  }
  return inverse_cdf(normal_cdf(value));
}

nlohmann::json CopulaModel::to_json() const {
  return {{"identity", identity_},
          {"n", n_},
          {"epsilon", epsilon_},
          {"knots", knots_},
          {"probabilities", probs_}};
}

CopulaModel CopulaModel::from_json(const nlohmann::json& j) {
  CopulaModel m;
  m.identity_ = j.at("identity").get<bool>();
  m.n_ = j.at("n").get<std::size_t>();
  m.epsilon_ = j.at("epsilon").get<double>();
  m.knots_ = j.at("knots").get<std::vector<double>>();
  m.probs_ = j.at("probabilities").get<std::vector<double>>();
  if (m.knots_.size() != m.probs_.size()) {
    throw ModelFormatError("copula knots and probabilities differ in length");
  }
  return m;
}

double copula_map(const CopulaModel& model, double value, CopulaDirection direction) {
  return model.map(value, direction);
}

CopulaLayer CopulaLayer::fit(const Table& table, bool identity) {
  CopulaLayer layer;
  for (auto c : table.schema().feature_indices()) {
    layer.columns_.emplace_back(table.schema().columns[c].name,
                                identity ? CopulaModel::identity()
                                         : CopulaModel::fit(table.column(c)));
  }
  return layer;
}

Table CopulaLayer::apply(const Table& table, CopulaDirection direction) const {
  Table out = table;
  for (const auto& [name, model] : columns_) {
    const auto c = table.schema().index_of(name);
    const auto src = table.column(c);
    std::vector<double> mapped(src.size());
    for (std::size_t r = 0; r < src.size(); ++r) mapped[r] = model.map(src[r], direction);
    out = out.with_column(c, std::move(mapped));
  }
  return out;
}

nlohmann::json CopulaLayer::to_json() const {
  nlohmann::json cols = nlohmann::json::array();
  for (const auto& [name, model] : columns_) {
    cols.push_back({{"column", name}, {"model", model.to_json()}});
  }
  return {{"version", 1}, {"columns", cols}};
}

CopulaLayer CopulaLayer::from_json(const nlohmann::json& j) {
  if (j.at("version").get<int>() != 1) throw ModelFormatError("unsupported copula version");
  CopulaLayer layer;
  for (const auto& c : j.at("columns")) {
    layer.columns_.emplace_back(c.at("column").get<std::string>(),
                                CopulaModel::from_json(c.at("model")));
  }
  return layer;
}

// ---------------------------------------------------------------- codec

nlohmann::json to_json(const Schema& schema) {
  nlohmann::json cols = nlohmann::json::array();
  for (const auto& c : schema.columns) {
    cols.push_back({{"name", c.name},
                    {"kind", std::string(to_string(c.kind))},
                    {"unit", c.unit},
                    {"categories", c.categories}});
  }
  nlohmann::json j = {{"columns", cols}, {"target", schema.target_column}};
  j["group"] = schema.group_column ? nlohmann::json(*schema.group_column) : nlohmann::json();
  return j;
}

Schema schema_from_json(const nlohmann::json& j) {
  Schema s;
  for (const auto& c : j.at("columns")) {
    Column col;
    col.name = c.at("name").get<std::string>();
    const auto kind = c.at("kind").get<std::string>();
    if (kind != "continuous" && kind != "discrete") {
      throw ModelFormatError("unknown column kind '" + kind + "'");
    }
    col.kind = kind == "continuous" ? ColumnKind::continuous : ColumnKind::discrete;
    col.unit = c.at("unit").get<std::string>();
    col.categories = c.at("categories").get<std::vector<std::string>>();
    s.columns.push_back(std::move(col));
  }
  s.target_column = j.at("target").get<std::string>();
  if (!j.at("group").is_null()) s.group_column = j.at("group").get<std::string>();
  s.validate();
  return s;
}

TableCodec TableCodec::fit(const Table& table_in, const CodecOptions& options,
                           std::uint64_t seed) {
  const Table table = table_in.without_group();
  TableCodec codec;
  codec.schema_ = table.schema();
  std::size_t offset = 0;
  for (std::size_t c = 0; c < codec.schema_.columns.size(); ++c) {
    const auto& col = codec.schema_.columns[c];
    ColumnSpan span;
    span.column = c;
    span.kind = col.kind;
    span.offset = offset;
    if (col.kind == ColumnKind::continuous) {
      codec.vgms_.push_back(fit_vgm(table.column(c), options.vgm, derive_seed(seed, c)));
      span.width = 1 + codec.vgms_.back().modes();
    } else {
      codec.vgms_.emplace_back();
      span.width = col.categories.size();
    }
    offset += span.width;
    codec.spans_.push_back(span);
  }
  codec.width_ = offset;
  return codec;
}

Matrix TableCodec::encode(const Table& table_in, std::uint64_t seed) const {
  const Table table = table_in.without_group();
  if (table.schema().fingerprint() != schema_.fingerprint()) {
    throw SchemaMismatch("table schema does not match the codec schema");
  }
  const auto rows = static_cast<Eigen::Index>(table.num_rows());
  Matrix out = Matrix::Zero(rows, static_cast<Eigen::Index>(width_));
  const std::uint64_t base = derive_seed(seed, "encode");
  for (std::size_t s = 0; s < spans_.size(); ++s) {
    const auto& span = spans_[s];
    const auto col = table.column(span.column);
    if (span.kind == ColumnKind::continuous) {
      Rng rng(derive_seed(base, s));
      for (Eigen::Index r = 0; r < rows; ++r) {
        const auto code = vgm_encode(vgms_[s], col[static_cast<std::size_t>(r)], rng);
        out(r, static_cast<Eigen::Index>(span.offset)) = code.alpha;
        out(r, static_cast<Eigen::Index>(span.offset + 1 + code.mode)) = 1.0;
      }
    } else {
      for (Eigen::Index r = 0; r < rows; ++r) {
        const auto k = static_cast<std::size_t>(col[static_cast<std::size_t>(r)]);
        out(r, static_cast<Eigen::Index>(span.offset + k)) = 1.0;
      }
    }
  }
  return out;
}

Table TableCodec::decode(const Matrix& encoded) const {
  if (static_cast<std::size_t>(encoded.cols()) != width_) {
    throw ShapeError(fmt::format("encoded width {} does not match codec width {}",
                                 encoded.cols(), width_));
  }
  const auto rows = encoded.rows();
  std::vector<std::vector<double>> cols(schema_.columns.size());
  for (std::size_t s = 0; s < spans_.size(); ++s) {
    const auto& span = spans_[s];
    auto& col = cols[span.column];
    col.resize(static_cast<std::size_t>(rows));
    const auto bo = static_cast<Eigen::Index>(span.block_offset());
    const auto bw = static_cast<Eigen::Index>(span.block_width());
    for (Eigen::Index r = 0; r < rows; ++r) {
      Eigen::Index best = 0;
      encoded.row(r).segment(bo, bw).maxCoeff(&best);
      if (span.kind == ColumnKind::continuous) {
        const double alpha =
            std::clamp(encoded(r, static_cast<Eigen::Index>(span.offset)), -1.0, 1.0);
        col[static_cast<std::size_t>(r)] =
            vgm_decode(vgms_[s], alpha, static_cast<std::size_t>(best));
      } else {
        col[static_cast<std::size_t>(r)] = static_cast<double>(best);
      }
    }
  }
  return Table(schema_, std::move(cols));
}

nlohmann::json TableCodec::to_json() const {
  nlohmann::json spans = nlohmann::json::array();
  for (std::size_t s = 0; s < spans_.size(); ++s) {
    const auto& span = spans_[s];
    nlohmann::json js = {{"column", span.column},
                         {"kind", std::string(to_string(span.kind))},
                         {"offset", span.offset},
                         {"width", span.width}};
    if (span.kind == ColumnKind::continuous) {
      js["vgm"] = {{"weights", vgms_[s].weights},
                   {"means", vgms_[s].means},
                   {"stds", vgms_[s].stds}};
    }
    spans.push_back(std::move(js));
  }
  return {{"version", 1}, {"schema", voxsynth::to_json(schema_)}, {"spans", spans},
          {"width", width_}};
}

TableCodec TableCodec::from_json(const nlohmann::json& j) {
  if (j.at("version").get<int>() != 1) throw ModelFormatError("unsupported codec version");
  TableCodec codec;
  codec.schema_ = schema_from_json(j.at("schema"));
  codec.width_ = j.at("width").get<std::size_t>();
  std::size_t expected = 0;
  for (const auto& js : j.at("spans")) {
    ColumnSpan span;
    span.column = js.at("column").get<std::size_t>();
    span.kind = js.at("kind").get<std::string>() == "continuous" ? ColumnKind::continuous
                                                                 : ColumnKind::discrete;
    span.offset = js.at("offset").get<std::size_t>();
    span.width = js.at("width").get<std::size_t>();
    VgmModel vgm;
    if (span.kind == ColumnKind::continuous) {
      const auto& v = js.at("vgm");
      vgm.weights = v.at("weights").get<std::vector<double>>();
      vgm.means = v.at("means").get<std::vector<double>>();
      vgm.stds = v.at("stds").get<std::vector<double>>();
      if (vgm.means.size() + 1 != span.width) {
        throw ModelFormatError("codec span width disagrees with its mixture");
      }
    }
    if (span.offset != expected || span.column >= codec.schema_.columns.size()) {
      throw ModelFormatError("codec spans are inconsistent");
    }
    expected += span.width;
    codec.spans_.push_back(span);
    codec.vgms_.push_back(std::move(vgm));
  }
  if (expected != codec.width_) throw ModelFormatError("codec width mismatch");
  return codec;
}

Matrix encode_table(const TableCodec& codec, const Table& table, std::uint64_t seed) {
  return codec.encode(table, seed);
}

Table decode_table(const TableCodec& codec, const Matrix& encoded) {
  return codec.decode(encoded);
}

}  // namespace voxsynth
