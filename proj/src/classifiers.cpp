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

#include "voxsynth/classifiers.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>

#include <fmt/format.h>

#include "binary_io.hpp"
#include "voxsynth/error.hpp"
#include "voxsynth/rng.hpp"

namespace voxsynth {

namespace {

using Index = Eigen::Index;

constexpr double kMinGain = 1e-12;
// Initial SVM step size; t0 = 1 / (penalty * kSvmEta0).
constexpr double kSvmEta0 = 0.1;

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double log_loss(std::span<const int> y, std::span<const double> score) {
  double total = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    // log(1 + exp(-s)) for y = 1 and log(1 + exp(s)) for y = 0, computed stably.
    const double s = y[i] == 1 ? -score[i] : score[i];
    total += s > 0 ? s + std::log1p(std::exp(-s)) : std::log1p(std::exp(s));
  }
  return total / static_cast<double>(y.size());
}

enum class Criterion { gini, squared_error, second_order };

struct TreeSpec {
  Criterion criterion = Criterion::gini;
  std::optional<std::size_t> max_depth;
  std::size_t min_samples_leaf = 1;
  std::size_t max_features = 0;  // 0: all
  bool random_thresholds = false;
  double lambda = 1.0;
  double min_child_weight = 0.0;
};

// Grows one tree from per-sample first-order sums g and weights h:
//   gini            g = w * y, h = w
//   squared error   g = r,     h = 1
//   second order    g = grad,  h = hess
class TreeBuilder {
 public:
  TreeBuilder(const Matrix& x, std::span<const double> g, std::span<const double> h,
              const TreeSpec& spec, Rng& rng, std::vector<double>& importance)
      : x_(x), g_(g), h_(h), spec_(spec), rng_(rng), importance_(importance) {}

  Tree build(std::vector<std::size_t> rows) {
    grow(std::move(rows), 0);
    return std::move(tree_);
  }

 private:
  struct Sums {
    double g = 0.0;
    double h = 0.0;
  };

  // Larger is better; gain = score(L) + score(R) - score(parent).
  double score(const Sums& s) const {
    switch (spec_.criterion) {
      case Criterion::gini:
        return s.h > 0 ? (s.g * s.g + (s.h - s.g) * (s.h - s.g)) / s.h : 0.0;
      case Criterion::squared_error:
        return s.h > 0 ? s.g * s.g / s.h : 0.0;
      case Criterion::second_order:
        return 0.5 * s.g * s.g / (s.h + spec_.lambda);
    }
    return 0.0;
  }

  double leaf_value(const Sums& s) const {
    switch (spec_.criterion) {
      case Criterion::gini:
      case Criterion::squared_error:
        return s.h > 0 ? s.g / s.h : 0.0;
      case Criterion::second_order:
        return -s.g / (s.h + spec_.lambda);
    }
    return 0.0;
  }

  double impurity(const Sums& s, std::span<const std::size_t> rows) const {
    if (spec_.criterion == Criterion::gini) return gini(s.g, s.h);
    if (spec_.criterion == Criterion::squared_error) {
      double sq = 0.0;
      for (auto r : rows) sq += g_[r] * g_[r];
      return s.h > 0 ? std::max(0.0, sq / s.h - (s.g / s.h) * (s.g / s.h)) : 0.0;
    }
    return -score(s);
  }

  struct Candidate {
    double gain = kMinGain;
    int feature = -1;
    double threshold = 0.0;
  };

  bool leaf_ok(std::size_t count, double hess) const {
    if (count < spec_.min_samples_leaf) return false;
    if (spec_.criterion == Criterion::second_order && hess < spec_.min_child_weight) return false;
    return true;
  }

  void try_feature(std::size_t f, std::span<const std::size_t> rows, const Sums& total,
                   Candidate& best, std::vector<std::pair<double, std::size_t>>& buf) {
    const auto fi = static_cast<Index>(f);
    buf.clear();
    for (auto r : rows) buf.emplace_back(x_(static_cast<Index>(r), fi), r);
    std::sort(buf.begin(), buf.end());
    if (buf.front().first == buf.back().first) return;
    const double parent = score(total);

    if (spec_.random_thresholds) {
      const double t = rng_.uniform(buf.front().first, buf.back().first);
      Sums left;
      std::size_t count = 0;
      for (const auto& [v, r] : buf) {
        if (v > t) break;
        left.g += g_[r];
        left.h += h_[r];
        ++count;
      }
      const Sums right{total.g - left.g, total.h - left.h};
      if (count == 0 || count == buf.size()) return;
      if (!leaf_ok(count, left.h) || !leaf_ok(buf.size() - count, right.h)) return;
      const double gain = score(left) + score(right) - parent;
      if (gain > best.gain) best = {gain, static_cast<int>(f), t};
      return;
    }

    Sums left;
    for (std::size_t i = 0; i + 1 < buf.size(); ++i) {
      left.g += g_[buf[i].second];
      left.h += h_[buf[i].second];
      if (buf[i].first == buf[i + 1].first) continue;
      const std::size_t count = i + 1;
      const Sums right{total.g - left.g, total.h - left.h};
      if (!leaf_ok(count, left.h) || !leaf_ok(buf.size() - count, right.h)) continue;
      const double gain = score(left) + score(right) - parent;
      if (gain > best.gain) {
        double t = 0.5 * (buf[i].first + buf[i + 1].first);
        if (!(t < buf[i + 1].first)) t = buf[i].first;
        best = {gain, static_cast<int>(f), t};
      }
    }
  }

  int grow(std::vector<std::size_t> rows, std::size_t depth) {
    Sums total;
    for (auto r : rows) {
      total.g += g_[r];
      total.h += h_[r];
    }
    const int id = static_cast<int>(tree_.nodes.size());
    TreeNode node;
    node.value = leaf_value(total);
    node.weight = total.h;
    node.impurity = impurity(total, rows);
    tree_.nodes.push_back(node);

    const bool depth_left = !spec_.max_depth || depth < *spec_.max_depth;
    const bool pure = spec_.criterion == Criterion::gini && node.impurity == 0.0;
    if (!depth_left || pure || rows.size() < 2 * spec_.min_samples_leaf) return id;

    const std::size_t d = static_cast<std::size_t>(x_.cols());
    std::vector<std::size_t> order(d);
    std::iota(order.begin(), order.end(), 0);
    std::size_t first = d;
    if (spec_.max_features > 0 && spec_.max_features < d) {
      for (std::size_t i = 0; i < spec_.max_features; ++i) {
        std::swap(order[i], order[i + rng_.below(d - i)]);
      }
      first = spec_.max_features;
      std::sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(first));
      std::sort(order.begin() + static_cast<std::ptrdiff_t>(first), order.end());
    }
    Candidate best;
    std::vector<std::pair<double, std::size_t>> buf;
    buf.reserve(rows.size());
    for (std::size_t i = 0; i < first; ++i) try_feature(order[i], rows, total, best, buf);
    // Fall back to the remaining features when the drawn ones cannot split.
    for (std::size_t i = first; i < d && best.feature < 0; ++i) {
      try_feature(order[i], rows, total, best, buf);
    }
    if (best.feature < 0) return id;

    const auto bf = static_cast<Index>(best.feature);
    std::vector<std::size_t> left, right;
    for (auto r : rows) {
      (x_(static_cast<Index>(r), bf) <= best.threshold ? left : right).push_back(r);
    }
    importance_[static_cast<std::size_t>(best.feature)] += best.gain;
    rows.clear();
    rows.shrink_to_fit();
    const int l = grow(std::move(left), depth + 1);
    const int r = grow(std::move(right), depth + 1);
    auto& n = tree_.nodes[static_cast<std::size_t>(id)];
    n.feature = best.feature;
    n.threshold = best.threshold;
    n.left = l;
    n.right = r;
    return id;
  }

  const Matrix& x_;
  std::span<const double> g_;
  std::span<const double> h_;
  const TreeSpec& spec_;
  Rng& rng_;
  std::vector<double>& importance_;
  Tree tree_;
};

std::vector<double> row_of(const Matrix& x, Index r) {
  std::vector<double> v(static_cast<std::size_t>(x.cols()));
  for (Index c = 0; c < x.cols(); ++c) v[static_cast<std::size_t>(c)] = x(r, c);
  return v;
}

std::size_t leaf_index(const Tree& t, std::span<const double> row) {
  std::size_t i = 0;
  while (!t.nodes[i].is_leaf()) {
    const auto& n = t.nodes[i];
    i = static_cast<std::size_t>(row[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left
                                                                                          : n.right);
  }
  return i;
}

void normalize(std::vector<double>& v) {
  const double total = std::accumulate(v.begin(), v.end(), 0.0);
  if (total > 0) {
    for (auto& x : v) x /= total;
  }
}

bool both_classes(std::span<const int> y) {
  bool zero = false, one = false;
  for (int v : y) (v == 1 ? one : zero) = true;
  return zero && one;
}

std::vector<std::size_t> all_rows(std::size_t n) {
  std::vector<std::size_t> rows(n);
  std::iota(rows.begin(), rows.end(), 0);
  return rows;
}

void fit_forest(ClassifierModel& m, const Matrix& x, std::span<const int> y) {
  const auto& p = m.params;
  const std::size_t n = y.size();
  const std::size_t d = static_cast<std::size_t>(x.cols());
  const bool single = m.kind == ClassifierKind::dt;
  const bool bootstrap = p.bootstrap.value_or(m.kind == ClassifierKind::rf);
  TreeSpec spec;
  spec.max_depth = p.max_depth;
  spec.min_samples_leaf = p.min_samples_leaf;
  spec.random_thresholds = m.kind == ClassifierKind::et;
  spec.max_features =
      p.max_features.value_or(single ? d : std::max<std::size_t>(1, static_cast<std::size_t>(
                                                                      std::sqrt(static_cast<double>(d)))));
  const std::size_t count = single ? 1 : p.n_trees;
  m.importances.assign(d, 0.0);
  for (std::size_t t = 0; t < count; ++t) {
    Rng rng(derive_seed(m.seed, static_cast<std::uint64_t>(t)));
    std::vector<double> w(n, 0.0);
    if (bootstrap) {
      for (std::size_t i = 0; i < n; ++i) w[rng.below(n)] += 1.0;
    } else {
      std::fill(w.begin(), w.end(), 1.0);
    }
    std::vector<double> g(n);
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < n; ++i) {
      g[i] = w[i] * y[i];
      if (w[i] > 0) rows.push_back(i);
    }
    std::vector<double> imp(d, 0.0);
    TreeBuilder builder(x, g, w, spec, rng, imp);
    m.trees.push_back(builder.build(std::move(rows)));
    normalize(imp);
    for (std::size_t f = 0; f < d; ++f) m.importances[f] += imp[f] / static_cast<double>(count);
  }
}

void fit_boosting(ClassifierModel& m, const Matrix& x, std::span<const int> y) {
  const auto& p = m.params;
  const std::size_t n = y.size();
  const std::size_t d = static_cast<std::size_t>(x.cols());
  const bool second = m.kind == ClassifierKind::xgb;
  const double prior = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
  m.base_score = std::log(prior / (1.0 - prior));
  TreeSpec spec;
  spec.criterion = second ? Criterion::second_order : Criterion::squared_error;
  spec.max_depth = p.boost_depth;
  spec.min_samples_leaf = second ? 1 : p.min_samples_leaf;
  spec.lambda = p.lambda;
  spec.min_child_weight = p.min_child_weight;

  std::vector<double> f(n, m.base_score), g(n), h(n);
  m.training_loss.push_back(log_loss(y, f));
  std::vector<double> imp(d, 0.0);
  Rng rng(m.seed);
  std::vector<std::vector<double>> rows(n);
  for (std::size_t i = 0; i < n; ++i) rows[i] = row_of(x, static_cast<Index>(i));

  for (std::size_t round = 0; round < p.rounds; ++round) {
    for (std::size_t i = 0; i < n; ++i) {
      const double pi = sigmoid(f[i]);
      if (second) {
        g[i] = pi - y[i];
        h[i] = pi * (1.0 - pi);
      } else {
        g[i] = y[i] - pi;
        h[i] = 1.0;
      }
    }
    std::vector<double> round_imp(d, 0.0);
    TreeBuilder builder(x, g, h, spec, rng, round_imp);
    Tree tree = builder.build(all_rows(n));
    if (!second) {
      // Newton step per leaf.
      std::vector<double> num(tree.nodes.size(), 0.0), den(tree.nodes.size(), 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        const auto leaf = leaf_index(tree, rows[i]);
        const double pi = sigmoid(f[i]);
        num[leaf] += g[i];
        den[leaf] += pi * (1.0 - pi);
      }
      for (std::size_t k = 0; k < tree.nodes.size(); ++k) {
        if (tree.nodes[k].is_leaf()) tree.nodes[k].value = den[k] > 1e-150 ? num[k] / den[k] : 0.0;
      }
    }
    std::vector<double> next(n);
    for (std::size_t i = 0; i < n; ++i) next[i] = f[i] + p.learning_rate * tree.evaluate(rows[i]);
    const double loss = log_loss(y, next);
    if (!std::isfinite(loss) || loss > m.training_loss.back()) break;
    f = std::move(next);
    m.training_loss.push_back(loss);
    m.trees.push_back(std::move(tree));
    for (std::size_t k = 0; k < d; ++k) imp[k] += round_imp[k];
  }
  normalize(imp);
  m.importances = imp;
}

void fit_adaboost(ClassifierModel& m, const Matrix& x, std::span<const int> y) {
  const std::size_t n = y.size();
  const std::size_t d = static_cast<std::size_t>(x.cols());
  m.base_score = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
  TreeSpec spec;
  spec.max_depth = 1;
  std::vector<double> w(n, 1.0 / static_cast<double>(n)), g(n);
  std::vector<double> imp(d, 0.0);
  Rng rng(m.seed);
  std::vector<std::vector<double>> rows(n);
  for (std::size_t i = 0; i < n; ++i) rows[i] = row_of(x, static_cast<Index>(i));
  for (std::size_t s = 0; s < m.params.stumps; ++s) {
    for (std::size_t i = 0; i < n; ++i) g[i] = w[i] * y[i];
    std::vector<double> stump_imp(d, 0.0);
    TreeBuilder builder(x, g, w, spec, rng, stump_imp);
    Tree stump = builder.build(all_rows(n));
    double err = 0.0, total = 0.0;
    std::vector<bool> miss(n);
    for (std::size_t i = 0; i < n; ++i) {
      const int pred = stump.evaluate(rows[i]) >= 0.5 ? 1 : 0;
      miss[i] = pred != y[i];
      err += miss[i] ? w[i] : 0.0;
      total += w[i];
    }
    err /= total;
    if (err >= 0.5) break;
    const double alpha = err <= 0.0 ? 1.0 : std::log((1.0 - err) / err);
    m.trees.push_back(std::move(stump));
    m.tree_weights.push_back(alpha);
    m.stump_errors.push_back(err);
    for (std::size_t k = 0; k < d; ++k) imp[k] += alpha * stump_imp[k];
    if (err <= 0.0) break;
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (miss[i]) w[i] *= std::exp(alpha);
      sum += w[i];
    }
    for (auto& v : w) v /= sum;
  }
  normalize(imp);
  m.importances = imp;
}

void fit_svm(ClassifierModel& m, const Matrix& x, std::span<const int> y) {
  const std::size_t n = y.size();
  const std::size_t d = static_cast<std::size_t>(x.cols());
  m.feature_mean.assign(d, 0.0);
  m.feature_scale.assign(d, 1.0);
  for (std::size_t c = 0; c < d; ++c) {
    const auto col = x.col(static_cast<Index>(c));
    const double mean = col.mean();
    const double var = (col.array() - mean).square().sum() / static_cast<double>(n);
    m.feature_mean[c] = mean;
    m.feature_scale[c] = var > 0 ? std::sqrt(var) : 1.0;
  }
  Matrix z(static_cast<Index>(n), static_cast<Index>(d));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < d; ++c) {
      z(static_cast<Index>(i), static_cast<Index>(c)) =
          (x(static_cast<Index>(i), static_cast<Index>(c)) - m.feature_mean[c]) / m.feature_scale[c];
    }
  }
  const double lambda = m.params.svm_penalty;
  const double t0 = 1.0 / (lambda * kSvmEta0);
  Eigen::VectorXd w = Eigen::VectorXd::Zero(static_cast<Index>(d));
  double b = 0.0;
  Rng rng(m.seed);
  auto order = all_rows(n);
  double t = 0.0;
  for (std::size_t epoch = 0; epoch < m.params.svm_epochs; ++epoch) {
    rng.shuffle(order);
    for (auto i : order) {
      t += 1.0;
      const double eta = 1.0 / (lambda * (t + t0));
      const double label = y[i] == 1 ? 1.0 : -1.0;
      const auto zi = z.row(static_cast<Index>(i));
      const double margin = label * (zi.dot(w) + b);
      w *= 1.0 - eta * lambda;
      if (margin < 1.0) {
        w += eta * label * zi.transpose();
        b += eta * label;
      }
    }
  }
  m.svm_weights.assign(w.data(), w.data() + w.size());
  m.svm_bias = b;
  m.importances.resize(d);
  for (std::size_t c = 0; c < d; ++c) m.importances[c] = std::abs(m.svm_weights[c]);
  normalize(m.importances);
}

}  // namespace

std::string_view to_string(ClassifierKind kind) {
  switch (kind) {
    case ClassifierKind::dt:
      return "dt";
    case ClassifierKind::rf:
      return "rf";
    case ClassifierKind::et:
      return "et";
    case ClassifierKind::gb:
      return "gb";
    case ClassifierKind::xgb:
      return "xgb";
    case ClassifierKind::adaboost:
      return "adaboost";
    case ClassifierKind::svm:
      return "svm";
  }
  return "rf";
}

ClassifierKind parse_classifier_kind(std::string_view text) {
  for (auto k : {ClassifierKind::dt, ClassifierKind::rf, ClassifierKind::et, ClassifierKind::gb,
                 ClassifierKind::xgb, ClassifierKind::adaboost, ClassifierKind::svm}) {
    if (text == to_string(k)) return k;
  }
  throw ConfigError(fmt::format("unknown classifier kind '{}'", text));
}

nlohmann::json ClassifierParams::to_json() const {
  auto opt = [](const auto& o) { return o ? nlohmann::json(*o) : nlohmann::json(); };
  return {{"n_trees", n_trees},
          {"max_depth", opt(max_depth)},
          {"min_samples_leaf", min_samples_leaf},
          {"bootstrap", opt(bootstrap)},
          {"max_features", opt(max_features)},
          {"rounds", rounds},
          {"learning_rate", learning_rate},
          {"boost_depth", boost_depth},
          {"lambda", lambda},
          {"min_child_weight", min_child_weight},
          {"stumps", stumps},
          {"svm_epochs", svm_epochs},
          {"svm_penalty", svm_penalty}};
}

ClassifierParams ClassifierParams::from_json(const nlohmann::json& j) {
  ClassifierParams p;
  p.n_trees = j.at("n_trees").get<std::size_t>();
  if (!j.at("max_depth").is_null()) p.max_depth = j.at("max_depth").get<std::size_t>();
  p.min_samples_leaf = j.at("min_samples_leaf").get<std::size_t>();
  if (!j.at("bootstrap").is_null()) p.bootstrap = j.at("bootstrap").get<bool>();
  if (!j.at("max_features").is_null()) p.max_features = j.at("max_features").get<std::size_t>();
  p.rounds = j.at("rounds").get<std::size_t>();
  p.learning_rate = j.at("learning_rate").get<double>();
  p.boost_depth = j.at("boost_depth").get<std::size_t>();
  p.lambda = j.at("lambda").get<double>();
  p.min_child_weight = j.at("min_child_weight").get<double>();
  p.stumps = j.at("stumps").get<std::size_t>();
  p.svm_epochs = j.at("svm_epochs").get<std::size_t>();
  p.svm_penalty = j.at("svm_penalty").get<double>();
  return p;
}

double Tree::evaluate(std::span<const double> row) const { return nodes[leaf_index(*this, row)].value; }

std::size_t Tree::depth() const {
  std::vector<std::size_t> level(nodes.size(), 0);
  std::size_t deepest = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    deepest = std::max(deepest, level[i]);
    if (!nodes[i].is_leaf()) {
      level[static_cast<std::size_t>(nodes[i].left)] = level[i] + 1;
      level[static_cast<std::size_t>(nodes[i].right)] = level[i] + 1;
    }
  }
  return deepest;
}

std::size_t Tree::leaves() const {
  return static_cast<std::size_t>(
      std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return n.is_leaf(); }));
}

double gini(double positive_weight, double total_weight) {
  if (total_weight <= 0) return 0.0;
  const double p = positive_weight / total_weight;
  const double g = 1.0 - p * p - (1.0 - p) * (1.0 - p);
  return g < 1e-15 ? 0.0 : g;
}

ClassifierModel fit_classifier(ClassifierKind kind, const Matrix& x, std::span<const int> y,
                               std::vector<std::string> feature_names,
                               const ClassifierParams& params, std::uint64_t seed) {
  if (static_cast<std::size_t>(x.rows()) != y.size() || y.size() < 2) {
    throw ShapeError(fmt::format("classifier needs matching X ({} rows) and y ({}), at least 2",
                                 x.rows(), y.size()));
  }
  if (feature_names.size() != static_cast<std::size_t>(x.cols())) {
    throw ShapeError("feature name count differs from the column count");
  }
  for (int v : y) {
    if (v != 0 && v != 1) throw DegenerateLabels("labels must be 0 or 1");
  }
  const bool needs_both = kind == ClassifierKind::gb || kind == ClassifierKind::xgb ||
                          kind == ClassifierKind::adaboost || kind == ClassifierKind::svm;
  if (needs_both && !both_classes(y)) {
    throw DegenerateLabels(fmt::format("{} needs both classes in the training labels", to_string(kind)));
  }
  ClassifierModel m;
  m.kind = kind;
  m.params = params;
  m.seed = seed;
  m.feature_names = std::move(feature_names);
  switch (kind) {
    case ClassifierKind::dt:
    case ClassifierKind::rf:
    case ClassifierKind::et:
      fit_forest(m, x, y);
      break;
    case ClassifierKind::gb:
    case ClassifierKind::xgb:
      fit_boosting(m, x, y);
      break;
    case ClassifierKind::adaboost:
      fit_adaboost(m, x, y);
      break;
    case ClassifierKind::svm:
      fit_svm(m, x, y);
      break;
  }
  return m;
}

std::vector<double> predict_proba(const ClassifierModel& m, const Matrix& x) {
  if (static_cast<std::size_t>(x.cols()) != m.feature_names.size()) {
    throw SchemaMismatch(fmt::format("model expects {} features, got {}", m.feature_names.size(),
                                     x.cols()));
  }
  std::vector<double> out(static_cast<std::size_t>(x.rows()));
  for (Index r = 0; r < x.rows(); ++r) {
    const auto row = row_of(x, r);
    double p = 0.0;
    switch (m.kind) {
      case ClassifierKind::dt:
      case ClassifierKind::rf:
      case ClassifierKind::et:
        for (const auto& t : m.trees) p += t.evaluate(row);
        p /= static_cast<double>(m.trees.size());
        break;
      case ClassifierKind::gb:
      case ClassifierKind::xgb: {
        double s = m.base_score;
        for (const auto& t : m.trees) s += m.params.learning_rate * t.evaluate(row);
        p = sigmoid(s);
        break;
      }
      case ClassifierKind::adaboost: {
        if (m.trees.empty()) {
          p = m.base_score;
          break;
        }
        double vote = 0.0, total = 0.0;
        for (std::size_t i = 0; i < m.trees.size(); ++i) {
          vote += m.trees[i].evaluate(row) >= 0.5 ? m.tree_weights[i] : 0.0;
          total += m.tree_weights[i];
        }
        p = vote / total;
        break;
      }
      case ClassifierKind::svm: {
        double margin = m.svm_bias;
        for (std::size_t c = 0; c < row.size(); ++c) {
          margin += m.svm_weights[c] * (row[c] - m.feature_mean[c]) / m.feature_scale[c];
        }
        p = sigmoid(margin);
        break;
      }
    }
    out[static_cast<std::size_t>(r)] = std::clamp(p, 0.0, 1.0);
  }
  return out;
}

std::vector<int> predict(const ClassifierModel& model, const Matrix& x) {
  const auto p = predict_proba(model, x);
  std::vector<int> out(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) out[i] = p[i] >= 0.5 ? 1 : 0;
  return out;
}

Matrix feature_matrix(const Table& table, std::span<const std::string> names) {
  std::vector<std::size_t> cols;
  std::vector<std::string> missing;
  for (const auto& n : names) {
    if (auto i = table.schema().find(n)) {
      cols.push_back(*i);
    } else {
      missing.push_back(n);
    }
  }
  if (!missing.empty()) {
    throw SchemaMismatch(fmt::format("table lacks model features: {}", fmt::join(missing, ", ")));
  }
  return table.matrix(cols);
}

Matrix model_inputs(const ClassifierModel& model, const Table& table) {
  return feature_matrix(table, model.feature_names);
}

MetricsReport evaluate(std::span<const int> y_true, std::span<const int> y_pred) {
  if (y_true.size() != y_pred.size() || y_true.empty()) {
    throw ShapeError(fmt::format("label vectors differ or are empty ({} vs {})", y_true.size(),
                                 y_pred.size()));
  }
  MetricsReport m;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    const bool t = y_true[i] == 1, p = y_pred[i] == 1;
    if (t && p) ++m.tp;
    if (!t && p) ++m.fp;
    if (t && !p) ++m.fn;
    if (!t && !p) ++m.tn;
  }
  const double tp = static_cast<double>(m.tp);
  m.accuracy = static_cast<double>(m.tp + m.tn) / static_cast<double>(y_true.size());
  m.precision = m.tp + m.fp > 0 ? tp / static_cast<double>(m.tp + m.fp) : 0.0;
  m.recall = m.tp + m.fn > 0 ? tp / static_cast<double>(m.tp + m.fn) : 0.0;
  m.f1 = m.precision + m.recall > 0 ? 2 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
  return m;
}

double f1_score(std::span<const int> y_true, std::span<const int> y_pred) {
  return evaluate(y_true, y_pred).f1;
}

// ---------------------------------------------------------------- files

namespace {
constexpr std::string_view kClassifierMagic = "VXCLF1";
constexpr std::uint32_t kClassifierVersion = 1;

nlohmann::json tree_to_json(const Tree& t) {
  nlohmann::json nodes = nlohmann::json::array();
  for (const auto& n : t.nodes) {
    nodes.push_back({n.feature, n.threshold, n.left, n.right, n.value, n.weight, n.impurity});
  }
  return nodes;
}

Tree tree_from_json(const nlohmann::json& j) {
  Tree t;
  for (const auto& n : j) {
    TreeNode node;
    node.feature = n.at(0).get<int>();
    node.threshold = n.at(1).get<double>();
    node.left = n.at(2).get<int>();
    node.right = n.at(3).get<int>();
    node.value = n.at(4).get<double>();
    node.weight = n.at(5).get<double>();
    node.impurity = n.at(6).get<double>();
    t.nodes.push_back(node);
  }
  const auto size = static_cast<int>(t.nodes.size());
  if (size == 0) throw ModelFormatError("empty tree");
  for (const auto& n : t.nodes) {
    if (!n.is_leaf() && (n.left <= 0 || n.right <= 0 || n.left >= size || n.right >= size)) {
      throw ModelFormatError("tree child index out of range");
    }
  }
  return t;
}
}  // namespace

std::string serialize_classifier(const ClassifierModel& m) {
  nlohmann::json trees = nlohmann::json::array();
  for (const auto& t : m.trees) trees.push_back(tree_to_json(t));
  const nlohmann::json j = {{"kind", std::string(to_string(m.kind))},
                            {"params", m.params.to_json()},
                            {"seed", m.seed},
                            {"features", m.feature_names},
                            {"trees", trees},
                            {"tree_weights", m.tree_weights},
                            {"base_score", m.base_score},
                            {"svm_weights", m.svm_weights},
                            {"svm_bias", m.svm_bias},
                            {"feature_mean", m.feature_mean},
                            {"feature_scale", m.feature_scale},
                            {"training_loss", m.training_loss},
                            {"stump_errors", m.stump_errors},
                            {"importances", m.importances}};
  const std::string text = j.dump();
  std::string out(kClassifierMagic);
  detail::put<std::uint32_t>(out, kClassifierVersion);
  detail::put<std::uint64_t>(out, text.size());
  out += text;
  return out;
}

ClassifierModel deserialize_classifier(std::string_view bytes) {
  detail::Reader in(bytes, 0);
  if (in.take(kClassifierMagic.size()) != kClassifierMagic) {
    throw ModelFormatError("bad classifier magic");
  }
  if (in.get<std::uint32_t>() != kClassifierVersion) {
    throw ModelFormatError("unsupported classifier version");
  }
  const auto len = in.get<std::uint64_t>();
  if (len != in.remaining()) throw ModelFormatError("classifier payload length mismatch");
  ClassifierModel m;
  try {
    const auto j = nlohmann::json::parse(in.take(len));
    m.kind = parse_classifier_kind(j.at("kind").get<std::string>());
    m.params = ClassifierParams::from_json(j.at("params"));
    m.seed = j.at("seed").get<std::uint64_t>();
    m.feature_names = j.at("features").get<std::vector<std::string>>();
    for (const auto& t : j.at("trees")) m.trees.push_back(tree_from_json(t));
    m.tree_weights = j.at("tree_weights").get<std::vector<double>>();
    m.base_score = j.at("base_score").get<double>();
    m.svm_weights = j.at("svm_weights").get<std::vector<double>>();
    m.svm_bias = j.at("svm_bias").get<double>();
    m.feature_mean = j.at("feature_mean").get<std::vector<double>>();
    m.feature_scale = j.at("feature_scale").get<std::vector<double>>();
    m.training_loss = j.at("training_loss").get<std::vector<double>>();
    m.stump_errors = j.at("stump_errors").get<std::vector<double>>();
    m.importances = j.at("importances").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw ModelFormatError(std::string("malformed classifier: ") + e.what());
  } catch (const ConfigError& e) {
    throw ModelFormatError(std::string("malformed classifier: ") + e.what());
  }
  return m;
}

void save_classifier(const ClassifierModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError(fmt::format("cannot write '{}'", path.string()));
  const auto bytes = serialize_classifier(model);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

ClassifierModel load_classifier(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ModelFormatError(fmt::format("cannot open '{}'", path.string()));
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_classifier(bytes);
}

}  // namespace voxsynth
