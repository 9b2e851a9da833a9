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

#include "voxsynth/selection.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <numeric>
#include <thread>

#include <fmt/format.h>

#include "voxsynth/error.hpp"
#include "voxsynth/rng.hpp"

namespace voxsynth {

namespace {

Table canonical(const Table& table) {
  const auto order = canonical_row_order(table);
  return table.select_rows(order);
}

void require_both_classes(std::span<const int> labels, std::string_view what) {
  const auto ones = std::count(labels.begin(), labels.end(), 1);
  if (ones == 0 || ones == static_cast<std::ptrdiff_t>(labels.size())) {
    throw DegenerateLabels(fmt::format("{} needs both classes", what));
  }
}

struct Fold {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

std::vector<Fold> make_folds(std::span<const int> labels, std::size_t k, std::uint64_t seed) {
  const auto ids = stratified_folds(labels, k, seed);
  std::vector<Fold> folds(k);
  for (std::size_t r = 0; r < ids.size(); ++r) {
    for (std::size_t f = 0; f < k; ++f) (f == ids[r] ? folds[f].test : folds[f].train).push_back(r);
  }
  return folds;
}

std::vector<int> pick(std::span<const int> v, std::span<const std::size_t> rows) {
  std::vector<int> out;
  out.reserve(rows.size());
  for (auto r : rows) out.push_back(v[r]);
  return out;
}

Matrix pick_rows(const Matrix& x, std::span<const std::size_t> rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(rows[i]));
  }
  return out;
}

Matrix vstack(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() + b.rows(), a.cols());
  out << a, b;
  return out;
}

double fold_f1(ClassifierKind kind, const Matrix& x_train, std::span<const int> y_train,
               const Matrix& x_test, std::span<const int> y_test,
               std::span<const std::string> features, const ClassifierParams& params,
               std::uint64_t seed) {
  const auto model = fit_classifier(kind, x_train, y_train,
                                    std::vector<std::string>(features.begin(), features.end()),
                                    params, seed);
  return f1_score(y_test, predict(model, x_test));
}

}  // namespace

std::vector<std::string> RfeRanking::subset(std::size_t d) const {
  if (d == 0 || d > elimination_order.size()) {
    throw IndexError(fmt::format("subset size {} outside 1..{}", d, elimination_order.size()));
  }
  return {elimination_order.rbegin(), elimination_order.rbegin() + static_cast<std::ptrdiff_t>(d)};
}

nlohmann::json RfeRanking::to_json() const {
  return {{"elimination_order", elimination_order},
          {"base_params", base_params.to_json()},
          {"seed", seed},
          {"eliminations", eliminations}};
}

RfeRanking RfeRanking::from_json(const nlohmann::json& j) {
  RfeRanking r;
  r.elimination_order = j.at("elimination_order").get<std::vector<std::string>>();
  r.base_params = ClassifierParams::from_json(j.at("base_params"));
  r.seed = j.at("seed").get<std::uint64_t>();
  r.eliminations = j.at("eliminations").get<std::size_t>();
  return r;
}

ClassifierParams rfe_base_params() {
  ClassifierParams p;
  p.n_trees = 100;
  return p;
}

RfeRanking rfe_rank(const Table& table, const ClassifierParams& base_params, std::uint64_t seed) {
  const Table t = canonical(table);
  auto surviving = t.schema().feature_names();
  if (surviving.empty()) throw InsufficientData("feature elimination needs at least one feature");
  const auto y = t.labels();
  require_both_classes(y, "feature elimination");

  RfeRanking r;
  r.base_params = base_params;
  r.seed = seed;
  for (std::size_t iter = 0; surviving.size() > 1; ++iter) {
    const auto model = fit_classifier(ClassifierKind::rf, feature_matrix(t, surviving), y,
                                      surviving, base_params, derive_seed(seed, iter));
    const auto& imp = model.importances;
    const auto worst = static_cast<std::size_t>(
        std::min_element(imp.begin(), imp.end()) - imp.begin());
    r.elimination_order.push_back(surviving[worst]);
    surviving.erase(surviving.begin() + static_cast<std::ptrdiff_t>(worst));
    ++r.eliminations;
  }
  r.elimination_order.push_back(surviving.front());
  return r;
}

std::vector<std::size_t> stratified_folds(std::span<const int> labels, std::size_t k,
                                          std::uint64_t seed) {
  if (k < 2) throw ConfigError(fmt::format("fold count must be at least 2, got {}", k));
  const auto ones = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  const std::size_t smallest = std::min(ones, labels.size() - ones);
  if (smallest < k) {
    throw FoldInfeasible(
        fmt::format("{} folds need at least {} rows per class; smallest class has {}", k, k,
                    smallest));
  }
  std::vector<std::size_t> order(labels.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(order);
  std::vector<std::size_t> folds(labels.size());
  std::size_t dealt[2] = {0, 0};
  for (auto r : order) {
    const int c = labels[r] == 1 ? 1 : 0;
    folds[r] = dealt[c]++ % k;
  }
  return folds;
}

std::string_view to_string(CvProtocol protocol) {
  switch (protocol) {
    case CvProtocol::synthetic_cv:
      return "synthetic-cv";
    case CvProtocol::augmented:
      return "augmented";
    case CvProtocol::tstr:
      return "tstr";
  }
  return "synthetic-cv";
}

CvProtocol parse_cv_protocol(std::string_view text) {
  for (auto p : {CvProtocol::synthetic_cv, CvProtocol::augmented, CvProtocol::tstr}) {
    if (text == to_string(p)) return p;
  }
  throw ConfigError(fmt::format("unknown protocol '{}' (synthetic-cv, augmented, tstr)", text));
}

CvResult cv_f1(const Table& table, std::span<const std::string> features, std::size_t k,
               ClassifierKind kind, const ClassifierParams& params, std::uint64_t seed,
               CvProtocol protocol, const Table* real) {
  if (protocol != CvProtocol::synthetic_cv && real == nullptr) {
    throw ConfigError(fmt::format("protocol {} needs the real table", to_string(protocol)));
  }
  const Table synth = canonical(table);
  const auto ys = synth.labels();
  const Matrix xs = feature_matrix(synth, features);
  const auto fit_seed = derive_seed(seed, "fit");

  CvResult out;
  if (protocol == CvProtocol::synthetic_cv) {
    const auto folds = make_folds(ys, k, derive_seed(seed, "folds"));
    for (std::size_t f = 0; f < k; ++f) {
      const auto& fold = folds[f];
      out.folds.push_back(fold_f1(kind, pick_rows(xs, fold.train), pick(ys, fold.train),
                                  pick_rows(xs, fold.test), pick(ys, fold.test), features, params,
                                  derive_seed(fit_seed, f)));
    }
  } else {
    const Table ref = canonical(*real);
    const auto yr = ref.labels();
    const Matrix xr = feature_matrix(ref, features);
    const auto real_folds = make_folds(yr, k, derive_seed(seed, "real-folds"));
    std::vector<Fold> synth_folds;
    if (protocol == CvProtocol::tstr) synth_folds = make_folds(ys, k, derive_seed(seed, "folds"));
    for (std::size_t f = 0; f < k; ++f) {
      const auto& test = real_folds[f].test;
      Matrix x_train;
      std::vector<int> y_train;
      if (protocol == CvProtocol::augmented) {
        x_train = vstack(pick_rows(xr, real_folds[f].train), xs);
        y_train = pick(yr, real_folds[f].train);
        y_train.insert(y_train.end(), ys.begin(), ys.end());
      } else {
        x_train = pick_rows(xs, synth_folds[f].train);
        y_train = pick(ys, synth_folds[f].train);
      }
      out.folds.push_back(fold_f1(kind, x_train, y_train, pick_rows(xr, test), pick(yr, test),
                                  features, params, derive_seed(fit_seed, f)));
    }
  }
  out.mean = std::accumulate(out.folds.begin(), out.folds.end(), 0.0) /
             static_cast<double>(out.folds.size());
  return out;
}

const GridCell& EvalGrid::at(std::size_t k, std::size_t d) const {
  for (const auto& c : cells) {
    if (c.k == k && c.d == d) return c;
  }
  throw IndexError(fmt::format("no grid cell for k = {}, d = {}", k, d));
}

EvalGrid sweep(const Table& table, const RfeRanking& ranking, const SweepOptions& options,
               std::uint64_t seed) {
  if (options.k_min < 2 || options.k_max < options.k_min) {
    throw ConfigError(fmt::format("invalid fold range {}..{}", options.k_min, options.k_max));
  }
  if (ranking.size() == 0) throw ConfigError("empty feature ranking");
  const std::size_t max_d =
      options.max_d == 0 ? ranking.size() : std::min(options.max_d, ranking.size());

  EvalGrid grid;
  grid.ranking = ranking;
  grid.kind = options.kind;
  grid.protocol = options.protocol;
  grid.seed = seed;
  grid.max_d = max_d;
  for (std::size_t k = options.k_min; k <= options.k_max; ++k) {
    grid.ks.push_back(k);
    for (std::size_t d = 1; d <= max_d; ++d) grid.cells.push_back({k, d, 0.0, {}});
  }

  auto run = [&](GridCell& cell) {
    const auto features = ranking.subset(cell.d);
    auto r = cv_f1(table, features, cell.k, options.kind, options.params,
                   derive_seed(seed, cell.k), options.protocol, options.real);
    cell.f1 = r.mean;
    cell.folds = std::move(r.folds);
  };

  const std::size_t threads = std::max<std::size_t>(1, options.threads);
  if (threads == 1) {
    for (auto& c : grid.cells) run(c);
    return grid;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < grid.cells.size(); i = next++) {
        try {
          run(grid.cells[i]);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
  return grid;
}

BestConfig best_config(const EvalGrid& grid) {
  if (grid.cells.empty()) throw InsufficientData("empty evaluation grid");
  std::vector<const GridCell*> order;
  for (const auto& c : grid.cells) order.push_back(&c);
  std::sort(order.begin(), order.end(), [](const GridCell* a, const GridCell* b) {
    return a->d != b->d ? a->d < b->d : a->k < b->k;
  });
  const GridCell* best = order.front();
  for (const auto* c : order) {
    if (c->f1 > best->f1) best = c;
  }
  return {best->k, best->d, best->f1};
}

}  // namespace voxsynth
