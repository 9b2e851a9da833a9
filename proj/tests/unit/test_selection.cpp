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
#include <map>
#include <numeric>
#include <set>
#include <thread>

#include "catch_amalgamated.hpp"
#include "standin.hpp"
#include "voxsynth/error.hpp"
#include "voxsynth/rng.hpp"
#include "voxsynth/selection.hpp"

using namespace voxsynth;
using voxsynth::testing::signal_table;

namespace {

ClassifierParams small_forest() {
  ClassifierParams p;
  p.n_trees = 10;
  return p;
}

Table shuffled(const Table& t, std::uint64_t seed) {
  std::vector<std::size_t> idx(t.num_rows());
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed);
  rng.shuffle(idx);
  return t.select_rows(idx);
}

bool same_grid(const EvalGrid& a, const EvalGrid& b) {
  if (a.cells.size() != b.cells.size()) return false;
  for (std::size_t i = 0; i < a.cells.size(); ++i) {
    if (a.cells[i].k != b.cells[i].k || a.cells[i].d != b.cells[i].d ||
        a.cells[i].folds != b.cells[i].folds || a.cells[i].f1 != b.cells[i].f1) {
      return false;
    }
  }
  return true;
}

}  // namespace

TEST_CASE("folds are disjoint, exhaustive and stratified") {
  Rng gen(3);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t n = 20 + gen.below(150);
    std::vector<int> labels(n);
    for (auto& l : labels) l = gen.uniform() < 0.3 ? 0 : 1;
    labels[0] = 0;
    labels[1] = 1;
    std::map<int, std::size_t> per_class;
    for (int l : labels) ++per_class[l];
    const std::size_t smallest = std::min(per_class[0], per_class[1]);
    if (smallest < 2) continue;
    const std::size_t k = 2 + gen.below(std::min<std::size_t>(8, smallest - 1));
    const auto folds = stratified_folds(labels, k, gen.next());
    REQUIRE(folds.size() == n);
    std::vector<std::map<int, std::size_t>> counts(k);
    for (std::size_t i = 0; i < n; ++i) {
      REQUIRE(folds[i] < k);
      ++counts[folds[i]][labels[i]];
    }
    for (int c : {0, 1}) {
      std::size_t lo = n, hi = 0;
      for (const auto& f : counts) {
        const auto it = f.find(c);
        const std::size_t v = it == f.end() ? 0 : it->second;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      REQUIRE(hi - lo <= 1);
      REQUIRE(lo >= 1);
    }
  }
}

TEST_CASE("fold preconditions") {
  const std::vector<int> labels{0, 0, 0, 1, 1, 1, 1, 1};
  REQUIRE_NOTHROW(stratified_folds(labels, 3, 1));
  REQUIRE_THROWS_AS(stratified_folds(labels, 4, 1), FoldInfeasible);
  REQUIRE_THROWS_AS(stratified_folds(labels, 1, 1), ConfigError);
  const auto t = signal_table(40, 3, 2);
  const std::vector<std::string> f{"f0"};
  REQUIRE_THROWS_AS(cv_f1(t, f, 21, ClassifierKind::dt, {}, 1), FoldInfeasible);
}

TEST_CASE("same seed gives identical folds and scores") {
  const auto t = signal_table(60, 4, 8);
  const std::vector<std::string> f{"f1", "f2", "f3"};
  REQUIRE(stratified_folds(t.labels(), 5, 11) == stratified_folds(t.labels(), 5, 11));
  const auto a = cv_f1(t, f, 5, ClassifierKind::rf, small_forest(), 11);
  const auto b = cv_f1(t, f, 5, ClassifierKind::rf, small_forest(), 11);
  REQUIRE(a.folds == b.folds);
  REQUIRE(a.mean == b.mean);
}

TEST_CASE("separable data scores f1 = 1 for every k") {
  const auto t = signal_table(80, 4, 5);
  const std::vector<std::string> f{"f0"};
  for (std::size_t k = 2; k <= 9; ++k) {
    const auto r = cv_f1(t, f, k, ClassifierKind::rf, small_forest(), k);
    REQUIRE(r.folds.size() == k);
    REQUIRE(r.mean == 1.0);
  }
}

TEST_CASE("RFE eliminates d - 1 features and orders a permutation") {
  const auto t = signal_table(60, 6, 4);
  const auto r = rfe_rank(t, small_forest(), 9);
  REQUIRE(r.eliminations == 5);
  auto sorted = r.elimination_order;
  std::sort(sorted.begin(), sorted.end());
  REQUIRE(sorted == std::vector<std::string>{"f0", "f1", "f2", "f3", "f4", "f5"});
  REQUIRE(r.subset(1) == std::vector<std::string>{r.elimination_order.back()});
  const auto s3 = r.subset(3);
  REQUIRE(s3.size() == 3);
  REQUIRE(s3[0] == r.elimination_order[5]);
  REQUIRE(s3[2] == r.elimination_order[3]);
  REQUIRE_THROWS_AS(r.subset(0), IndexError);
  REQUIRE_THROWS_AS(r.subset(7), IndexError);

  const auto one = rfe_rank(t.select_columns(std::vector<std::string>{"f2", "status"}),
                            small_forest(), 1);
  REQUIRE(one.elimination_order == std::vector<std::string>{"f2"});
  REQUIRE(one.eliminations == 0);
}

TEST_CASE("RFE keeps the signal feature in at least 95 of 100 runs") {
  int kept = 0;
  for (std::uint64_t run = 0; run < 100; ++run) {
    const auto t = signal_table(60, 6, 1000 + run);
    const auto r = rfe_rank(t, rfe_base_params(), run);
    kept += r.elimination_order.back() == "f0";
  }
  REQUIRE(kept >= 95);
}

TEST_CASE("RFE is deterministic and rejects single-class tables") {
  const auto t = signal_table(50, 5, 6);
  REQUIRE(rfe_rank(t, small_forest(), 3).elimination_order ==
          rfe_rank(t, small_forest(), 3).elimination_order);
  REQUIRE(rfe_rank(t, small_forest(), 3).elimination_order ==
          rfe_rank(shuffled(t, 77), small_forest(), 3).elimination_order);
  std::vector<std::size_t> patients;
  const auto y = t.labels();
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] == 1) patients.push_back(i);
  }
  REQUIRE_THROWS_AS(rfe_rank(t.select_rows(patients), small_forest(), 3), DegenerateLabels);
}

TEST_CASE("ranking JSON round trip") {
  const auto r = rfe_rank(signal_table(40, 4, 2), small_forest(), 5);
  const auto back = RfeRanking::from_json(r.to_json());
  REQUIRE(back.elimination_order == r.elimination_order);
  REQUIRE(back.seed == r.seed);
  REQUIRE(back.eliminations == r.eliminations);
  REQUIRE(back.base_params.n_trees == r.base_params.n_trees);
}

TEST_CASE("sweep grid invariants") {
  const auto t = signal_table(60, 4, 12);
  const auto ranking = rfe_rank(t, small_forest(), 1);
  SweepOptions o;
  o.k_max = 5;
  o.params = small_forest();
  const auto grid = sweep(t, ranking, o, 4);
  REQUIRE(grid.ks == std::vector<std::size_t>{2, 3, 4, 5});
  REQUIRE(grid.max_d == 4);
  REQUIRE(grid.cells.size() == 16);
  for (const auto& c : grid.cells) {
    REQUIRE(c.f1 >= 0.0);
    REQUIRE(c.f1 <= 1.0);
    REQUIRE(c.folds.size() == c.k);
    const double mean = std::accumulate(c.folds.begin(), c.folds.end(), 0.0) /
                        static_cast<double>(c.folds.size());
    REQUIRE(std::abs(mean - c.f1) <= 1e-12);
    for (double f : c.folds) REQUIRE((f >= 0.0 && f <= 1.0));
  }
  REQUIRE(grid.at(3, 2).k == 3);
  REQUIRE(grid.at(3, 2).d == 2);
  REQUIRE_THROWS_AS(grid.at(6, 1), IndexError);
  REQUIRE_THROWS_AS(grid.at(2, 5), IndexError);
}

TEST_CASE("sweep is invariant to row order and thread count") {
  const auto t = signal_table(50, 4, 21);
  const auto ranking = rfe_rank(t, small_forest(), 2);
  SweepOptions o;
  o.k_max = 4;
  o.params = small_forest();
  const auto base = sweep(t, ranking, o, 9);
  REQUIRE(same_grid(base, sweep(shuffled(t, 5), ranking, o, 9)));
  o.threads = 3;
  REQUIRE(same_grid(base, sweep(t, ranking, o, 9)));
}

TEST_CASE("a duplicated perfect predictor reaches f1 = 1") {
  auto t = signal_table(60, 5, 30);
  const auto f0 = t.column("f0");
  t = t.with_column(*t.schema().find("f4"), std::vector<double>(f0.begin(), f0.end()));
  const auto ranking = rfe_rank(t, small_forest(), 3);
  SweepOptions o;
  o.k_max = 4;
  o.params = small_forest();
  const auto best = best_config(sweep(t, ranking, o, 3));
  REQUIRE(best.f1 == 1.0);
  REQUIRE(best.d >= 1);
}

TEST_CASE("best_config tie-breaking") {
  EvalGrid g;
  g.ks = {2};
  g.max_d = 1;
  g.cells = {{2, 1, 0.4, {0.4, 0.4}}};
  const auto single = best_config(g);
  REQUIRE((single.k == 2 && single.d == 1 && single.f1 == 0.4));

  g.ks = {2, 3};
  g.max_d = 3;
  g.cells = {{2, 1, 0.5, {}}, {2, 2, 0.9, {}}, {2, 3, 0.9, {}},
             {3, 1, 0.9, {}}, {3, 2, 0.9, {}}, {3, 3, 0.7, {}}};
  const auto best = best_config(g);
  REQUIRE(best.d == 1);
  REQUIRE(best.k == 3);
  g.cells[3].f1 = 0.2;
  const auto next = best_config(g);
  REQUIRE(next.d == 2);
  REQUIRE(next.k == 2);
  REQUIRE_THROWS_AS(best_config(EvalGrid{}), InsufficientData);
}

TEST_CASE("alternative protocols") {
  const auto real = signal_table(60, 3, 40);
  const auto synth = signal_table(80, 3, 41);
  const std::vector<std::string> f{"f0"};
  REQUIRE_THROWS_AS(cv_f1(synth, f, 3, ClassifierKind::rf, small_forest(), 1, CvProtocol::tstr),
                    ConfigError);
  const auto tstr =
      cv_f1(synth, f, 3, ClassifierKind::rf, small_forest(), 1, CvProtocol::tstr, &real);
  REQUIRE(tstr.mean == 1.0);
  const auto aug =
      cv_f1(synth, f, 3, ClassifierKind::rf, small_forest(), 1, CvProtocol::augmented, &real);
  REQUIRE(aug.mean == 1.0);
  REQUIRE(aug.folds.size() == 3);
  REQUIRE(parse_cv_protocol("tstr") == CvProtocol::tstr);
  REQUIRE(to_string(CvProtocol::augmented) == "augmented");
  REQUIRE_THROWS_AS(parse_cv_protocol("holdout"), ConfigError);
}
