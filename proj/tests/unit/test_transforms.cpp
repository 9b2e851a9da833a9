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
#include "voxsynth/error.hpp"
#include "voxsynth/rng.hpp"
#include "voxsynth/transforms.hpp"

using namespace voxsynth;
using Catch::Matchers::WithinAbs;

namespace {

std::vector<double> bimodal(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(n);
  for (auto& x : v) x = (rng.uniform() < 0.5 ? 0.0 : 10.0) + rng.normal();
  return v;
}

double weight_sum(const VgmModel& m) {
  return std::accumulate(m.weights.begin(), m.weights.end(), 0.0);
}

}  // namespace

TEST_CASE("constant column gives one floored mode") {
  const std::vector<double> c(50, 5.0);
  VgmOptions opt;
  opt.max_modes = 4;
  const auto m = fit_vgm(c, opt, 1);
  REQUIRE(m.modes() == 1);
  REQUIRE(m.weights[0] == 1.0);
  REQUIRE(m.means[0] == 5.0);
  REQUIRE(m.stds[0] == kStdFloor);
}

TEST_CASE("two well-separated clusters give two modes near their centres") {
  const auto v = bimodal(1000, 3);
  const auto m = fit_vgm(v, VgmOptions{}, 5);
  REQUIRE(m.modes() >= 2);
  // Every retained mode belongs to one of the two clusters.
  for (double mu : m.means) REQUIRE(std::min(std::abs(mu), std::abs(mu - 10.0)) < 3.0);
  // Weight mass on each side of 5 is about one half.
  double left = 0.0;
  for (std::size_t k = 0; k < m.modes(); ++k) left += m.means[k] < 5.0 ? m.weights[k] : 0.0;
  REQUIRE_THAT(left, WithinAbs(0.5, 0.06));
}

TEST_CASE("two-component fit recovers the generating means") {
  const auto v = bimodal(1000, 4);
  VgmOptions opt;
  opt.max_modes = 2;
  const auto m = fit_vgm(v, opt, 2);
  REQUIRE(m.modes() == 2);
  REQUIRE_THAT(m.means[0], WithinAbs(0.0, 0.3));
  REQUIRE_THAT(m.means[1], WithinAbs(10.0, 0.3));
}

TEST_CASE("one mode is the sample mean and sample std") {
  const std::vector<double> v{1, 2, 3, 4, 10};
  VgmOptions opt;
  opt.max_modes = 1;
  const auto m = fit_vgm(v, opt, 1);
  REQUIRE(m.modes() == 1);
  REQUIRE_THAT(m.means[0], WithinAbs(4.0, 1e-12));
  REQUIRE_THAT(m.stds[0], WithinAbs(std::sqrt(50.0 / 4.0), 1e-12));
}

TEST_CASE("EM log-likelihood never decreases and weights renormalize") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    Rng rng(seed * 31);
    std::vector<double> v(200);
    for (auto& x : v) x = rng.uniform() < 0.3 ? rng.normal() * 0.5 : 3.0 + rng.normal() * 2.0;
    const auto fit = fit_vgm_traced(v, VgmOptions{}, seed);
    for (std::size_t i = 1; i < fit.log_likelihood.size(); ++i) {
      REQUIRE(fit.log_likelihood[i] >= fit.log_likelihood[i - 1] - 1e-9);
    }
    REQUIRE_THAT(weight_sum(fit.model), WithinAbs(1.0, 1e-9));
    REQUIRE(std::is_sorted(fit.model.means.begin(), fit.model.means.end()));
    for (double w : fit.model.weights) REQUIRE(w >= 0.005);
    for (double s : fit.model.stds) REQUIRE(s >= kStdFloor);
  }
}

TEST_CASE("VGM fit is deterministic for a seed") {
  const auto v = bimodal(300, 9);
  const auto a = fit_vgm(v, VgmOptions{}, 77);
  const auto b = fit_vgm(v, VgmOptions{}, 77);
  REQUIRE(a.means == b.means);
  REQUIRE(a.stds == b.stds);
  REQUIRE(a.weights == b.weights);
}

TEST_CASE("encode and decode boundary cases") {
  VgmModel m;
  m.weights = {0.5, 0.5};
  m.means = {0.0, 10.0};
  m.stds = {1.0, 2.0};
  REQUIRE(vgm_decode(m, 0.0, 1) == 10.0);
  REQUIRE(vgm_decode(m, -1.0, 1) == 2.0);
  REQUIRE_THROWS_AS(vgm_decode(m, 0.0, 2), IndexError);

  const auto centre = vgm_encode(m, 10.0, 3);
  REQUIRE(centre.mode == 1);
  REQUIRE(centre.alpha == 0.0);

  VgmModel single;
  single.weights = {1.0};
  single.means = {2.0};
  single.stds = {0.5};
  for (std::uint64_t s = 0; s < 20; ++s) {
    REQUIRE(vgm_encode(single, 2.0 + 4 * 0.5, s).alpha == 1.0);
    REQUIRE(vgm_encode(single, -100.0, s).mode == 0);
    REQUIRE(vgm_encode(single, -100.0, s).alpha == -1.0);
  }
}

TEST_CASE("decode inverts encode for values inside their mode window") {
  const auto v = bimodal(500, 12);
  const auto m = fit_vgm(v, VgmOptions{}, 3);
  Rng rng(5);
  for (double x : v) {
    const auto code = vgm_encode(m, x, rng);
    REQUIRE(code.mode < m.modes());
    if (std::abs(x - m.means[code.mode]) <= 4 * m.stds[code.mode]) {
      REQUIRE_THAT(vgm_decode(m, code.alpha, code.mode), WithinAbs(x, 1e-9));
    }
  }
}

TEST_CASE("normal quantile inverts the normal CDF") {
  REQUIRE(normal_quantile(0.5) == 0.0);
  for (double p : {1e-6, 0.01, 0.2, 0.5, 0.77, 0.99, 1 - 1e-6}) {
    REQUIRE_THAT(normal_cdf(normal_quantile(p)), WithinAbs(p, 1e-12));
  }
  REQUIRE_THAT(normal_quantile(0.975), WithinAbs(1.959963984540054, 1.5e-7));
}

TEST_CASE("copula maps the median near zero and observed points round trip") {
  Rng rng(21);
  std::vector<double> v(151);
  for (auto& x : v) x = std::exp(rng.normal());
  const auto cm = CopulaModel::fit(v);
  std::vector<double> sorted = v;
  std::sort(sorted.begin(), sorted.end());
  const double median = sorted[75];
  REQUIRE(std::abs(cm.map(median, CopulaDirection::to_gaussian)) < 0.05);
  REQUIRE(cm.epsilon() == 1.0 / (2.0 * 151));
  for (double x : v) {
    const double z = copula_map(cm, x, CopulaDirection::to_gaussian);
    REQUIRE_THAT(copula_map(cm, z, CopulaDirection::from_gaussian), WithinAbs(x, 1e-9));
  }
}

TEST_CASE("copula map is monotone and clipped") {
  Rng rng(22);
  std::vector<double> v(100);
  for (auto& x : v) x = rng.uniform(-3, 3);
  const auto cm = CopulaModel::fit(v);
  double prev = -1e300;
  for (double x = -5; x <= 5; x += 0.01) {
    const double z = cm.map(x, CopulaDirection::to_gaussian);
    REQUIRE(z >= prev);
    REQUIRE(std::isfinite(z));
    prev = z;
  }
  REQUIRE(cm.cdf(-100) >= cm.epsilon());
  REQUIRE(cm.cdf(100) <= 1 - cm.epsilon());
  const auto id = CopulaModel::identity();
  REQUIRE(id.map(3.25, CopulaDirection::to_gaussian) == 3.25);
  REQUIRE(id.map(3.25, CopulaDirection::from_gaussian) == 3.25);
}

TEST_CASE("copula JSON round trip preserves the map") {
  std::vector<double> v{3, 1, 2, 2, 8, 5};
  const auto cm = CopulaModel::fit(v);
  const auto back = CopulaModel::from_json(cm.to_json());
  for (double x : {0.5, 1.0, 2.0, 4.4, 9.0}) {
    REQUIRE(back.map(x, CopulaDirection::to_gaussian) == cm.map(x, CopulaDirection::to_gaussian));
  }
}

TEST_CASE("table codec round trip and one-hot layout") {
  const auto t = testing::standin_corpus(31).without_group();
  const auto codec = TableCodec::fit(t, CodecOptions{}, 4);
  const auto enc = codec.encode(t, 8);
  REQUIRE(static_cast<std::size_t>(enc.cols()) == codec.width());
  std::size_t width = 0;
  for (const auto& span : codec.spans()) {
    width += span.width;
    for (Eigen::Index r = 0; r < enc.rows(); ++r) {
      const auto block = enc.row(r).segment(static_cast<Eigen::Index>(span.block_offset()),
                                            static_cast<Eigen::Index>(span.block_width()));
      REQUIRE(block.sum() == 1.0);
      REQUIRE(block.maxCoeff() == 1.0);
      if (span.kind == ColumnKind::continuous) {
        REQUIRE(std::abs(enc(r, static_cast<Eigen::Index>(span.offset))) <= 1.0);
      }
    }
    if (span.kind == ColumnKind::discrete) REQUIRE(span.width == 2);
  }
  REQUIRE(width == codec.width());

  const auto back = codec.decode(enc);
  for (std::size_t c = 0; c < t.num_columns(); ++c) {
    for (std::size_t r = 0; r < t.num_rows(); ++r) {
      if (t.schema().columns[c].kind == ColumnKind::discrete) {
        REQUIRE(back.at(r, c) == t.at(r, c));
      } else {
        REQUIRE_THAT(back.at(r, c), WithinAbs(t.at(r, c), 1e-9 * std::max(1.0, std::abs(t.at(r, c)))));
      }
    }
  }
}

TEST_CASE("codec round trip holds over random tables") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Rng rng(seed);
    Schema s;
    s.columns = {{"a", ColumnKind::continuous, "", {}},
                 {"b", ColumnKind::continuous, "", {}},
                 {"k", ColumnKind::discrete, "", {"x", "y", "z"}}};
    s.target_column = "k";
    std::vector<std::vector<double>> cols(3);
    for (int r = 0; r < 80; ++r) {
      cols[0].push_back(rng.normal() * 100);
      cols[1].push_back(rng.uniform() < 0.5 ? rng.uniform(-1, 0) : 50 + rng.normal());
      cols[2].push_back(static_cast<double>(rng.below(3)));
    }
    const Table t(s, cols);
    const auto codec = TableCodec::fit(t, CodecOptions{}, seed);
    const auto back = codec.decode(encode_table(codec, t, seed + 1));
    for (std::size_t c = 0; c < 3; ++c) {
      for (std::size_t r = 0; r < t.num_rows(); ++r) {
        REQUIRE_THAT(back.at(r, c), WithinAbs(t.at(r, c), 1e-9 * std::max(1.0, std::abs(t.at(r, c)))));
      }
    }
  }
}

TEST_CASE("codec rejects a mismatched schema and handles empty tables") {
  const auto t = testing::standin_corpus(32).without_group();
  const auto codec = TableCodec::fit(t, CodecOptions{}, 4);
  const auto other = testing::signal_table(10, 3, 1);
  REQUIRE_THROWS_AS(codec.encode(other, 1), SchemaMismatch);
  const std::vector<std::size_t> none;
  const auto empty = codec.encode(t.select_rows(none), 1);
  REQUIRE(empty.rows() == 0);
  REQUIRE(static_cast<std::size_t>(empty.cols()) == codec.width());
}

TEST_CASE("codec JSON round trip encodes identically") {
  const auto t = testing::standin_corpus(33).without_group();
  const auto codec = TableCodec::fit(t, CodecOptions{}, 4);
  const auto back = TableCodec::from_json(codec.to_json());
  REQUIRE(back.width() == codec.width());
  REQUIRE(back.encode(t, 3) == codec.encode(t, 3));
}

TEST_CASE("copula layer leaves the target untouched and inverts on samples") {
  const auto t = testing::standin_corpus(34).without_group();
  const auto layer = CopulaLayer::fit(t);
  const auto g = layer.apply(t, CopulaDirection::to_gaussian);
  const auto back = layer.apply(g, CopulaDirection::from_gaussian);
  const auto target = t.schema().target_index();
  for (std::size_t r = 0; r < t.num_rows(); ++r) {
    REQUIRE(g.at(r, target) == t.at(r, target));
    for (std::size_t c : t.schema().feature_indices()) {
      REQUIRE_THAT(back.at(r, c), WithinAbs(t.at(r, c), 1e-9 * std::max(1.0, std::abs(t.at(r, c)))));
    }
  }
}
