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

#include "voxsynth/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>
#include <set>

#include <fmt/format.h>

#include "voxsynth/attribution.hpp"
#include "voxsynth/classifiers.hpp"
#include "voxsynth/nn.hpp"
#include "voxsynth/pipeline.hpp"
#include "voxsynth/quality.hpp"
#include "voxsynth/rng.hpp"
#include "voxsynth/selection.hpp"
#include "voxsynth/transforms.hpp"

namespace voxsynth {

namespace fs = std::filesystem;

namespace {

using Index = Eigen::Index;

// Thrown by require() inside a check body.
struct CheckFailed {
  std::string detail;
};

void require(bool ok, const std::string& detail) {
  if (!ok) throw CheckFailed{detail};
}

CheckResult timed(const std::string& name, const std::function<std::string()>& body) {
  CheckResult r;
  r.name = name;
  const auto start = std::chrono::steady_clock::now();
  try {
    r.detail = body();
    r.passed = true;
  } catch (const CheckFailed& f) {
    r.detail = f.detail;
  } catch (const std::exception& e) {
    r.detail = fmt::format("unexpected error: {}", e.what());
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

Matrix random_matrix(Index rows, Index cols, std::uint64_t seed) {
  Rng rng(seed);
  Matrix m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  return m;
}

Mlp linear_net(const Matrix& w) {
  Mlp net;
  Layer l;
  l.weight = w;
  l.bias = RowVector::Zero(w.cols());
  l.activation = Activation::linear;
  net.layers.push_back(l);
  return net;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string check_round_trip() {
  double worst = 0.0;
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
        worst = std::max(worst, std::abs(back.at(r, c) - t.at(r, c)) / std::max(1.0, std::abs(t.at(r, c))));
      }
    }
    for (double p : {0.05, 0.3, 0.5, 0.9, 0.999}) {
      worst = std::max(worst, std::abs(normal_cdf(normal_quantile(p)) - p));
    }
  }
  require(worst <= 1e-9, fmt::format("relative round-trip error {:.3g} > 1e-9", worst));
  return fmt::format("max relative error {:.3g}", worst);
}

std::string check_em() {
  std::size_t steps = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    Rng rng(seed * 31);
    std::vector<double> v(200);
    for (auto& x : v) x = rng.uniform() < 0.3 ? rng.normal() * 0.5 : 3.0 + rng.normal() * 2.0;
    const auto fit = fit_vgm_traced(v, VgmOptions{}, seed);
    for (std::size_t i = 1; i < fit.log_likelihood.size(); ++i) {
      require(fit.log_likelihood[i] >= fit.log_likelihood[i - 1] - 1e-9,
              fmt::format("seed {}: log-likelihood fell at iteration {}", seed, i));
    }
    steps += fit.log_likelihood.size();
  }
  return fmt::format("{} EM iterations over 10 fits, none decreasing", steps);
}

std::string check_gradients() {
  double worst = 0.0;
  std::uint64_t seed = 20;
  for (auto act : {Activation::tanh, Activation::relu, Activation::leaky_relu}) {
    Rng rng(seed++);
    const auto net = Mlp::create({7, 16, 16, 5}, act, Activation::linear, rng);
    const Matrix x = random_matrix(6, 7, seed++);
    const Matrix target = random_matrix(6, 5, seed++);
    const OutputLoss loss{[target](const Matrix& out) { return 0.5 * (out - target).squaredNorm(); },
                          [target](const Matrix& out) -> Matrix { return out - target; }};
    worst = std::max(worst, grad_check(net, x, loss, 1e-5, seed).max_relative_error);
  }
  Rng rng(8);
  const auto critic = Mlp::create({12, 16, 16, 1}, Activation::leaky_relu, Activation::linear, rng);
  const Matrix points = random_matrix(5, 12, 10);
  GradProbe probe;
  probe.loss = [&](const Mlp& n) { return gradient_penalty_at(n, points).value; };
  probe.regions = [&](const Mlp& n) { return activation_regions(n, points); };
  worst = std::max(worst, grad_check(critic, gradient_penalty_at(critic, points).grads, probe, 1e-6, 3)
                              .max_relative_error);
  require(worst < 1e-4, fmt::format("max relative gradient error {:.3g} >= 1e-4", worst));
  return fmt::format("max relative error {:.3g}", worst);
}

std::string check_gp() {
  const Matrix real = random_matrix(8, 3, 6);
  const Matrix fake = random_matrix(8, 3, 7);
  Matrix unit(3, 1), two(3, 1);
  unit << 0.6, 0.0, 0.8;
  two << 2.0, 0.0, 0.0;
  const double a = gradient_penalty(linear_net(unit), real, fake, 1);
  const double b = gradient_penalty(linear_net(two), real, fake, 1);
  const double c = gradient_penalty(linear_net(Matrix::Zero(3, 1)), real, fake, 1);
  require(std::abs(a) <= 1e-9 && std::abs(b - 1) <= 1e-9 && std::abs(c - 1) <= 1e-9,
          fmt::format("penalties {} {} {} (expected 0 1 1)", a, b, c));
  return "unit-norm 0, norm-2 1, zero critic 1";
}

std::string check_quality() {
  const std::vector<double> a{1, 2, 3, 4};
  require(ks_complement(a, std::vector<double>{1, 2, 3, 8}) == 0.75, "KS complement");
  require(ks_complement(a, a) == 1.0, "KS self");
  const std::vector<double> half{0, 1, 0, 1};
  require(tv_complement(half, std::vector<double>{0, 0, 0, 0}, 2) == 0.5, "TV complement");
  require(correlation_similarity_from(0.8, 0.3) == 0.75, "correlation similarity");
  require(correlation_similarity_from(1.0, -1.0) == 0.0, "correlation similarity extremes");
  return "KS 0.75, TV 0.5, CS 0.75 exact";
}

double toy_score(const double* z) { return z[0] * z[1] + std::sin(z[2]) + 0.5 * z[0] * z[0]; }

ScoreFn toy_fn() {
  return [](const Matrix& m) {
    std::vector<double> out;
    for (Index r = 0; r < m.rows(); ++r) {
      const double z[3] = {m(r, 0), m(r, 1), m(r, 2)};
      out.push_back(toy_score(z));
    }
    return out;
  };
}

std::string check_shapley_exact() {
  const Matrix bg = random_matrix(6, 3, 4);
  const std::vector<double> x{0.7, -1.1, 2.3};
  auto v = [&](unsigned mask) {
    double total = 0.0;
    for (Index r = 0; r < bg.rows(); ++r) {
      double z[3];
      for (int j = 0; j < 3; ++j) z[j] = (mask >> j) & 1U ? x[static_cast<std::size_t>(j)] : bg(r, j);
      total += toy_score(z);
    }
    return total / static_cast<double>(bg.rows());
  };
  const double fact[] = {1, 1, 2, 6};
  const auto r = shapley_sampled(toy_fn(), x, bg, 1, 1, ShapleyMode::exhaustive);
  double worst = 0.0;
  for (int j = 0; j < 3; ++j) {
    double phi = 0.0;
    for (unsigned s = 0; s < 8; ++s) {
      if ((s >> j) & 1U) continue;
      const int size = __builtin_popcount(s);
      phi += fact[size] * fact[2 - size] / fact[3] * (v(s | (1U << j)) - v(s));
    }
    worst = std::max(worst, std::abs(phi - r.values[static_cast<std::size_t>(j)]));
  }
  require(worst <= 1e-9, fmt::format("deviation from exact Shapley {:.3g}", worst));
  return fmt::format("max deviation {:.3g}", worst);
}

std::string check_shapley_residual() {
  const Matrix bg = random_matrix(40, 3, 21);
  const std::vector<double> x{0.8, -1.2, 2.0};
  std::vector<double> medians;
  for (std::size_t budget : {10, 100, 1000}) {
    std::vector<double> res;
    for (std::uint64_t s = 0; s < 20; ++s) {
      const auto r = shapley_sampled(toy_fn(), x, bg, budget, s);
      require(std::isfinite(r.residual), "residual not reported");
      res.push_back(r.residual);
    }
    std::sort(res.begin(), res.end());
    medians.push_back(0.5 * (res[9] + res[10]));
  }
  require(medians[1] < medians[0] && medians[2] < medians[1],
          fmt::format("median residuals {:.4g} {:.4g} {:.4g} not decreasing", medians[0], medians[1], medians[2]));
  return fmt::format("median residual {:.4g} / {:.4g} / {:.4g} at 10 / 100 / 1000", medians[0], medians[1],
                     medians[2]);
}

std::string check_boosting() {
  Rng rng(3);
  Matrix x(200, 4);
  std::vector<int> y;
  for (Index r = 0; r < 200; ++r) {
    for (Index c = 0; c < 4; ++c) x(r, c) = rng.normal();
    y.push_back(x(r, 0) + 0.5 * x(r, 1) + 0.7 * rng.normal() > 0 ? 1 : 0);
  }
  const std::vector<std::string> names{"a", "b", "c", "d"};
  std::size_t rounds = 0;
  for (auto kind : {ClassifierKind::gb, ClassifierKind::xgb}) {
    const auto m = fit_classifier(kind, x, y, names, {}, 1);
    for (std::size_t i = 1; i < m.training_loss.size(); ++i) {
      require(m.training_loss[i] <= m.training_loss[i - 1],
              fmt::format("{} loss rose at round {}", to_string(kind), i));
    }
    rounds += m.trees.size();
  }
  return fmt::format("{} boosting rounds, loss nonincreasing", rounds);
}

std::string check_folds() {
  Rng gen(3);
  std::size_t trials = 0;
  for (int t = 0; t < 60; ++t) {
    const std::size_t n = 20 + gen.below(150);
    std::vector<int> labels(n);
    for (auto& l : labels) l = gen.uniform() < 0.3 ? 0 : 1;
    labels[0] = 0;
    labels[1] = 1;
    const auto ones = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
    const std::size_t smallest = std::min(ones, n - ones);
    if (smallest < 2) continue;
    const std::size_t k = 2 + gen.below(std::min<std::size_t>(8, smallest - 1));
    const auto folds = stratified_folds(labels, k, gen.next());
    std::vector<std::array<std::size_t, 2>> counts(k, {0, 0});
    for (std::size_t i = 0; i < n; ++i) {
      require(folds[i] < k, "fold id out of range");
      ++counts[folds[i]][static_cast<std::size_t>(labels[i])];
    }
    for (std::size_t c = 0; c < 2; ++c) {
      std::size_t lo = n, hi = 0;
      for (const auto& f : counts) {
        lo = std::min(lo, f[c]);
        hi = std::max(hi, f[c]);
      }
      require(hi - lo <= 1, fmt::format("class {} spread {} across folds", c, hi - lo));
    }
    ++trials;
  }
  return fmt::format("{} random labelings: disjoint, exhaustive, stratified within 1", trials);
}

std::string check_determinism(const VerifyOptions& options) {
  fs::remove_all(options.scratch);
  fs::create_directories(options.scratch);
  fs::path input;
  if (options.input) {
    input = *options.input;
  } else {
    input = options.scratch / "fixture.csv";
    std::ofstream(input) << voice_fixture_csv(8, 6, 5);
  }
  KeyValues kv{{"input", input.string()}, {"epochs", "2"},       {"batch_size", "20"},
               {"pac", "5"},              {"embedding_dim", "8"}, {"hidden", "16"},
               {"n_trees", "5"},          {"rfe_trees", "5"},     {"k_max", "3"},
               {"max_d", "3"},            {"attribution", "shapley"}, {"n_permutations", "5"},
               {"seed", "17"}};
  std::vector<nlohmann::json> manifests;
  for (const char* run : {"a", "b"}) {
    kv["output"] = (options.scratch / run).string();
    const auto outcome = run_pipeline(make_run_config(kv, {}, nullptr));
    require(outcome.exit_code == 0, fmt::format("run {} failed: {}", run, outcome.message));
    auto m = outcome.manifest;
    m.started.clear();
    m.finished.clear();
    manifests.push_back(m.to_json());
  }
  fs::remove_all(options.scratch);
  require(manifests[0] == manifests[1], "manifests of two identical runs differ");
  return fmt::format("{} files with identical digests across two runs", manifests[0].at("files").size());
}

}  // namespace

std::string voice_fixture_csv(std::size_t subjects, std::size_t recordings, std::uint64_t seed) {
  Rng rng(seed);
  const auto& aliases = uci_header_aliases();
  std::vector<std::string> features;
  for (const auto& [uci, canonical] : aliases) {
    if (uci != "name" && uci != "status") features.push_back(uci);
  }
  std::string out = "name";
  for (const auto& f : features) out += "," + f;
  out += ",status\n";
  for (std::size_t s = 0; s < subjects; ++s) {
    const int status = static_cast<int>(s % 2);
    for (std::size_t r = 0; r < recordings; ++r) {
      out += fmt::format("phon_R01_S{:02}_{}", s + 1, r + 1);
      for (std::size_t f = 0; f < features.size(); ++f) {
        const double shift = status == 1 && f % 3 == 0 ? 0.6 : 0.0;
        out += fmt::format(",{:.6f}", std::exp(shift + 0.3 * rng.normal()));
      }
      out += fmt::format(",{}\n", status);
    }
  }
  return out;
}

std::vector<CheckResult> run_invariant_suite(const VerifyOptions& options) {
  return {timed("transforms.round_trip", check_round_trip),
          timed("em.monotone", check_em),
          timed("nn.gradient_check", check_gradients),
          timed("gp.analytic", check_gp),
          timed("quality.hand_cases", check_quality),
          timed("shapley.brute_force", check_shapley_exact),
          timed("shapley.residual", check_shapley_residual),
          timed("boosting.loss_monotone", check_boosting),
          timed("folds.stratified", check_folds),
          timed("manifest.determinism", [&] { return check_determinism(options); })};
}

std::vector<CheckResult> verify_run_directory(const fs::path& dir) {
  std::vector<CheckResult> out;
  RunManifest m;
  out.push_back(timed("manifest.readable", [&] {
    const auto text = read_file(dir / "manifest.json");
    require(!text.empty(), "manifest.json missing or empty");
    m = RunManifest::from_json(nlohmann::json::parse(text));
    return fmt::format("{} files listed", m.files.size());
  }));
  if (!out.back().passed) return out;
  out.push_back(timed("manifest.status", [&] {
    require(m.status == "complete", fmt::format("run status '{}' (stage {})", m.status, m.failed_stage));
    return std::string("complete");
  }));
  out.push_back(timed("manifest.digests", [&] {
    for (const auto& f : m.files) {
      const auto bytes = read_file(dir / f.path);
      require(fs::exists(dir / f.path), fmt::format("{} is missing", f.path));
      require(bytes.size() == f.bytes && sha256_hex(bytes) == f.sha256,
              fmt::format("{} does not match its digest", f.path));
    }
    return fmt::format("{} digests match", m.files.size());
  }));
  out.push_back(timed("manifest.no_orphans", [&] {
    std::set<std::string> listed;
    for (const auto& f : m.files) listed.insert(f.path);
    for (const auto& e : fs::directory_iterator(dir)) {
      const auto name = e.path().filename().string();
      require(name == "manifest.json" || listed.count(name) == 1, fmt::format("{} is not in the manifest", name));
    }
    return std::string("every file is listed");
  }));
  return out;
}

}  // namespace voxsynth
