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

// Reversible column encodings used by the generators.
//
// Continuous columns use mode-specific normalization: a Gaussian mixture is
// fitted by EM (k-means++ seeding, at most `max_modes` components, components
// below weight 0.005 pruned) and each value is encoded as
//
//   alpha = (value - mean[m]) / (4 * std[m]),   clipped to [-1, 1]
//
// together with a one-hot indicator of the mode m, which is sampled from the
// posterior responsibilities of the value. Discrete columns are one-hot.
//
// CopulaModel is the marginal Gaussian-copula map: an empirical CDF with
// midpoint plotting positions F(x_(i)) = (i - 0.5) / n, linear interpolation
// between order statistics, and probabilities clipped to [1/(2n), 1 - 1/(2n)].

#ifndef VOXSYNTH_TRANSFORMS_HPP_
#define VOXSYNTH_TRANSFORMS_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "json.hpp"
#include "voxsynth/rng.hpp"
#include "voxsynth/table.hpp"

namespace voxsynth {

inline constexpr double kStdFloor = 1e-6;

struct VgmOptions {
  std::size_t max_modes = 10;
  double prune_below = 0.005;
  std::size_t max_iterations = 100;
  double tolerance = 1e-6;
};

struct VgmModel {
  // Sorted by mean ascending; weights sum to one.
  std::vector<double> weights;
  std::vector<double> means;
  std::vector<double> stds;

  std::size_t modes() const noexcept { return means.size(); }
};

struct VgmFit {
  VgmModel model;
  // Total log-likelihood after each EM iteration (before pruning).
  std::vector<double> log_likelihood;
};

VgmFit fit_vgm_traced(std::span<const double> column, const VgmOptions& options,
                      std::uint64_t seed);
VgmModel fit_vgm(std::span<const double> column, const VgmOptions& options,
                 std::uint64_t seed);

// Posterior responsibilities of each mode for `value`.
std::vector<double> vgm_responsibilities(const VgmModel& model, double value);

struct VgmCode {
  double alpha = 0.0;
  std::size_t mode = 0;
};

// Samples the mode from the responsibilities restricted to modes whose
// +-4 std window covers the value (all modes when none does).
VgmCode vgm_encode(const VgmModel& model, double value, Rng& rng);
VgmCode vgm_encode(const VgmModel& model, double value, std::uint64_t seed);
// mean[mode] + 4 * std[mode] * alpha. Throws IndexError for a bad mode.
double vgm_decode(const VgmModel& model, double alpha, std::size_t mode);

// Standard normal CDF and its inverse (Acklam's rational approximation,
// |relative error| < 1.15e-9, refined by one Halley step against erfc).
double normal_cdf(double z);
double normal_quantile(double p);

enum class CopulaDirection { to_gaussian, from_gaussian };

class CopulaModel {
 public:
  CopulaModel() = default;
  static CopulaModel fit(std::span<const double> column);
  // Identity map: used to show the copula layer is the only difference
  // between the CopulaGAN and CTGAN code paths.
  static CopulaModel identity();

  double cdf(double value) const;
  double inverse_cdf(double probability) const;
  double map(double value, CopulaDirection direction) const;

  bool is_identity() const noexcept { return identity_; }
  double epsilon() const noexcept { return epsilon_; }
  std::size_t sample_size() const noexcept { return n_; }
  const std::vector<double>& knots() const noexcept { return knots_; }
  const std::vector<double>& probabilities() const noexcept { return probs_; }

  nlohmann::json to_json() const;
  static CopulaModel from_json(const nlohmann::json& j);

 private:
  bool identity_ = false;
  std::size_t n_ = 0;
  double epsilon_ = 0.0;
  // Unique sorted values and their plotting positions (tied values share the
  // mean position of the run).
  std::vector<double> knots_;
  std::vector<double> probs_;
};

double copula_map(const CopulaModel& model, double value, CopulaDirection direction);

// Per-column copula transforms for the continuous feature columns of a table.
class CopulaLayer {
 public:
  static CopulaLayer fit(const Table& table, bool identity = false);
  Table apply(const Table& table, CopulaDirection direction) const;

  nlohmann::json to_json() const;
  static CopulaLayer from_json(const nlohmann::json& j);

  const std::vector<std::pair<std::string, CopulaModel>>& columns() const {
    return columns_;
  }

 private:
  std::vector<std::pair<std::string, CopulaModel>> columns_;
};

// Layout of one column inside an encoded row.
struct ColumnSpan {
  std::size_t column = 0;  // schema index
  ColumnKind kind = ColumnKind::continuous;
  std::size_t offset = 0;  // first encoded index
  std::size_t width = 0;   // continuous: 1 + modes; discrete: categories
  // Continuous: index of the alpha scalar is `offset`, mode block starts at
  // offset + 1. Discrete: one-hot block starts at offset.
  std::size_t block_offset() const {
    return kind == ColumnKind::continuous ? offset + 1 : offset;
  }
  std::size_t block_width() const {
    return kind == ColumnKind::continuous ? width - 1 : width;
  }
};

struct CodecOptions {
  VgmOptions vgm;
};

// Encodes every non-group column of a table.
class TableCodec {
 public:
  TableCodec() = default;
  static TableCodec fit(const Table& table, const CodecOptions& options,
                        std::uint64_t seed);

  std::size_t width() const noexcept { return width_; }
  const Schema& schema() const noexcept { return schema_; }
  const std::vector<ColumnSpan>& spans() const noexcept { return spans_; }
  const VgmModel& vgm(std::size_t span_index) const { return vgms_.at(span_index); }

  Matrix encode(const Table& table, std::uint64_t seed) const;
  // Continuous: alpha clipped to [-1, 1], mode = argmax of the mode block.
  // Discrete: argmax of the block.
  Table decode(const Matrix& encoded) const;

  nlohmann::json to_json() const;
  static TableCodec from_json(const nlohmann::json& j);

 private:
  Schema schema_;  // without group column
  std::vector<ColumnSpan> spans_;
  std::vector<VgmModel> vgms_;  // one per span; empty for discrete spans
  std::size_t width_ = 0;
};

enum class TransformDirection { encode, decode };

Matrix encode_table(const TableCodec& codec, const Table& table, std::uint64_t seed);
Table decode_table(const TableCodec& codec, const Matrix& encoded);

nlohmann::json to_json(const Schema& schema);
Schema schema_from_json(const nlohmann::json& j);

}  // namespace voxsynth

#endif  // VOXSYNTH_TRANSFORMS_HPP_
