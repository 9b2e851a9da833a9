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

// Small dense networks for the tabular generators.
//
// Batches are row-major in the mathematical sense: one sample per matrix
// row. A layer computes act(X * W + b) with W of shape (in, out).
//
// Weight blobs start with the 5-byte magic "VXNN1", followed by
//   u32 version (1), u64 layer count, then per layer:
//   u64 in, u64 out, u8 activation, u64 block count, (u64 offset, u64 width)
//   per softmax block, in*out f64 weights (row-major), out f64 biases.
// Integers and floats are little-endian.

#ifndef VOXSYNTH_NN_HPP_
#define VOXSYNTH_NN_HPP_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "voxsynth/rng.hpp"
#include "voxsynth/table.hpp"

namespace voxsynth {

using RowVector = Eigen::RowVectorXd;

enum class Activation : std::uint8_t {
  relu = 0,
  leaky_relu = 1,  // slope 0.2
  tanh = 2,
  linear = 3,
  softmax_block = 4,  // softmax within each listed block, identity elsewhere
};

inline constexpr double kLeakySlope = 0.2;

struct Block {
  std::size_t offset = 0;
  std::size_t width = 0;
};

struct Layer {
  Matrix weight;  // (in, out)
  RowVector bias;
  Activation activation = Activation::linear;
  std::vector<Block> softmax_blocks;
};

struct Mlp {
  std::vector<Layer> layers;

  // dims = {input, hidden..., output}. Glorot-uniform weights, zero biases.
  static Mlp create(const std::vector<std::size_t>& dims, Activation hidden,
                    Activation output, Rng& rng);

  std::size_t input_dim() const;
  std::size_t output_dim() const;
  std::size_t parameter_count() const;
  bool all_finite() const;
};

struct ForwardPass {
  std::vector<Matrix> inputs;  // input of each layer
  std::vector<Matrix> pre;     // pre-activation of each layer
  Matrix output;
};

// Throws ShapeError when the batch width differs from the input dimension.
ForwardPass forward(const Mlp& net, const Matrix& batch);
Matrix predict(const Mlp& net, const Matrix& batch);

struct Gradients {
  std::vector<Matrix> weight;
  std::vector<RowVector> bias;
  Matrix input;  // d loss / d batch

  static Gradients zeros_like(const Mlp& net);
  Gradients& operator+=(const Gradients& other);
  Gradients& operator*=(double factor);
  double norm() const;  // global L2 norm over parameters
  bool finite() const;
};

Gradients backward(const Mlp& net, const ForwardPass& pass, const Matrix& output_grad);

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static AdamConfig gan() { return {2e-4, 0.5, 0.9, 1e-8}; }
  static AdamConfig vae() { return {1e-3, 0.9, 0.999, 1e-8}; }
};

struct AdamState {
  AdamConfig config;
  std::vector<Matrix> m_weight, v_weight;
  std::vector<RowVector> m_bias, v_bias;
  std::uint64_t step = 0;

  static AdamState for_net(const Mlp& net, AdamConfig config);
};

// Applies one Adam update. When clip_norm is set the global gradient norm is
// scaled down to it first. Throws NumericalDivergence on non-finite gradients
// or parameters.
void adam_step(Mlp& net, const Gradients& grads, AdamState& state,
               std::optional<double> clip_norm = std::nullopt);

// backward + adam_step; returns the gradients that were applied (pre-clip).
Gradients backward_step(Mlp& net, const ForwardPass& pass, const Matrix& loss_grad,
                        AdamState& state, std::optional<double> clip_norm = std::nullopt);

// softmax((logits + noise) / tau). With hard set, the result is the one-hot
// of the argmax; the straight-through convention treats its gradient as that
// of the soft sample.
RowVector gumbel_softmax(const RowVector& logits, double tau, const RowVector& noise,
                         bool hard = false);
RowVector gumbel_softmax(const RowVector& logits, double tau, Rng& rng, bool hard = false);
RowVector softmax(const RowVector& logits);

// d critic / d input for a scalar-output network, one row per sample.
Matrix input_gradient(const Mlp& critic, const Matrix& batch);

struct PenaltyResult {
  double value = 0.0;
  Gradients grads;  // d value / d critic parameters
};

// mean_i (||grad_x critic(x_i)||_2 - 1)^2 at the given points. Parameter
// gradients are exact for critics built from relu, leaky_relu and linear
// layers (second derivatives vanish almost everywhere).
PenaltyResult gradient_penalty_at(const Mlp& critic, const Matrix& points);

// Penalty at x = u * real + (1 - u) * fake with u ~ U(0, 1) per row.
double gradient_penalty(const Mlp& critic, const Matrix& real, const Matrix& fake,
                        std::uint64_t seed);
PenaltyResult gradient_penalty_with_grad(const Mlp& critic, const Matrix& real,
                                         const Matrix& fake, Rng& rng);

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t checked = 0;
  std::size_t skipped = 0;
};

struct GradProbe {
  std::function<double(const Mlp&)> loss;
  // Piecewise-linear region signature; a parameter whose +-eps perturbation
  // changes it is skipped (the loss has a kink there).
  std::function<std::vector<std::uint8_t>(const Mlp&)> regions;
};

// Relative error |a - n| / max(|a| + |n|, 1e-6) between analytic and central
// difference gradients over a seeded subsample of at least `min_params`
// parameters (all of them when the net is smaller).
GradCheckResult grad_check(const Mlp& net, const Gradients& analytic,
                           const GradProbe& probe, double eps, std::uint64_t seed,
                           std::size_t min_params = 200);

struct OutputLoss {
  std::function<double(const Matrix&)> value;
  std::function<Matrix(const Matrix&)> gradient;
};

GradCheckResult grad_check(const Mlp& net, const Matrix& batch, const OutputLoss& loss,
                           double eps, std::uint64_t seed, std::size_t min_params = 200);

std::vector<std::uint8_t> activation_regions(const Mlp& net, const Matrix& batch);

std::string serialize_weights(const Mlp& net);
// Parses one blob starting at `offset`; advances it. Throws ModelFormatError.
Mlp deserialize_weights(std::string_view bytes, std::size_t& offset);
Mlp deserialize_weights(std::string_view bytes);

}  // namespace voxsynth

#endif  // VOXSYNTH_NN_HPP_
