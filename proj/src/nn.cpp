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

#include "voxsynth/nn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "binary_io.hpp"
#include "voxsynth/error.hpp"

namespace voxsynth {

namespace {

using Index = Eigen::Index;

void apply_softmax_blocks(Matrix& m, const std::vector<Block>& blocks) {
  for (const auto& b : blocks) {
    auto block = m.middleCols(static_cast<Index>(b.offset), static_cast<Index>(b.width));
    for (Index r = 0; r < block.rows(); ++r) {
      const double mx = block.row(r).maxCoeff();
      block.row(r) = (block.row(r).array() - mx).exp().matrix();
      block.row(r) /= block.row(r).sum();
    }
  }
}

Matrix activate(const Matrix& pre, const Layer& layer) {
  switch (layer.activation) {
    case Activation::relu:
      return pre.cwiseMax(0.0);
    case Activation::leaky_relu:
      return pre.unaryExpr([](double v) { return v > 0.0 ? v : kLeakySlope * v; });
    case Activation::tanh:
      return pre.array().tanh().matrix();
    case Activation::linear:
      return pre;
    case Activation::softmax_block: {
      Matrix out = pre;
      apply_softmax_blocks(out, layer.softmax_blocks);
      return out;
    }
  }
  return pre;
}

// d out / d pre applied to an upstream gradient.
Matrix activation_backward(const Matrix& pre, const Matrix& out, const Matrix& grad,
                           const Layer& layer) {
  switch (layer.activation) {
    case Activation::relu:
      return grad.cwiseProduct(pre.unaryExpr([](double v) { return v > 0.0 ? 1.0 : 0.0; }));
    case Activation::leaky_relu:
      return grad.cwiseProduct(
          pre.unaryExpr([](double v) { return v > 0.0 ? 1.0 : kLeakySlope; }));
    case Activation::tanh:
      return grad.cwiseProduct((1.0 - out.array().square()).matrix());
    case Activation::linear:
      return grad;
    case Activation::softmax_block: {
      Matrix d = grad;
      for (const auto& b : layer.softmax_blocks) {
        const auto o = static_cast<Index>(b.offset);
        const auto w = static_cast<Index>(b.width);
        for (Index r = 0; r < grad.rows(); ++r) {
          const RowVector s = out.row(r).segment(o, w);
          const RowVector g = grad.row(r).segment(o, w);
          const double dot = s.dot(g);
          d.row(r).segment(o, w) = s.cwiseProduct((g.array() - dot).matrix());
        }
      }
      return d;
    }
  }
  return grad;
}

bool is_piecewise_linear(Activation a) {
  return a == Activation::relu || a == Activation::leaky_relu || a == Activation::linear;
}

Matrix activation_slope(const Matrix& pre, Activation a) {
  switch (a) {
    case Activation::relu:
      return pre.unaryExpr([](double v) { return v > 0.0 ? 1.0 : 0.0; });
    case Activation::leaky_relu:
      return pre.unaryExpr([](double v) { return v > 0.0 ? 1.0 : kLeakySlope; });
    default:
      return Matrix::Ones(pre.rows(), pre.cols());
  }
}

struct BackwardDetail {
  Gradients grads;
  std::vector<Matrix> pre_grad;  // d loss / d pre-activation, per layer
};

BackwardDetail backward_detail(const Mlp& net, const ForwardPass& pass,
                               const Matrix& output_grad) {
  if (output_grad.rows() != pass.output.rows() || output_grad.cols() != pass.output.cols()) {
    throw ShapeError("output gradient shape does not match the forward output");
  }
  BackwardDetail d;
  const std::size_t n = net.layers.size();
  d.grads.weight.resize(n);
  d.grads.bias.resize(n);
  d.pre_grad.resize(n);
  Matrix upstream = output_grad;
  for (std::size_t l = n; l-- > 0;) {
    const auto& layer = net.layers[l];
    const Matrix& out = (l + 1 < n) ? pass.inputs[l + 1] : pass.output;
    Matrix da = activation_backward(pass.pre[l], out, upstream, layer);
    d.grads.weight[l] = pass.inputs[l].transpose() * da;
    d.grads.bias[l] = da.colwise().sum();
    upstream = da * layer.weight.transpose();
    d.pre_grad[l] = std::move(da);
  }
  d.grads.input = std::move(upstream);
  return d;
}

}  // namespace

// ---------------------------------------------------------------- Mlp

Mlp Mlp::create(const std::vector<std::size_t>& dims, Activation hidden, Activation output,
                Rng& rng) {
  if (dims.size() < 2) throw ShapeError("a network needs at least input and output dims");
  Mlp net;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const auto in = dims[l], out = dims[l + 1];
    if (in == 0 || out == 0) throw ShapeError("layer dimensions must be positive");
    Layer layer;
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    layer.weight.resize(static_cast<Index>(in), static_cast<Index>(out));
    for (Index i = 0; i < layer.weight.rows(); ++i) {
      for (Index j = 0; j < layer.weight.cols(); ++j) {
        layer.weight(i, j) = rng.uniform(-limit, limit);
      }
    }
    layer.bias = RowVector::Zero(static_cast<Index>(out));
    layer.activation = (l + 2 == dims.size()) ? output : hidden;
    net.layers.push_back(std::move(layer));
  }
  return net;
}

std::size_t Mlp::input_dim() const {
  return layers.empty() ? 0 : static_cast<std::size_t>(layers.front().weight.rows());
}

std::size_t Mlp::output_dim() const {
  return layers.empty() ? 0 : static_cast<std::size_t>(layers.back().weight.cols());
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
  return n;
}

bool Mlp::all_finite() const {
  return std::all_of(layers.begin(), layers.end(), [](const Layer& l) {
    return l.weight.allFinite() && l.bias.allFinite();
  });
}

ForwardPass forward(const Mlp& net, const Matrix& batch) {
  if (static_cast<std::size_t>(batch.cols()) != net.input_dim()) {
    throw ShapeError(fmt::format("batch width {} does not match network input {}",
                                 batch.cols(), net.input_dim()));
  }
  ForwardPass pass;
  pass.inputs.reserve(net.layers.size());
  pass.pre.reserve(net.layers.size());
  Matrix current = batch;
  for (const auto& layer : net.layers) {
    Matrix pre = current * layer.weight;
    pre.rowwise() += layer.bias;
    Matrix out = activate(pre, layer);
    pass.inputs.push_back(std::move(current));
    pass.pre.push_back(std::move(pre));
    current = std::move(out);
  }
  pass.output = std::move(current);
  return pass;
}

Matrix predict(const Mlp& net, const Matrix& batch) {
  if (static_cast<std::size_t>(batch.cols()) != net.input_dim()) {
    throw ShapeError(fmt::format("batch width {} does not match network input {}",
                                 batch.cols(), net.input_dim()));
  }
  Matrix current = batch;
  for (const auto& layer : net.layers) {
    Matrix pre = current * layer.weight;
    pre.rowwise() += layer.bias;
    current = activate(pre, layer);
  }
  return current;
}

// ---------------------------------------------------------------- gradients

Gradients Gradients::zeros_like(const Mlp& net) {
  Gradients g;
  for (const auto& l : net.layers) {
    g.weight.push_back(Matrix::Zero(l.weight.rows(), l.weight.cols()));
    g.bias.push_back(RowVector::Zero(l.bias.size()));
  }
  return g;
}

Gradients& Gradients::operator+=(const Gradients& other) {
  if (weight.empty()) {
    weight = other.weight;
    bias = other.bias;
    return *this;
  }
  for (std::size_t l = 0; l < weight.size(); ++l) {
    weight[l] += other.weight[l];
    bias[l] += other.bias[l];
  }
  return *this;
}

Gradients& Gradients::operator*=(double factor) {
  for (auto& w : weight) w *= factor;
  for (auto& b : bias) b *= factor;
  if (input.size() > 0) input *= factor;
  return *this;
}

double Gradients::norm() const {
  double ss = 0.0;
  for (const auto& w : weight) ss += w.squaredNorm();
  for (const auto& b : bias) ss += b.squaredNorm();
  return std::sqrt(ss);
}

bool Gradients::finite() const {
  for (const auto& w : weight) {
    if (!w.allFinite()) return false;
  }
  for (const auto& b : bias) {
    if (!b.allFinite()) return false;
  }
  return true;
}

Gradients backward(const Mlp& net, const ForwardPass& pass, const Matrix& output_grad) {
  return backward_detail(net, pass, output_grad).grads;
}

// ---------------------------------------------------------------- Adam

AdamState AdamState::for_net(const Mlp& net, AdamConfig config) {
  AdamState s;
  s.config = config;
  for (const auto& l : net.layers) {
    s.m_weight.push_back(Matrix::Zero(l.weight.rows(), l.weight.cols()));
    s.v_weight.push_back(Matrix::Zero(l.weight.rows(), l.weight.cols()));
    s.m_bias.push_back(RowVector::Zero(l.bias.size()));
    s.v_bias.push_back(RowVector::Zero(l.bias.size()));
  }
  return s;
}

void adam_step(Mlp& net, const Gradients& grads, AdamState& state,
               std::optional<double> clip_norm) {
  if (grads.weight.size() != net.layers.size()) {
    throw ShapeError("gradient layer count does not match the network");
  }
  if (!grads.finite()) {
    throw NumericalDivergence(
        fmt::format("non-finite gradient at optimizer step {}", state.step + 1));
  }
  double scale = 1.0;
  if (clip_norm) {
    const double norm = grads.norm();
    if (norm > *clip_norm && norm > 0.0) scale = *clip_norm / norm;
  }
  ++state.step;
  const auto& c = state.config;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(c.beta1, t);
  const double bc2 = 1.0 - std::pow(c.beta2, t);
  auto update = [&](auto& param, const auto& grad, auto& m, auto& v) {
    const auto g = (grad * scale).eval();
    m = c.beta1 * m + (1.0 - c.beta1) * g;
    v = c.beta2 * v + (1.0 - c.beta2) * g.cwiseProduct(g);
    param.array() -= c.learning_rate * (m.array() / bc1) /
                     ((v.array() / bc2).sqrt() + c.epsilon);
  };
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    update(net.layers[l].weight, grads.weight[l], state.m_weight[l], state.v_weight[l]);
    update(net.layers[l].bias, grads.bias[l], state.m_bias[l], state.v_bias[l]);
  }
  if (!net.all_finite()) {
    throw NumericalDivergence(
        fmt::format("non-finite parameter after optimizer step {}", state.step));
  }
}

Gradients backward_step(Mlp& net, const ForwardPass& pass, const Matrix& loss_grad,
                        AdamState& state, std::optional<double> clip_norm) {
  Gradients g = backward(net, pass, loss_grad);
  adam_step(net, g, state, clip_norm);
  return g;
}

// ---------------------------------------------------------------- softmax

RowVector softmax(const RowVector& logits) {
  const double mx = logits.maxCoeff();
  RowVector e = (logits.array() - mx).exp().matrix();
  return e / e.sum();
}

RowVector gumbel_softmax(const RowVector& logits, double tau, const RowVector& noise,
                         bool hard) {
  if (!(tau > 0.0)) throw ConfigError("gumbel-softmax temperature must be positive");
  RowVector soft = softmax((logits + noise) / tau);
  if (!hard) return soft;
  Index best = 0;
  soft.maxCoeff(&best);
  RowVector one_hot = RowVector::Zero(soft.size());
  one_hot(best) = 1.0;
  return one_hot;
}

RowVector gumbel_softmax(const RowVector& logits, double tau, Rng& rng, bool hard) {
  RowVector noise(logits.size());
  for (Index i = 0; i < noise.size(); ++i) noise(i) = rng.gumbel();
  return gumbel_softmax(logits, tau, noise, hard);
}

// ---------------------------------------------------------------- penalty

Matrix input_gradient(const Mlp& critic, const Matrix& batch) {
  if (critic.output_dim() != 1) throw ShapeError("input_gradient needs a scalar critic");
  const auto pass = forward(critic, batch);
  return backward(critic, pass, Matrix::Ones(batch.rows(), 1)).input;
}

PenaltyResult gradient_penalty_at(const Mlp& critic, const Matrix& points) {
  if (critic.output_dim() != 1) throw ShapeError("gradient penalty needs a scalar critic");
  for (const auto& l : critic.layers) {
    if (!is_piecewise_linear(l.activation)) {
      throw ConfigError("gradient penalty supports relu, leaky_relu and linear critics");
    }
  }
  const Index b = points.rows();
  if (b == 0) throw ShapeError("gradient penalty on an empty batch");
  const auto pass = forward(critic, points);
  const auto detail = backward_detail(critic, pass, Matrix::Ones(b, 1));
  const Matrix& g = detail.grads.input;

  PenaltyResult result;
  Matrix v(g.rows(), g.cols());
  double total = 0.0;
  for (Index i = 0; i < b; ++i) {
    const double norm = g.row(i).norm();
    total += (norm - 1.0) * (norm - 1.0);
    const double coeff = norm > 0.0 ? 2.0 * (norm - 1.0) / (static_cast<double>(b) * norm) : 0.0;
    v.row(i) = coeff * g.row(i);
  }
  result.value = total / static_cast<double>(b);

  // v . grad_x f is the directional derivative of f along v; with the
  // activation slopes frozen it is linear in each weight matrix, so
  // d/dW_l = tangent_l^T * (d f / d pre_l).
  result.grads = Gradients::zeros_like(critic);
  Matrix tangent = v;
  for (std::size_t l = 0; l < critic.layers.size(); ++l) {
    const auto& layer = critic.layers[l];
    result.grads.weight[l] = tangent.transpose() * detail.pre_grad[l];
    tangent = (tangent * layer.weight).cwiseProduct(activation_slope(pass.pre[l], layer.activation));
  }
  return result;
}

PenaltyResult gradient_penalty_with_grad(const Mlp& critic, const Matrix& real,
                                         const Matrix& fake, Rng& rng) {
  if (real.rows() != fake.rows() || real.cols() != fake.cols()) {
    throw ShapeError("real and fake batches differ in shape");
  }
  Matrix points(real.rows(), real.cols());
  for (Index i = 0; i < real.rows(); ++i) {
    const double u = rng.uniform();
    points.row(i) = u * real.row(i) + (1.0 - u) * fake.row(i);
  }
  return gradient_penalty_at(critic, points);
}

double gradient_penalty(const Mlp& critic, const Matrix& real, const Matrix& fake,
                        std::uint64_t seed) {
  Rng rng(seed);
  return gradient_penalty_with_grad(critic, real, fake, rng).value;
}

// ---------------------------------------------------------------- grad check

std::vector<std::uint8_t> activation_regions(const Mlp& net, const Matrix& batch) {
  const auto pass = forward(net, batch);
  std::vector<std::uint8_t> out;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const auto a = net.layers[l].activation;
    if (a != Activation::relu && a != Activation::leaky_relu) continue;
    const auto& pre = pass.pre[l];
    for (Index i = 0; i < pre.size(); ++i) out.push_back(pre.data()[i] > 0.0 ? 1 : 0);
  }
  return out;
}

GradCheckResult grad_check(const Mlp& net, const Gradients& analytic, const GradProbe& probe,
                           double eps, std::uint64_t seed, std::size_t min_params) {
  struct Slot {
    std::size_t layer;
    bool is_bias;
    Index index;
  };
  std::vector<Slot> slots;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    for (Index i = 0; i < net.layers[l].weight.size(); ++i) slots.push_back({l, false, i});
    for (Index i = 0; i < net.layers[l].bias.size(); ++i) slots.push_back({l, true, i});
  }
  Rng rng(seed);
  rng.shuffle(slots);
  GradCheckResult result;
  Mlp probe_net = net;
  const auto base_regions = probe.regions ? probe.regions(net) : std::vector<std::uint8_t>{};
  for (const auto& slot : slots) {
    if (result.checked >= min_params) break;
    auto& layer = probe_net.layers[slot.layer];
    double& param = slot.is_bias ? layer.bias.data()[slot.index] : layer.weight.data()[slot.index];
    const double original = param;
    param = original + eps;
    const double plus = probe.loss(probe_net);
    const bool plus_same = !probe.regions || probe.regions(probe_net) == base_regions;
    param = original - eps;
    const double minus = probe.loss(probe_net);
    const bool minus_same = !probe.regions || probe.regions(probe_net) == base_regions;
    param = original;
    if (!plus_same || !minus_same) {
      ++result.skipped;
      continue;
    }
    const double numeric = (plus - minus) / (2.0 * eps);
    const double exact = slot.is_bias ? analytic.bias[slot.layer].data()[slot.index]
                                      : analytic.weight[slot.layer].data()[slot.index];
    const double rel = std::abs(exact - numeric) /
                       std::max(std::abs(exact) + std::abs(numeric), 1e-6);
    result.max_relative_error = std::max(result.max_relative_error, rel);
    ++result.checked;
  }
  return result;
}

GradCheckResult grad_check(const Mlp& net, const Matrix& batch, const OutputLoss& loss,
                           double eps, std::uint64_t seed, std::size_t min_params) {
  const auto pass = forward(net, batch);
  const auto grads = backward(net, pass, loss.gradient(pass.output));
  GradProbe probe;
  probe.loss = [&](const Mlp& n) { return loss.value(predict(n, batch)); };
  probe.regions = [&](const Mlp& n) { return activation_regions(n, batch); };
  return grad_check(net, grads, probe, eps, seed, min_params);
}

// ---------------------------------------------------------------- blobs

namespace {
constexpr std::string_view kNetMagic = "VXNN1";
constexpr std::uint32_t kNetVersion = 1;
}  // namespace

std::string serialize_weights(const Mlp& net) {
  std::string out(kNetMagic);
  detail::put<std::uint32_t>(out, kNetVersion);
  detail::put<std::uint64_t>(out, net.layers.size());
  for (const auto& l : net.layers) {
    detail::put<std::uint64_t>(out, static_cast<std::uint64_t>(l.weight.rows()));
    detail::put<std::uint64_t>(out, static_cast<std::uint64_t>(l.weight.cols()));
    detail::put<std::uint8_t>(out, static_cast<std::uint8_t>(l.activation));
    detail::put<std::uint64_t>(out, l.softmax_blocks.size());
    for (const auto& b : l.softmax_blocks) {
      detail::put<std::uint64_t>(out, b.offset);
      detail::put<std::uint64_t>(out, b.width);
    }
    for (Index i = 0; i < l.weight.rows(); ++i) {
      for (Index j = 0; j < l.weight.cols(); ++j) detail::put<double>(out, l.weight(i, j));
    }
    for (Index j = 0; j < l.bias.size(); ++j) detail::put<double>(out, l.bias(j));
  }
  return out;
}

Mlp deserialize_weights(std::string_view bytes, std::size_t& offset) {
  detail::Reader in(bytes, offset);
  if (in.take(kNetMagic.size()) != kNetMagic) throw ModelFormatError("bad network magic");
  if (in.get<std::uint32_t>() != kNetVersion) throw ModelFormatError("unsupported network version");
  const auto n = in.get<std::uint64_t>();
  if (n > 1024) throw ModelFormatError("implausible layer count");
  Mlp net;
  for (std::uint64_t l = 0; l < n; ++l) {
    Layer layer;
    const auto rows = in.get<std::uint64_t>();
    const auto cols = in.get<std::uint64_t>();
    const auto act = in.get<std::uint8_t>();
    if (act > static_cast<std::uint8_t>(Activation::softmax_block)) {
      throw ModelFormatError("unknown activation tag");
    }
    layer.activation = static_cast<Activation>(act);
    const auto blocks = in.get<std::uint64_t>();
    if (blocks > cols) throw ModelFormatError("implausible softmax block count");
    for (std::uint64_t b = 0; b < blocks; ++b) {
      Block blk;
      blk.offset = in.get<std::uint64_t>();
      blk.width = in.get<std::uint64_t>();
      if (blk.width == 0 || blk.offset + blk.width > cols) {
        throw ModelFormatError("softmax block out of range");
      }
      layer.softmax_blocks.push_back(blk);
    }
    if (rows == 0 || cols == 0 || rows * cols > in.remaining() / sizeof(double)) {
      throw ModelFormatError("layer shape exceeds the available data");
    }
    if (l > 0 && static_cast<Index>(rows) != net.layers.back().weight.cols()) {
      throw ModelFormatError("layer dimensions do not chain");
    }
    layer.weight.resize(static_cast<Index>(rows), static_cast<Index>(cols));
    for (Index i = 0; i < layer.weight.rows(); ++i) {
      for (Index j = 0; j < layer.weight.cols(); ++j) layer.weight(i, j) = in.get<double>();
    }
    layer.bias.resize(static_cast<Index>(cols));
    for (Index j = 0; j < layer.bias.size(); ++j) layer.bias(j) = in.get<double>();
    net.layers.push_back(std::move(layer));
  }
  offset = in.offset();
  return net;
}

Mlp deserialize_weights(std::string_view bytes) {
  std::size_t offset = 0;
  return deserialize_weights(bytes, offset);
}

}  // namespace voxsynth
