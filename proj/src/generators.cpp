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

#include "voxsynth/generators.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>
#include <sstream>

#include <fmt/format.h>

#include "binary_io.hpp"
#include "voxsynth/error.hpp"

namespace voxsynth {

namespace {

using Index = Eigen::Index;

constexpr double kTvaeAlphaWeight = 50.0;  // 1 / (2 * 0.1^2)
constexpr double kTvaeLossFactor = 2.0;

Index idx(std::size_t v) { return static_cast<Index>(v); }

std::vector<std::size_t> dims_of(std::size_t in, const std::vector<std::size_t>& hidden,
                                 std::size_t out) {
  std::vector<std::size_t> dims{in};
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(out);
  return dims;
}

Matrix gaussian_matrix(Index rows, Index cols, Rng& rng) {
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) m(i, j) = rng.normal();
  }
  return m;
}

Matrix gumbel_matrix(Index rows, Index cols, Rng& rng) {
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) m(i, j) = rng.gumbel();
  }
  return m;
}

Matrix hstack(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows(), a.cols() + b.cols());
  out << a, b;
  return out;
}

// Groups `pac` consecutive rows into one wide row.
Matrix pack(const Matrix& rows, std::size_t pac) {
  const Index groups = rows.rows() / idx(pac);
  Matrix out(groups, rows.cols() * idx(pac));
  for (Index g = 0; g < groups; ++g) {
    for (Index k = 0; k < idx(pac); ++k) {
      out.row(g).segment(k * rows.cols(), rows.cols()) = rows.row(g * idx(pac) + k);
    }
  }
  return out;
}

Matrix unpack(const Matrix& packed, std::size_t pac, Index row_width) {
  Matrix out(packed.rows() * idx(pac), row_width);
  for (Index g = 0; g < packed.rows(); ++g) {
    for (Index k = 0; k < idx(pac); ++k) {
      out.row(g * idx(pac) + k) = packed.row(g).segment(k * row_width, row_width);
    }
  }
  return out;
}

void softmax_rows_inplace(Matrix& m, Index offset, Index width) {
  for (Index r = 0; r < m.rows(); ++r) {
    auto seg = m.row(r).segment(offset, width);
    const double mx = seg.maxCoeff();
    seg = (seg.array() - mx).exp().matrix();
    seg /= seg.sum();
  }
}

template <typename F>
auto with_context(const std::string& where, F&& f) {
  try {
    return f();
  } catch (const NumericalDivergence& e) {
    throw NumericalDivergence(where + ": " + e.what());
  }
}

void require_finite(double value, const std::string& where) {
  if (!std::isfinite(value)) throw NumericalDivergence(where + ": non-finite loss");
}

}  // namespace

std::string_view to_string(GeneratorKind kind) {
  switch (kind) {
    case GeneratorKind::tvae:
      return "tvae";
    case GeneratorKind::ctgan:
      return "ctgan";
    case GeneratorKind::copulagan:
      return "copulagan";
  }
  return "tvae";
}

GeneratorKind parse_generator_kind(std::string_view text) {
  if (text == "tvae") return GeneratorKind::tvae;
  if (text == "ctgan") return GeneratorKind::ctgan;
  if (text == "copulagan") return GeneratorKind::copulagan;
  throw ConfigError(fmt::format("unknown generator kind '{}'", text));
}

void GeneratorConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be at least 1");
  if (pac < 1) throw ConfigError("pac must be at least 1");
  if (batch_size < 1 || batch_size % pac != 0) {
    throw ConfigError(fmt::format("batch_size {} must be a positive multiple of pac {}",
                                  batch_size, pac));
  }
  if (embedding_dim < 1 || max_modes < 1) throw ConfigError("dimensions must be positive");
  for (const auto* hidden : {&generator_hidden, &critic_hidden, &encoder_hidden,
                             &decoder_hidden}) {
    for (auto h : *hidden) {
      if (h < 1) throw ConfigError("hidden widths must be positive");
    }
  }
  if (!(gp_weight >= 0.0)) throw ConfigError("gp_weight must be nonnegative");
  if (!(gumbel_tau > 0.0)) throw ConfigError("gumbel_tau must be positive");
  if (condition_retry_cap < 1) throw ConfigError("condition_retry_cap must be positive");
}

nlohmann::json GeneratorConfig::to_json() const {
  return {{"kind", std::string(to_string(kind))},
          {"epochs", epochs},
          {"batch_size", batch_size},
          {"embedding_dim", embedding_dim},
          {"generator_hidden", generator_hidden},
          {"critic_hidden", critic_hidden},
          {"encoder_hidden", encoder_hidden},
          {"decoder_hidden", decoder_hidden},
          {"pac", pac},
          {"gp_weight", gp_weight},
          {"max_modes", max_modes},
          {"gumbel_tau", gumbel_tau},
          {"condition_retry_cap", condition_retry_cap},
          {"identity_copula", identity_copula},
          {"seed", seed}};
}

GeneratorConfig GeneratorConfig::from_json(const nlohmann::json& j) {
  GeneratorConfig c;
  c.kind = parse_generator_kind(j.at("kind").get<std::string>());
  c.epochs = j.at("epochs").get<std::size_t>();
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.embedding_dim = j.at("embedding_dim").get<std::size_t>();
  c.generator_hidden = j.at("generator_hidden").get<std::vector<std::size_t>>();
  c.critic_hidden = j.at("critic_hidden").get<std::vector<std::size_t>>();
  c.encoder_hidden = j.at("encoder_hidden").get<std::vector<std::size_t>>();
  c.decoder_hidden = j.at("decoder_hidden").get<std::vector<std::size_t>>();
  c.pac = j.at("pac").get<std::size_t>();
  c.gp_weight = j.at("gp_weight").get<double>();
  c.max_modes = j.at("max_modes").get<std::size_t>();
  c.gumbel_tau = j.at("gumbel_tau").get<double>();
  c.condition_retry_cap = j.at("condition_retry_cap").get<std::size_t>();
  c.identity_copula = j.at("identity_copula").get<bool>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.validate();
  return c;
}

// ---------------------------------------------------------------- conditions

ConditionSampler::ConditionSampler(const TableCodec& codec, const Table& table) {
  std::size_t offset = 0;
  for (const auto& span : codec.spans()) {
    if (span.kind != ColumnKind::discrete) continue;
    DiscreteColumn dc;
    dc.span = span;
    dc.cond_offset = offset;
    dc.counts.assign(span.width, 0);
    dc.rows.assign(span.width, {});
    const auto col = table.column(span.column);
    for (std::size_t r = 0; r < col.size(); ++r) {
      const auto k = static_cast<std::size_t>(col[r]);
      ++dc.counts[k];
      dc.rows[k].push_back(r);
    }
    offset += span.width;
    columns_.push_back(std::move(dc));
  }
  width_ = offset;
}

std::vector<double> ConditionSampler::log_frequency_weights(std::size_t d) const {
  const auto& counts = columns_.at(d).counts;
  std::vector<double> w(counts.size());
  for (std::size_t k = 0; k < counts.size(); ++k) {
    w[k] = std::log(static_cast<double>(counts[k]) + 1.0);
  }
  return w;
}

ConditionSampler::Draw ConditionSampler::draw_training(Rng& rng) const {
  Draw d;
  d.column = rng.below(columns_.size());
  const auto w = log_frequency_weights(d.column);
  d.category = rng.categorical(w);
  return d;
}

ConditionSampler::Draw ConditionSampler::draw_original(Rng& rng) const {
  Draw d;
  d.column = rng.below(columns_.size());
  const auto& counts = columns_[d.column].counts;
  std::vector<double> w(counts.begin(), counts.end());
  d.category = rng.categorical(w);
  return d;
}

std::size_t ConditionSampler::draw_row(const Draw& draw, Rng& rng) const {
  const auto& rows = columns_.at(draw.column).rows.at(draw.category);
  if (rows.empty()) {
    throw InsufficientData("no training row carries the drawn category");
  }
  return rows[rng.below(rows.size())];
}

std::size_t ConditionSampler::cond_index(const Draw& draw) const {
  return columns_.at(draw.column).cond_offset + draw.category;
}

const ColumnSpan& ConditionSampler::span(const Draw& draw) const {
  return columns_.at(draw.column).span;
}

std::size_t ConditionSampler::schema_column(std::size_t d) const {
  return columns_.at(d).span.column;
}

std::optional<std::size_t> ConditionSampler::discrete_index_of(std::size_t schema_col) const {
  for (std::size_t d = 0; d < columns_.size(); ++d) {
    if (columns_[d].span.column == schema_col) return d;
  }
  return std::nullopt;
}

nlohmann::json ConditionSampler::to_json() const {
  nlohmann::json cols = nlohmann::json::array();
  for (const auto& c : columns_) cols.push_back({{"column", c.span.column}, {"counts", c.counts}});
  return cols;
}

ConditionSampler ConditionSampler::from_json(const nlohmann::json& j, const TableCodec& codec) {
  ConditionSampler s;
  std::size_t offset = 0;
  for (const auto& jc : j) {
    const auto column = jc.at("column").get<std::size_t>();
    auto it = std::find_if(codec.spans().begin(), codec.spans().end(),
                           [&](const ColumnSpan& sp) { return sp.column == column; });
    if (it == codec.spans().end() || it->kind != ColumnKind::discrete) {
      throw ModelFormatError("condition column is not a discrete codec column");
    }
    DiscreteColumn dc;
    dc.span = *it;
    dc.cond_offset = offset;
    dc.counts = jc.at("counts").get<std::vector<std::size_t>>();
    if (dc.counts.size() != it->width) throw ModelFormatError("condition counts width mismatch");
    dc.rows.assign(dc.counts.size(), {});
    offset += it->width;
    s.columns_.push_back(std::move(dc));
  }
  s.width_ = offset;
  return s;
}

// ---------------------------------------------------------------- heads

Matrix apply_output_heads(const TableCodec& codec, const Matrix& raw, const Matrix& noise,
                          double tau) {
  if (static_cast<std::size_t>(raw.cols()) != codec.width()) {
    throw ShapeError("raw generator output width does not match the codec");
  }
  Matrix out(raw.rows(), raw.cols());
  for (const auto& span : codec.spans()) {
    if (span.kind == ColumnKind::continuous) {
      const auto o = idx(span.offset);
      out.col(o) = raw.col(o).array().tanh().matrix();
    }
    const auto bo = idx(span.block_offset());
    const auto bw = idx(span.block_width());
    out.middleCols(bo, bw) = (raw.middleCols(bo, bw) + noise.middleCols(bo, bw)) / tau;
    softmax_rows_inplace(out, bo, bw);
  }
  return out;
}

Matrix output_heads_backward(const TableCodec& codec, const Matrix& heads,
                             const Matrix& grad, double tau) {
  Matrix d(grad.rows(), grad.cols());
  for (const auto& span : codec.spans()) {
    if (span.kind == ColumnKind::continuous) {
      const auto o = idx(span.offset);
      d.col(o) = grad.col(o).cwiseProduct((1.0 - heads.col(o).array().square()).matrix());
    }
    const auto bo = idx(span.block_offset());
    const auto bw = idx(span.block_width());
    for (Index r = 0; r < grad.rows(); ++r) {
      const RowVector y = heads.row(r).segment(bo, bw);
      const RowVector g = grad.row(r).segment(bo, bw);
      d.row(r).segment(bo, bw) = y.cwiseProduct((g.array() - y.dot(g)).matrix()) / tau;
    }
  }
  return d;
}

// ---------------------------------------------------------------- training

namespace {

struct Prepared {
  Table data;  // transformed, without group
  std::optional<CopulaLayer> copula;
  TableCodec codec;
  Matrix encoded;
  ConditionSampler conditions;
};

Prepared prepare(const Table& table, const GeneratorConfig& config) {
  Prepared p;
  p.data = table.without_group();
  if (p.data.empty()) throw EmptyInput("cannot fit a generator to an empty table");
  if (config.kind == GeneratorKind::copulagan) {
    p.copula = CopulaLayer::fit(p.data, config.identity_copula);
    p.data = p.copula->apply(p.data, CopulaDirection::to_gaussian);
  }
  CodecOptions opts;
  opts.vgm.max_modes = config.max_modes;
  p.codec = TableCodec::fit(p.data, opts, derive_seed(config.seed, "codec"));
  p.encoded = p.codec.encode(p.data, derive_seed(config.seed, "encode"));
  p.conditions = ConditionSampler(p.codec, p.data);
  if (config.kind != GeneratorKind::tvae && p.conditions.empty()) {
    throw SchemaMismatch("conditional generators need at least one discrete column");
  }
  return p;
}

// Reconstruction loss of raw decoder outputs against encoded rows; writes
// d loss / d raw (already divided by the batch size).
double tvae_reconstruction(const TableCodec& codec, const Matrix& raw, const Matrix& target,
                           Matrix& d_raw) {
  const double b = static_cast<double>(raw.rows());
  d_raw.setZero(raw.rows(), raw.cols());
  double loss = 0.0;
  for (const auto& span : codec.spans()) {
    if (span.kind == ColumnKind::continuous) {
      const auto o = idx(span.offset);
      for (Index r = 0; r < raw.rows(); ++r) {
        const double t = std::tanh(raw(r, o));
        const double diff = t - target(r, o);
        loss += kTvaeAlphaWeight * diff * diff;
        d_raw(r, o) = 2.0 * kTvaeAlphaWeight * diff * (1.0 - t * t);
      }
    }
    const auto bo = idx(span.block_offset());
    const auto bw = idx(span.block_width());
    for (Index r = 0; r < raw.rows(); ++r) {
      const RowVector p = softmax(raw.row(r).segment(bo, bw));
      const RowVector y = target.row(r).segment(bo, bw);
      for (Index k = 0; k < bw; ++k) {
        if (y(k) > 0.0) loss -= y(k) * std::log(std::max(p(k), 1e-300));
      }
      d_raw.row(r).segment(bo, bw) = p - y;
    }
  }
  d_raw *= kTvaeLossFactor / b;
  return kTvaeLossFactor * loss / b;
}

void train_tvae(GeneratorModel& model, const Prepared& p) {
  const auto& cfg = model.config;
  const std::size_t n = p.data.num_rows();
  const std::size_t w = p.codec.width();
  const std::size_t latent = cfg.embedding_dim;
  Rng init(derive_seed(cfg.seed, "init"));
  Mlp encoder = Mlp::create(dims_of(w, cfg.encoder_hidden, 2 * latent), Activation::relu,
                            Activation::linear, init);
  Mlp decoder = Mlp::create(dims_of(latent, cfg.decoder_hidden, w), Activation::relu,
                            Activation::linear, init);
  AdamState enc_opt = AdamState::for_net(encoder, AdamConfig::vae());
  AdamState dec_opt = AdamState::for_net(decoder, AdamConfig::vae());
  Rng rng(derive_seed(cfg.seed, "train"));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  const std::size_t batch = std::min(cfg.batch_size, n);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    std::size_t steps = 0;
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t end = std::min(n, start + batch);
      const auto b = idx(end - start);
      const std::string where = fmt::format("tvae epoch {} step {}", epoch, steps);
      Matrix x(b, idx(w));
      for (Index i = 0; i < b; ++i) x.row(i) = p.encoded.row(idx(order[start + static_cast<std::size_t>(i)]));

      const auto enc = forward(encoder, x);
      const Matrix mu = enc.output.leftCols(idx(latent));
      const Matrix logvar = enc.output.rightCols(idx(latent));
      const Matrix std = (0.5 * logvar.array()).exp().matrix();
      const Matrix eps = gaussian_matrix(b, idx(latent), rng);
      const Matrix z = mu + eps.cwiseProduct(std);

      const auto dec = forward(decoder, z);
      Matrix d_raw;
      const double rec = tvae_reconstruction(p.codec, dec.output, x, d_raw);
      const double bd = static_cast<double>(b);
      const double kl =
          -0.5 * (1.0 + logvar.array() - mu.array().square() - logvar.array().exp()).sum() / bd;
      const double loss = rec + kl;
      require_finite(loss, where);

      const Gradients dec_grads = backward(decoder, dec, d_raw);
      const Matrix& d_z = dec_grads.input;
      Matrix d_enc(b, idx(2 * latent));
      d_enc.leftCols(idx(latent)) = d_z + mu / bd;
      d_enc.rightCols(idx(latent)) =
          (d_z.cwiseProduct(eps).cwiseProduct(std) * 0.5).array() +
          0.5 * (logvar.array().exp() - 1.0) / bd;
      const Gradients enc_grads = backward(encoder, enc, d_enc);
      with_context(where, [&] {
        adam_step(decoder, dec_grads, dec_opt);
        adam_step(encoder, enc_grads, enc_opt);
        return 0;
      });
      epoch_loss += loss;
      ++steps;
    }
    model.loss_trace.push_back({epoch, epoch_loss / static_cast<double>(steps), 0.0});
  }
  model.networks = {std::move(encoder), std::move(decoder)};
}

struct CondBatch {
  Matrix cond;
  std::vector<ConditionSampler::Draw> draws;
};

CondBatch training_conditions(const ConditionSampler& cs, Index b, Rng& rng) {
  CondBatch cb;
  cb.cond = Matrix::Zero(b, idx(cs.width()));
  for (Index i = 0; i < b; ++i) {
    const auto d = cs.draw_training(rng);
    cb.cond(i, idx(cs.cond_index(d))) = 1.0;
    cb.draws.push_back(d);
  }
  return cb;
}

void train_ctgan(GeneratorModel& model, const Prepared& p) {
  const auto& cfg = model.config;
  const std::size_t n = p.data.num_rows();
  const std::size_t w = p.codec.width();
  const std::size_t cw = p.conditions.width();
  const std::size_t pac = cfg.pac;
  const std::size_t batch = cfg.batch_size;
  const auto b = idx(batch);
  const double groups = static_cast<double>(batch / pac);

  Rng init(derive_seed(cfg.seed, "init"));
  Mlp generator = Mlp::create(dims_of(cfg.embedding_dim + cw, cfg.generator_hidden, w),
                              Activation::relu, Activation::linear, init);
  Mlp critic = Mlp::create(dims_of(pac * (w + cw), cfg.critic_hidden, 1),
                           Activation::leaky_relu, Activation::linear, init);
  AdamState gen_opt = AdamState::for_net(generator, AdamConfig::gan());
  AdamState crit_opt = AdamState::for_net(critic, AdamConfig::gan());
  Rng rng(derive_seed(cfg.seed, "train"));
  const std::size_t steps_per_epoch = std::max<std::size_t>(1, n / batch);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    double g_total = 0.0, c_total = 0.0;
    for (std::size_t step = 0; step < steps_per_epoch; ++step) {
      const std::string where = fmt::format("{} epoch {} step {}", to_string(cfg.kind), epoch, step);

      // Critic update.
      {
        const auto cb = training_conditions(p.conditions, b, rng);
        Matrix real(b, idx(w));
        for (Index i = 0; i < b; ++i) {
          real.row(i) = p.encoded.row(idx(p.conditions.draw_row(cb.draws[static_cast<std::size_t>(i)], rng)));
        }
        const Matrix z = gaussian_matrix(b, idx(cfg.embedding_dim), rng);
        const Matrix raw = predict(generator, hstack(z, cb.cond));
        const Matrix fake = apply_output_heads(p.codec, raw, gumbel_matrix(b, idx(w), rng),
                                               cfg.gumbel_tau);
        const Matrix real_p = pack(hstack(real, cb.cond), pac);
        const Matrix fake_p = pack(hstack(fake, cb.cond), pac);
        const auto real_pass = forward(critic, real_p);
        const auto fake_pass = forward(critic, fake_p);
        auto penalty = gradient_penalty_with_grad(critic, real_p, fake_p, rng);
        const double loss = -(real_pass.output.mean() - fake_pass.output.mean()) +
                            cfg.gp_weight * penalty.value;
        require_finite(loss, where + " (critic)");
        const Matrix ones = Matrix::Ones(real_pass.output.rows(), 1);
        Gradients grads = backward(critic, real_pass, -ones / groups);
        grads += backward(critic, fake_pass, ones / groups);
        penalty.grads *= cfg.gp_weight;
        grads += penalty.grads;
        with_context(where + " (critic)", [&] {
          adam_step(critic, grads, crit_opt);
          return 0;
        });
        c_total += loss;
      }

      // Generator update.
      {
        const auto cb = training_conditions(p.conditions, b, rng);
        const Matrix z = gaussian_matrix(b, idx(cfg.embedding_dim), rng);
        const auto gen_pass = forward(generator, hstack(z, cb.cond));
        const Matrix& raw = gen_pass.output;
        const Matrix fake = apply_output_heads(p.codec, raw, gumbel_matrix(b, idx(w), rng),
                                               cfg.gumbel_tau);
        const auto crit_pass = forward(critic, pack(hstack(fake, cb.cond), pac));
        double loss = -crit_pass.output.mean();
        const Matrix d_packed =
            backward(critic, crit_pass, -Matrix::Ones(crit_pass.output.rows(), 1) / groups).input;
        const Matrix d_rows = unpack(d_packed, pac, idx(w + cw));
        Matrix d_raw = output_heads_backward(p.codec, fake, d_rows.leftCols(idx(w)), cfg.gumbel_tau);

        // Cross-entropy forcing the conditioned category.
        double ce = 0.0;
        for (Index i = 0; i < b; ++i) {
          const auto& draw = cb.draws[static_cast<std::size_t>(i)];
          const auto& span = p.conditions.span(draw);
          const auto bo = idx(span.block_offset());
          const auto bw = idx(span.block_width());
          RowVector prob = softmax(raw.row(i).segment(bo, bw));
          ce -= std::log(std::max(prob(idx(draw.category)), 1e-300));
          prob(idx(draw.category)) -= 1.0;
          d_raw.row(i).segment(bo, bw) += prob / static_cast<double>(b);
        }
        loss += ce / static_cast<double>(b);
        require_finite(loss, where + " (generator)");
        const Gradients grads = backward(generator, gen_pass, d_raw);
        with_context(where + " (generator)", [&] {
          adam_step(generator, grads, gen_opt);
          return 0;
        });
        g_total += loss;
      }
    }
    const double steps = static_cast<double>(steps_per_epoch);
    model.loss_trace.push_back({epoch, g_total / steps, c_total / steps});
  }
  model.networks = {std::move(generator), std::move(critic)};
}

}  // namespace

GeneratorModel fit_generator(const Table& table, const GeneratorConfig& config) {
  config.validate();
  Prepared p = prepare(table, config);
  GeneratorModel model;
  model.config = config;
  model.schema = table.schema().without_group();
  model.schema_fingerprint = model.schema.fingerprint();
  model.copula = p.copula;
  model.codec = p.codec;
  model.conditions = p.conditions;
  if (config.kind == GeneratorKind::tvae) {
    train_tvae(model, p);
  } else {
    train_ctgan(model, p);
  }
  return model;
}

// ---------------------------------------------------------------- sampling

namespace {

struct ResolvedCondition {
  ConditionSampler::Draw draw;
  std::size_t schema_column = 0;
};

std::optional<ResolvedCondition> resolve(const GeneratorModel& model,
                                         const std::optional<Condition>& condition) {
  if (!condition) return std::nullopt;
  const auto col = model.schema.find(condition->column);
  if (!col || model.schema.columns[*col].kind != ColumnKind::discrete) {
    throw SchemaMismatch(
        fmt::format("condition column '{}' is not a discrete model column", condition->column));
  }
  const auto& cats = model.schema.columns[*col].categories;
  auto it = std::find(cats.begin(), cats.end(), condition->category);
  if (it == cats.end()) {
    throw SchemaMismatch(fmt::format("unknown category '{}' for column '{}'",
                                     condition->category, condition->column));
  }
  const auto d = model.conditions.discrete_index_of(*col);
  if (!d) throw SchemaMismatch("condition column unknown to the model");
  ResolvedCondition rc;
  rc.draw = {*d, static_cast<std::size_t>(it - cats.begin())};
  rc.schema_column = *col;
  return rc;
}

Table finish(const GeneratorModel& model, Table decoded) {
  if (model.copula) decoded = model.copula->apply(decoded, CopulaDirection::from_gaussian);
  return decoded;
}

Table sample_ctgan(const GeneratorModel& model, std::size_t n,
                   const std::optional<ResolvedCondition>& cond, Rng& rng, SampleStats& stats) {
  const auto& generator = model.networks.at(0);
  const auto& cs = model.conditions;
  const std::size_t w = model.codec.width();
  const std::size_t batch = model.config.batch_size;
  Matrix rows(idx(n), idx(w));
  std::size_t filled = 0;
  while (filled < n) {
    const std::size_t count = std::min(batch, n - filled);
    const auto b = idx(count);
    Matrix c = Matrix::Zero(b, idx(cs.width()));
    for (Index i = 0; i < b; ++i) {
      const auto draw = cond ? cond->draw : cs.draw_original(rng);
      c(i, idx(cs.cond_index(draw))) = 1.0;
    }
    const Matrix z = gaussian_matrix(b, idx(model.config.embedding_dim), rng);
    const Matrix raw = predict(generator, hstack(z, c));
    rows.middleRows(idx(filled), b) =
        apply_output_heads(model.codec, raw, gumbel_matrix(b, idx(w), rng), model.config.gumbel_tau);
    filled += count;
  }
  Table decoded = model.codec.decode(rows);
  if (cond) {
    const auto col = decoded.column(cond->schema_column);
    std::vector<double> fixed(col.begin(), col.end());
    const double want = static_cast<double>(cond->draw.category);
    for (auto& v : fixed) {
      if (v != want) {
        v = want;
        ++stats.overwritten;
      }
    }
    if (stats.overwritten > 0) {
      fmt::print(stderr, "voxsynth: condition guard overwrote {} of {} rows\n",
                 stats.overwritten, n);
    }
    decoded = decoded.with_column(cond->schema_column, std::move(fixed));
  }
  return finish(model, std::move(decoded));
}

Table sample_tvae(const GeneratorModel& model, std::size_t n,
                  const std::optional<ResolvedCondition>& cond, Rng& rng, SampleStats& stats) {
  const auto& decoder = model.networks.at(1);
  const std::size_t w = model.codec.width();
  const std::size_t latent = model.config.embedding_dim;
  auto generate = [&](std::size_t count) {
    Matrix raw = predict(decoder, gaussian_matrix(idx(count), idx(latent), rng));
    for (const auto& span : model.codec.spans()) {
      if (span.kind == ColumnKind::continuous) {
        const auto o = idx(span.offset);
        raw.col(o) = raw.col(o).array().tanh().matrix();
      }
    }
    return raw;
  };
  if (!cond) return finish(model, model.codec.decode(generate(n)));

  const std::size_t per_batch = std::max(n, model.config.batch_size);
  const auto& span = model.conditions.span(cond->draw);
  Matrix kept(idx(n), idx(w));
  std::size_t filled = 0;
  while (filled < n) {
    if (stats.rejection_batches >= model.config.condition_retry_cap) {
      throw ConditionUnsatisfiable(fmt::format(
          "TVAE produced {} of {} conditioned rows within {} batches", filled, n,
          model.config.condition_retry_cap));
    }
    ++stats.rejection_batches;
    const Matrix raw = generate(per_batch);
    for (Index r = 0; r < raw.rows() && filled < n; ++r) {
      Index best = 0;
      raw.row(r).segment(idx(span.block_offset()), idx(span.block_width())).maxCoeff(&best);
      if (static_cast<std::size_t>(best) == cond->draw.category) {
        kept.row(idx(filled++)) = raw.row(r);
      }
    }
  }
  return finish(model, model.codec.decode(kept));
}

}  // namespace

Table sample(const GeneratorModel& model, std::size_t n,
             const std::optional<Condition>& condition, std::uint64_t seed, SampleStats* stats) {
  if (n < 1) throw ConfigError("sample size must be at least 1");
  const auto cond = resolve(model, condition);
  SampleStats local;
  Rng rng(derive_seed(seed, "sample"));
  Table out = model.config.kind == GeneratorKind::tvae ? sample_tvae(model, n, cond, rng, local)
                                                       : sample_ctgan(model, n, cond, rng, local);
  if (stats) *stats = local;
  return out;
}

void check_schema(const GeneratorModel& model, const Schema& schema) {
  if (schema.without_group().fingerprint() != model.schema_fingerprint) {
    throw SchemaMismatch("table schema does not match the generator's schema fingerprint");
  }
}

ClassCounts preset_counts(std::string_view preset, GeneratorKind kind) {
  if (preset != "paper2023") throw ConfigError(fmt::format("unknown preset '{}'", preset));
  switch (kind) {
    case GeneratorKind::tvae:
      return {92, 80};
    case GeneratorKind::ctgan:
      return {86, 86};
    case GeneratorKind::copulagan:
      return {78, 94};
  }
  return {};
}

Table sample_by_class(const GeneratorModel& model, const ClassCounts& counts,
                      std::uint64_t seed, SampleStats* stats) {
  const auto& target = model.schema.target_column;
  std::vector<Table> parts;
  SampleStats total;
  const std::pair<const char*, std::size_t> classes[] = {{"0", counts.healthy},
                                                         {"1", counts.patient}};
  for (const auto& [label, count] : classes) {
    if (count == 0) continue;
    SampleStats s;
    parts.push_back(sample(model, count, Condition{target, label},
                           derive_seed(seed, std::string("class:") + label), &s));
    total.overwritten += s.overwritten;
    total.rejection_batches += s.rejection_batches;
  }
  if (parts.empty()) throw ConfigError("no rows requested");
  std::vector<std::vector<double>> cols(model.schema.columns.size());
  for (const auto& part : parts) {
    for (std::size_t c = 0; c < cols.size(); ++c) {
      const auto col = part.column(c);
      cols[c].insert(cols[c].end(), col.begin(), col.end());
    }
  }
  if (stats) *stats = total;
  return Table(model.schema, std::move(cols));
}

// ---------------------------------------------------------------- files

namespace {
constexpr std::string_view kModelMagic = "VXGEN1";
constexpr std::uint32_t kModelVersion = 1;
}  // namespace

std::string serialize_model(const GeneratorModel& model) {
  nlohmann::json trace = nlohmann::json::array();
  for (const auto& r : model.loss_trace) trace.push_back({r.epoch, r.generator, r.critic});
  nlohmann::json header = {
      {"config", model.config.to_json()},
      {"schema", to_json(model.schema)},
      {"fingerprint", model.schema_fingerprint},
      {"codec", model.codec.to_json()},
      {"copula", model.copula ? model.copula->to_json() : nlohmann::json()},
      {"conditions", model.conditions.to_json()},
      {"loss_trace", trace},
  };
  const std::string text = header.dump();
  std::string out(kModelMagic);
  detail::put<std::uint32_t>(out, kModelVersion);
  detail::put<std::uint64_t>(out, text.size());
  out += text;
  detail::put<std::uint64_t>(out, model.networks.size());
  for (const auto& net : model.networks) {
    const std::string blob = serialize_weights(net);
    detail::put<std::uint64_t>(out, blob.size());
    out += blob;
  }
  return out;
}

GeneratorModel deserialize_model(std::string_view bytes) {
  detail::Reader in(bytes, 0);
  if (in.take(kModelMagic.size()) != kModelMagic) throw ModelFormatError("bad model magic");
  if (in.get<std::uint32_t>() != kModelVersion) throw ModelFormatError("unsupported model version");
  const auto header_len = in.get<std::uint64_t>();
  if (header_len > in.remaining()) throw ModelFormatError("truncated model header");
  const auto text = in.take(header_len);
  GeneratorModel model;
  try {
    const auto header = nlohmann::json::parse(text);
    model.config = GeneratorConfig::from_json(header.at("config"));
    model.schema = schema_from_json(header.at("schema"));
    model.schema_fingerprint = header.at("fingerprint").get<std::string>();
    model.codec = TableCodec::from_json(header.at("codec"));
    if (!header.at("copula").is_null()) model.copula = CopulaLayer::from_json(header.at("copula"));
    model.conditions = ConditionSampler::from_json(header.at("conditions"), model.codec);
    for (const auto& r : header.at("loss_trace")) {
      model.loss_trace.push_back({r.at(0).get<std::size_t>(), r.at(1).get<double>(),
                                  r.at(2).get<double>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw ModelFormatError(std::string("malformed model header: ") + e.what());
  } catch (const ConfigError& e) {
    throw ModelFormatError(std::string("invalid model config: ") + e.what());
  } catch (const SchemaMismatch& e) {
    throw ModelFormatError(std::string("invalid model schema: ") + e.what());
  }
  if (model.schema.fingerprint() != model.schema_fingerprint) {
    throw SchemaMismatch("stored schema does not match its fingerprint");
  }
  const auto count = in.get<std::uint64_t>();
  if (count != 2) throw ModelFormatError("expected two networks");
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto len = in.get<std::uint64_t>();
    if (len > in.remaining()) throw ModelFormatError("truncated network blob");
    const auto blob = in.take(len);
    model.networks.push_back(deserialize_weights(blob));
  }
  if (in.remaining() != 0) throw ModelFormatError("trailing bytes after model data");
  return model;
}

void save_model(const GeneratorModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError(fmt::format("cannot write '{}'", path.string()));
  const auto bytes = serialize_model(model);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

GeneratorModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ModelFormatError(fmt::format("cannot open '{}'", path.string()));
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_model(bytes);
}

}  // namespace voxsynth
