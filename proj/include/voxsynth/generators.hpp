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

// Tabular synthesizers: TVAE, CTGAN and CopulaGAN.
//
// All three work on the encoded representation produced by TableCodec.
//
//  * TVAE: encoder -> (mu, log variance) -> reparameterized latent ->
//    decoder. Loss per row is 2 * reconstruction + KL, where reconstruction
//    is 50 * (alpha - tanh(out))^2 for every alpha scalar (a fixed output
//    std of 0.1) plus softmax cross-entropy for every mode and category
//    block.
//  * CTGAN: conditional generator fed (noise, condition vector); outputs go
//    through tanh (alpha scalars) and Gumbel-softmax with temperature 0.2
//    (blocks). The critic sees `pac` rows at once and is trained with the
//    Wasserstein loss plus gp_weight * gradient penalty. Conditions are
//    drawn by training-by-sampling: a discrete column uniformly, then a
//    category with probability proportional to log(1 + count).
//  * CopulaGAN: CTGAN on data whose continuous columns were first mapped
//    through the marginal Gaussian copula; samples are mapped back.
//
// Model files: magic "VXGEN1", u32 version, u64 header length, JSON header
// (config, schema, codec, copula, condition sampler, loss traces), u64
// network count, then one length-prefixed "VXNN1" blob per network.

#ifndef VOXSYNTH_GENERATORS_HPP_
#define VOXSYNTH_GENERATORS_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"
#include "voxsynth/nn.hpp"
#include "voxsynth/table.hpp"
#include "voxsynth/transforms.hpp"

namespace voxsynth {

enum class GeneratorKind { tvae, ctgan, copulagan };

std::string_view to_string(GeneratorKind kind);
GeneratorKind parse_generator_kind(std::string_view text);

struct GeneratorConfig {
  GeneratorKind kind = GeneratorKind::tvae;
  std::size_t epochs = 300;
  std::size_t batch_size = 60;
  std::size_t embedding_dim = 128;  // CTGAN noise / TVAE latent
  std::vector<std::size_t> generator_hidden{256, 256};
  std::vector<std::size_t> critic_hidden{256, 256};
  std::vector<std::size_t> encoder_hidden{256, 256};
  std::vector<std::size_t> decoder_hidden{256, 256};
  std::size_t pac = 10;
  double gp_weight = 10.0;
  std::size_t max_modes = 10;
  double gumbel_tau = 0.2;
  // TVAE conditional sampling: at most this many rejection batches.
  std::size_t condition_retry_cap = 100;
  // CopulaGAN with an identity copula (equivalence testing only).
  bool identity_copula = false;
  std::uint64_t seed = 0;

  void validate() const;  // throws ConfigError
  nlohmann::json to_json() const;
  static GeneratorConfig from_json(const nlohmann::json& j);
};

// Discrete-column condition bookkeeping shared by training and sampling.
class ConditionSampler {
 public:
  ConditionSampler() = default;
  ConditionSampler(const TableCodec& codec, const Table& table);

  bool empty() const noexcept { return columns_.empty(); }
  // Total width of the condition vector (sum of category counts).
  std::size_t width() const noexcept { return width_; }

  struct Draw {
    std::size_t column = 0;    // index among discrete columns
    std::size_t category = 0;  // category code
  };

  // Training-by-sampling draw (log-frequency weights).
  Draw draw_training(Rng& rng) const;
  // Draw from the empirical category frequencies.
  Draw draw_original(Rng& rng) const;
  // Row of the training table carrying the drawn category.
  std::size_t draw_row(const Draw& draw, Rng& rng) const;

  // Position of the draw inside the condition vector.
  std::size_t cond_index(const Draw& draw) const;
  // Encoded-row span of the discrete column of a draw.
  const ColumnSpan& span(const Draw& draw) const;
  // Schema column index of a discrete column.
  std::size_t schema_column(std::size_t discrete_index) const;
  std::optional<std::size_t> discrete_index_of(std::size_t schema_column) const;

  std::vector<double> log_frequency_weights(std::size_t discrete_index) const;

  nlohmann::json to_json() const;
  static ConditionSampler from_json(const nlohmann::json& j, const TableCodec& codec);

 private:
  struct DiscreteColumn {
    ColumnSpan span;
    std::size_t cond_offset = 0;
    std::vector<std::size_t> counts;
    std::vector<std::vector<std::size_t>> rows;  // training rows per category
  };
  std::vector<DiscreteColumn> columns_;
  std::size_t width_ = 0;
};

struct LossRecord {
  std::size_t epoch = 0;
  double generator = 0.0;  // TVAE: mean ELBO loss
  double critic = 0.0;     // GAN critic loss (0 for TVAE)
};

struct GeneratorModel {
  GeneratorConfig config;
  Schema schema;  // schema of generated tables (no group column)
  std::string schema_fingerprint;
  std::optional<CopulaLayer> copula;
  TableCodec codec;
  ConditionSampler conditions;
  // TVAE: {encoder, decoder}. CTGAN/CopulaGAN: {generator, critic}.
  std::vector<Mlp> networks;
  std::vector<LossRecord> loss_trace;
};

GeneratorModel fit_generator(const Table& table, const GeneratorConfig& config);

struct Condition {
  std::string column;
  std::string category;
};

struct SampleStats {
  // Conditional CTGAN rows whose generated category disagreed with the
  // condition and were overwritten by the final guard.
  std::size_t overwritten = 0;
  // Rejection batches used by TVAE conditional sampling.
  std::size_t rejection_batches = 0;
};

Table sample(const GeneratorModel& model, std::size_t n,
             const std::optional<Condition>& condition, std::uint64_t seed,
             SampleStats* stats = nullptr);

// Checks that `schema` matches the model's schema fingerprint (group column
// ignored); throws SchemaMismatch otherwise.
void check_schema(const GeneratorModel& model, const Schema& schema);

// Healthy/patient sample counts per generator.
struct ClassCounts {
  std::size_t healthy = 0;
  std::size_t patient = 0;
};

// The "paper2023" preset: TVAE 92/80, CTGAN 86/86, CopulaGAN 78/94.
ClassCounts preset_counts(std::string_view preset, GeneratorKind kind);

// Samples `counts` rows per status class and concatenates them (healthy
// first).
Table sample_by_class(const GeneratorModel& model, const ClassCounts& counts,
                      std::uint64_t seed, SampleStats* stats = nullptr);

std::string serialize_model(const GeneratorModel& model);
GeneratorModel deserialize_model(std::string_view bytes);
void save_model(const GeneratorModel& model, const std::filesystem::path& path);
GeneratorModel load_model(const std::filesystem::path& path);

// Exposed for tests: applies tanh / Gumbel-softmax heads to raw generator
// outputs. `noise` holds one Gumbel draw per encoded column (ignored for
// alpha scalars).
Matrix apply_output_heads(const TableCodec& codec, const Matrix& raw, const Matrix& noise,
                          double tau);
// Gradient with respect to `raw` given the heads output and d loss / d heads.
Matrix output_heads_backward(const TableCodec& codec, const Matrix& heads, const Matrix& grad,
                             double tau);

}  // namespace voxsynth

#endif  // VOXSYNTH_GENERATORS_HPP_
