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

#include "voxsynth/pipeline.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <ctime>
#include <fstream>
#include <iterator>
#include <sstream>

#include <fmt/format.h>

#include "voxsynth/error.hpp"
#include "voxsynth/quality.hpp"
#include "voxsynth/report.hpp"
#include "voxsynth/rng.hpp"

namespace voxsynth {

namespace fs = std::filesystem;

namespace {

// ---------------------------------------------------------------- values

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::uint64_t parse_u64(std::string_view key, std::string_view v) {
  std::uint64_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size() || v.empty()) {
    throw ConfigError(fmt::format("{}: '{}' is not a nonnegative integer", key, v));
  }
  return out;
}

std::size_t parse_positive(std::string_view key, std::string_view v) {
  const auto n = parse_u64(key, v);
  if (n == 0) throw ConfigError(fmt::format("{} must be positive", key));
  return static_cast<std::size_t>(n);
}

double parse_double(std::string_view key, std::string_view v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(std::string(v), &used);
    if (used != v.size()) throw std::invalid_argument("trailing");
    return d;
  } catch (const std::exception&) {
    throw ConfigError(fmt::format("{}: '{}' is not a number", key, v));
  }
}

bool parse_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(fmt::format("{}: '{}' is not a boolean", key, v));
}

std::optional<ClassCounts> parse_counts(std::string_view key, std::string_view v) {
  if (v == "none") return std::nullopt;
  const auto parts = split(v, ':');
  if (parts.size() != 2) {
    throw ConfigError(fmt::format("{}: expected HEALTHY:PATIENT or none, got '{}'", key, v));
  }
  return ClassCounts{parse_positive(key, parts[0]), parse_positive(key, parts[1])};
}

std::string show_counts(const std::optional<ClassCounts>& c) {
  return c ? fmt::format("{}:{}", c->healthy, c->patient) : "none";
}

std::vector<std::size_t> parse_widths(std::string_view key, std::string_view v) {
  std::vector<std::size_t> out;
  for (const auto& p : split(v, ',')) out.push_back(parse_positive(key, p));
  return out;
}

std::string show_list(const std::vector<std::size_t>& v) { return fmt::format("{}", fmt::join(v, ",")); }

// ---------------------------------------------------------------- keys

struct KeySpec {
  std::string name;
  std::string help;
  std::function<void(RunConfig&, std::string_view)> apply;
  std::function<std::string(const RunConfig&)> show;
  bool run_location = false;  // excluded from the config hash
};

const std::vector<KeySpec>& key_specs() {
  static const std::vector<KeySpec> specs = {
      {"input", "path of the voice-feature CSV (UCI header row)",
       [](RunConfig& c, std::string_view v) { c.input = std::string(v); },
       [](const RunConfig& c) { return c.input.string(); }},
      {"output", "output directory",
       [](RunConfig& c, std::string_view v) { c.output = std::string(v); },
       [](const RunConfig& c) { return c.output.string(); }, true},
      {"overwrite", "replace the files of a non-empty output directory",
       [](RunConfig& c, std::string_view v) { c.overwrite = parse_bool("overwrite", v); },
       [](const RunConfig& c) { return std::string(c.overwrite ? "true" : "false"); }, true},
      {"generators", "comma list of tvae, ctgan, copulagan",
       [](RunConfig& c, std::string_view v) {
         c.generators.clear();
         for (const auto& g : split(v, ',')) c.generators.push_back(parse_generator_kind(g));
         if (c.generators.empty()) throw ConfigError("generators: empty list");
       },
       [](const RunConfig& c) {
         std::vector<std::string_view> names;
         for (auto g : c.generators) names.push_back(to_string(g));
         return fmt::format("{}", fmt::join(names, ","));
       }},
      {"epochs", "training epochs per generator",
       [](RunConfig& c, std::string_view v) { c.generator.epochs = parse_positive("epochs", v); },
       [](const RunConfig& c) { return std::to_string(c.generator.epochs); }},
      {"batch_size", "generator minibatch rows (a multiple of pac)",
       [](RunConfig& c, std::string_view v) { c.generator.batch_size = parse_positive("batch_size", v); },
       [](const RunConfig& c) { return std::to_string(c.generator.batch_size); }},
      {"embedding_dim", "CTGAN noise / TVAE latent width",
       [](RunConfig& c, std::string_view v) {
         c.generator.embedding_dim = parse_positive("embedding_dim", v);
       },
       [](const RunConfig& c) { return std::to_string(c.generator.embedding_dim); }},
      {"hidden", "hidden layer widths of every generator network, comma list",
       [](RunConfig& c, std::string_view v) {
         const auto w = parse_widths("hidden", v);
         c.generator.generator_hidden = c.generator.critic_hidden = w;
         c.generator.encoder_hidden = c.generator.decoder_hidden = w;
       },
       [](const RunConfig& c) { return show_list(c.generator.generator_hidden); }},
      {"pac", "rows per critic input",
       [](RunConfig& c, std::string_view v) { c.generator.pac = parse_positive("pac", v); },
       [](const RunConfig& c) { return std::to_string(c.generator.pac); }},
      {"gp_weight", "gradient penalty weight",
       [](RunConfig& c, std::string_view v) { c.generator.gp_weight = parse_double("gp_weight", v); },
       [](const RunConfig& c) { return fmt::format("{}", c.generator.gp_weight); }},
      {"max_modes", "Gaussian mixture modes per continuous column",
       [](RunConfig& c, std::string_view v) { c.generator.max_modes = parse_positive("max_modes", v); },
       [](const RunConfig& c) { return std::to_string(c.generator.max_modes); }},
      {"gumbel_tau", "Gumbel-softmax temperature",
       [](RunConfig& c, std::string_view v) { c.generator.gumbel_tau = parse_double("gumbel_tau", v); },
       [](const RunConfig& c) { return fmt::format("{}", c.generator.gumbel_tau); }},
      {"condition_retry_cap", "TVAE conditional sampling: rejection batches before giving up",
       [](RunConfig& c, std::string_view v) {
         c.generator.condition_retry_cap = parse_positive("condition_retry_cap", v);
       },
       [](const RunConfig& c) { return std::to_string(c.generator.condition_retry_cap); }},
      {"counts_preset", "per-generator healthy/patient sample counts (paper2023)",
       [](RunConfig& c, std::string_view v) {
         (void)preset_counts(v, GeneratorKind::tvae);
         c.counts_preset = std::string(v);
       },
       [](const RunConfig& c) { return c.counts_preset; }},
      {"counts", "HEALTHY:PATIENT sample counts for every generator, or none (use the preset)",
       [](RunConfig& c, std::string_view v) { c.counts = parse_counts("counts", v); },
       [](const RunConfig& c) { return show_counts(c.counts); }},
      {"undersample", "HEALTHY:PATIENT rows drawn from the real table before fitting, or none",
       [](RunConfig& c, std::string_view v) { c.undersample = parse_counts("undersample", v); },
       [](const RunConfig& c) { return show_counts(c.undersample); }},
      {"protocol", "synthetic-cv, augmented or tstr",
       [](RunConfig& c, std::string_view v) { c.protocol = parse_cv_protocol(v); },
       [](const RunConfig& c) { return std::string(to_string(c.protocol)); }},
      {"classifier", "dt, rf, et, gb, xgb, adaboost or svm",
       [](RunConfig& c, std::string_view v) { c.classifier = parse_classifier_kind(v); },
       [](const RunConfig& c) { return std::string(to_string(c.classifier)); }},
      {"n_trees", "trees of rf/et classifiers",
       [](RunConfig& c, std::string_view v) { c.classifier_params.n_trees = parse_positive("n_trees", v); },
       [](const RunConfig& c) { return std::to_string(c.classifier_params.n_trees); }},
      {"max_depth", "tree depth limit of dt/rf/et, or none",
       [](RunConfig& c, std::string_view v) {
         c.classifier_params.max_depth =
             v == "none" ? std::nullopt : std::optional<std::size_t>(parse_positive("max_depth", v));
       },
       [](const RunConfig& c) {
         return c.classifier_params.max_depth ? std::to_string(*c.classifier_params.max_depth)
                                              : std::string("none");
       }},
      {"rfe_trees", "trees of the feature-elimination forest",
       [](RunConfig& c, std::string_view v) { c.rfe_params.n_trees = parse_positive("rfe_trees", v); },
       [](const RunConfig& c) { return std::to_string(c.rfe_params.n_trees); }},
      {"k_min", "smallest fold count of the sweep",
       [](RunConfig& c, std::string_view v) { c.k_min = parse_positive("k_min", v); },
       [](const RunConfig& c) { return std::to_string(c.k_min); }},
      {"k_max", "largest fold count of the sweep",
       [](RunConfig& c, std::string_view v) { c.k_max = parse_positive("k_max", v); },
       [](const RunConfig& c) { return std::to_string(c.k_max); }},
      {"max_d", "largest subset size of the sweep (0: all features)",
       [](RunConfig& c, std::string_view v) { c.max_d = parse_u64("max_d", v); },
       [](const RunConfig& c) { return std::to_string(c.max_d); }},
      {"attribution", "permutation or shapley",
       [](RunConfig& c, std::string_view v) { c.attribution = parse_attribution_method(v); },
       [](const RunConfig& c) { return std::string(to_string(c.attribution)); }},
      {"repeats", "permutation importance repeats",
       [](RunConfig& c, std::string_view v) { c.influence.repeats = parse_positive("repeats", v); },
       [](const RunConfig& c) { return std::to_string(c.influence.repeats); }},
      {"n_permutations", "Shapley permutations per explained row",
       [](RunConfig& c, std::string_view v) {
         c.influence.n_permutations = parse_positive("n_permutations", v);
       },
       [](const RunConfig& c) { return std::to_string(c.influence.n_permutations); }},
      {"background_cap", "Shapley background rows",
       [](RunConfig& c, std::string_view v) {
         c.influence.background_cap = parse_positive("background_cap", v);
       },
       [](const RunConfig& c) { return std::to_string(c.influence.background_cap); }},
      {"seed", "master seed (VOXSYNTH_SEED overrides the file value)",
       [](RunConfig& c, std::string_view v) { c.seed = parse_u64("seed", v); },
       [](const RunConfig& c) { return std::to_string(c.seed); }},
      {"threads", "worker threads for the sweep (results do not depend on it)",
       [](RunConfig& c, std::string_view v) { c.threads = parse_positive("threads", v); },
       [](const RunConfig& c) { return std::to_string(c.threads); }, true},
  };
  return specs;
}

const KeySpec* find_key(std::string_view name) {
  for (const auto& k : key_specs()) {
    if (k.name == name) return &k;
  }
  return nullptr;
}

std::string canonical_text(const RunConfig& c, bool include_location) {
  std::vector<const KeySpec*> keys;
  for (const auto& k : key_specs()) {
    if (include_location || !k.run_location) keys.push_back(&k);
  }
  std::sort(keys.begin(), keys.end(), [](const auto* a, const auto* b) { return a->name < b->name; });
  std::string out;
  for (const auto* k : keys) out += fmt::format("{} = {}\n", k->name, k->show(c));
  return out;
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string table_csv(const Table& t) {
  std::ostringstream out;
  write_csv(t, out);
  return out.str();
}

// ---------------------------------------------------------------- run

class Run {
 public:
  Run(const RunConfig& config, const LogFn& log) : config_(config), log_(log) {}

  RunManifest& manifest() { return manifest_; }
  const std::string& stage() const { return stage_; }

  void begin(std::string name) {
    stage_ = std::move(name);
    if (log_) log_(fmt::format("stage {}", stage_));
  }

  std::uint64_t seed_for(const std::string& name) {
    const auto s = stage_seed(config_.seed, name);
    manifest_.stage_seeds[name] = s;
    return s;
  }

  void write(const std::string& name, std::string_view bytes) {
    write_text_file(config_.output / name, bytes);
    manifest_.files.push_back({name, sha256_hex(bytes), bytes.size()});
  }

  void execute();

 private:
  void run_generator(const Table& real, const Table& fit_table, GeneratorKind kind,
                     std::vector<std::pair<std::string, QualityReport>>& qualities,
                     std::string& best_rows);

  const RunConfig& config_;
  const LogFn& log_;
  RunManifest manifest_;
  std::string stage_;
};

void Run::execute() {
  begin("ingest");
  const Table real = ingest(config_.input);
  if (log_) log_(fmt::format("  {} rows, {} features", real.num_rows(), real.schema().feature_names().size()));
  write("config_resolved.txt", canonical_text(config_, false));

  begin("heatmap");
  write("heatmap_all.csv", render(correlation_matrix(real), ReportFormat::csv));
  write("heatmap_all.svg", render(correlation_matrix(real), ReportFormat::svg));
  write("heatmap_healthy.svg", render(correlation_matrix(real, 0), ReportFormat::svg));
  write("heatmap_patient.svg", render(correlation_matrix(real, 1), ReportFormat::svg));

  Table fit_table = real;
  if (config_.undersample) {
    begin("undersample");
    fit_table = voxsynth::undersample(
        real, {{0, config_.undersample->healthy}, {1, config_.undersample->patient}},
        seed_for("undersample"));
  }

  std::vector<std::pair<std::string, QualityReport>> qualities;
  std::string best_rows = "generator,k,d,f1,features\n";
  for (auto kind : config_.generators) run_generator(real, fit_table, kind, qualities, best_rows);

  begin("summary");
  write("quality_summary.csv", quality_summary_csv(qualities));
  write("best_configs.csv", best_rows);
}

void Run::run_generator(const Table& real, const Table& fit_table, GeneratorKind kind,
                        std::vector<std::pair<std::string, QualityReport>>& qualities,
                        std::string& best_rows) {
  const std::string g(to_string(kind));

  begin("fit:" + g);
  GeneratorConfig gc = config_.generator;
  gc.kind = kind;
  gc.seed = seed_for("fit:" + g);
  const auto model = fit_generator(fit_table, gc);
  write("model_" + g + ".vxgen", serialize_model(model));

  begin("sample:" + g);
  SampleStats stats;
  const Table synth = sample_by_class(model, config_.counts_for(kind), seed_for("sample:" + g), &stats);
  write("synthetic_" + g + ".csv", table_csv(synth));

  begin("quality:" + g);
  const auto quality = quality_score(fit_table, synth);
  if (log_) log_(fmt::format("  quality {:.2f}%", 100.0 * quality.overall));
  write("quality_" + g + ".json", render(quality, ReportFormat::json));
  write("quality_" + g + ".csv", render(quality, ReportFormat::csv));
  qualities.emplace_back(g, quality);

  begin("rfe:" + g);
  const auto ranking = rfe_rank(synth, config_.rfe_params, seed_for("rfe:" + g));
  write("ranking_" + g + ".json", ranking.to_json().dump(2) + "\n");

  begin("sweep:" + g);
  SweepOptions so;
  so.k_min = config_.k_min;
  so.k_max = config_.k_max;
  so.max_d = config_.max_d;
  so.kind = config_.classifier;
  so.params = config_.classifier_params;
  so.protocol = config_.protocol;
  so.real = &fit_table;
  so.threads = config_.threads;
  const auto grid = sweep(synth, ranking, so, seed_for("sweep:" + g));
  const auto best = best_config(grid);
  if (log_) log_(fmt::format("  best k={} d={} f1={:.4f}", best.k, best.d, best.f1));
  write("eval_grid_" + g + ".csv", render(grid, ReportFormat::csv));
  write("eval_grid_" + g + ".json", render(grid, ReportFormat::json));
  write("eval_grid_" + g + ".svg", render(grid, ReportFormat::svg));

  begin("final:" + g);
  const auto features = ranking.subset(best.d);
  Matrix x = feature_matrix(synth, features);
  auto y = synth.labels();
  if (config_.protocol == CvProtocol::augmented) {
    const Matrix xr = feature_matrix(fit_table, features);
    Matrix both(x.rows() + xr.rows(), x.cols());
    both << x, xr;
    x = std::move(both);
    const auto yr = fit_table.labels();
    y.insert(y.end(), yr.begin(), yr.end());
  }
  const auto classifier = fit_classifier(config_.classifier, x, y, features, config_.classifier_params,
                                         seed_for("final:" + g));
  write("classifier_" + g + ".vxclf", serialize_classifier(classifier));
  best_rows += fmt::format("{},{},{},{},{}\n", g, best.k, best.d, best.f1, fmt::join(features, ";"));

  begin("explain:" + g);
  const auto influence = influence_report(classifier, real, config_.attribution,
                                          seed_for("explain:" + g), &synth, config_.influence);
  write("influence_" + g + ".json", render(influence, ReportFormat::json));
  write("influence_" + g + ".svg", render(influence, ReportFormat::svg));
}

void prepare_output(const RunConfig& config) {
  if (config.output.empty()) throw ConfigError("no output directory given");
  if (fs::exists(config.output) && !fs::is_directory(config.output)) {
    throw ConfigError(fmt::format("output '{}' is not a directory", config.output.string()));
  }
  if (fs::exists(config.output) && !fs::is_empty(config.output)) {
    if (!config.overwrite) {
      throw ConfigError(fmt::format("output directory '{}' is not empty (set overwrite to replace it)",
                                    config.output.string()));
    }
    for (const auto& e : fs::directory_iterator(config.output)) {
      if (!e.is_regular_file()) {
        throw ConfigError(fmt::format("output directory '{}' holds '{}', which is not a plain file",
                                      config.output.string(), e.path().filename().string()));
      }
    }
    for (const auto& e : fs::directory_iterator(config.output)) fs::remove(e.path());
  }
  fs::create_directories(config.output);
}

}  // namespace

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> out;
    const RunConfig defaults;
    for (const auto& k : key_specs()) out.push_back({k.name, k.show(defaults), k.help});
    return out;
  }();
  return keys;
}

KeyValues parse_config_text(std::string_view text) {
  KeyValues out;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto end = text.find('\n', start);
    std::string_view line = text.substr(start, end == std::string_view::npos ? text.size() - start : end - start);
    ++line_no;
    start = end == std::string_view::npos ? text.size() + 1 : end + 1;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    const auto body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(fmt::format("config line {}: expected 'key = value'", line_no));
    }
    const auto key = trim(std::string_view(body).substr(0, eq));
    const auto value = trim(std::string_view(body).substr(eq + 1));
    if (!find_key(key)) throw ConfigError(fmt::format("config line {}: unknown key '{}'", line_no, key));
    if (!out.emplace(key, value).second) {
      throw ConfigError(fmt::format("config line {}: key '{}' repeated", line_no, key));
    }
  }
  return out;
}

KeyValues load_config_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot read config '{}'", path.string()));
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_config_text(text);
}

ClassCounts RunConfig::counts_for(GeneratorKind kind) const {
  return counts ? *counts : preset_counts(counts_preset, kind);
}

RunConfig make_run_config(const KeyValues& file, const KeyValues& flags, const char* env_seed) {
  RunConfig c;
  auto apply = [&](const KeyValues& kv) {
    for (const auto& [key, value] : kv) {
      const auto* spec = find_key(key);
      if (!spec) throw ConfigError(fmt::format("unknown key '{}'", key));
      spec->apply(c, value);
    }
  };
  apply(file);
  if (file.count("seed")) c.seed_source = "config";
  if (env_seed != nullptr) {
    c.seed = parse_u64("VOXSYNTH_SEED", env_seed);
    c.seed_source = "env";
  }
  apply(flags);
  if (flags.count("seed")) c.seed_source = "flag";
  if (c.k_min < 2 || c.k_max < c.k_min) {
    throw ConfigError(fmt::format("fold range {}..{} is invalid (need 2 <= k_min <= k_max)", c.k_min, c.k_max));
  }
  c.generator.validate();
  return c;
}

std::string to_config_text(const RunConfig& config) { return canonical_text(config, true); }

std::string config_hash(const RunConfig& config) { return sha256_hex(canonical_text(config, false)); }

std::uint64_t stage_seed(std::uint64_t master, std::string_view stage) {
  return derive_seed(master, stage);
}

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorClass::data, "SHA-256 computation failed");
  }
  std::string out;
  for (unsigned int i = 0; i < len; ++i) out += fmt::format("{:02x}", digest[i]);
  return out;
}

nlohmann::json RunManifest::to_json() const {
  nlohmann::json fs_list = nlohmann::json::array();
  for (const auto& f : files) fs_list.push_back({{"path", f.path}, {"sha256", f.sha256}, {"bytes", f.bytes}});
  return {{"tool", tool},
          {"version", version},
          {"config_hash", config_hash},
          {"started", started},
          {"finished", finished},
          {"status", status},
          {"failed_stage", failed_stage},
          {"error", error},
          {"seed", seed},
          {"seed_source", seed_source},
          {"stage_seeds", stage_seeds},
          {"files", fs_list}};
}

RunManifest RunManifest::from_json(const nlohmann::json& j) {
  RunManifest m;
  m.tool = j.at("tool").get<std::string>();
  m.version = j.at("version").get<std::string>();
  m.config_hash = j.at("config_hash").get<std::string>();
  m.started = j.at("started").get<std::string>();
  m.finished = j.at("finished").get<std::string>();
  m.status = j.at("status").get<std::string>();
  m.failed_stage = j.at("failed_stage").get<std::string>();
  m.error = j.at("error").get<std::string>();
  m.seed = j.at("seed").get<std::uint64_t>();
  m.seed_source = j.at("seed_source").get<std::string>();
  m.stage_seeds = j.at("stage_seeds").get<std::map<std::string, std::uint64_t>>();
  for (const auto& f : j.at("files")) {
    m.files.push_back({f.at("path").get<std::string>(), f.at("sha256").get<std::string>(),
                       f.at("bytes").get<std::uint64_t>()});
  }
  return m;
}

int exit_code_for(const std::exception& e) {
  if (const auto* err = dynamic_cast<const Error*>(&e)) {
    switch (err->error_class()) {
      case ErrorClass::config:
        return 2;
      case ErrorClass::data:
        return 3;
      case ErrorClass::numerical:
        return 4;
    }
  }
  return 1;
}

Table ingest(const fs::path& path) { return load_csv(path, parkinsons_schema(true)); }

RunOutcome run_pipeline(const RunConfig& config, const LogFn& log) {
  prepare_output(config);
  Run run(config, log);
  auto& m = run.manifest();
  m.config_hash = config_hash(config);
  m.seed = config.seed;
  m.seed_source = config.seed_source;
  m.started = utc_now();

  RunOutcome outcome;
  try {
    run.execute();
    m.status = "complete";
  } catch (const std::exception& e) {
    m.status = "failed";
    m.failed_stage = run.stage();
    m.error = e.what();
    outcome.exit_code = m.files.empty() ? exit_code_for(e) : 5;
    outcome.message = fmt::format("stage {} failed: {}", run.stage(), e.what());
  }
  m.finished = utc_now();
  write_text_file(config.output / "manifest.json", m.to_json().dump(2) + "\n");
  outcome.manifest = m;
  return outcome;
}

}  // namespace voxsynth
