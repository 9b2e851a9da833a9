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


// voxsynth command-line tool.

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "CLI11.hpp"
#include "json.hpp"
#include "voxsynth/attribution.hpp"
#include "voxsynth/classifiers.hpp"
#include "voxsynth/error.hpp"
#include "voxsynth/generators.hpp"
#include "voxsynth/pipeline.hpp"
#include "voxsynth/quality.hpp"
#include "voxsynth/report.hpp"
#include "voxsynth/selection.hpp"
#include "voxsynth/table.hpp"
#include "voxsynth/verify.hpp"

namespace fs = std::filesystem;
using namespace voxsynth;

namespace {

// Values given on the command line for config keys, by key name.
struct KeyFlags {
  KeyValues values;
  std::optional<fs::path> config_file;

  RunConfig resolve() const {
    const KeyValues file = config_file ? load_config_file(*config_file) : KeyValues{};
    return make_run_config(file, values, std::getenv("VOXSYNTH_SEED"));
  }
};

void add_key_flags(CLI::App* app, KeyFlags& flags, const std::set<std::string>& only = {}) {
  for (const auto& key : config_keys()) {
    if (!only.empty() && only.count(key.name) == 0) continue;
    auto* opt = app->add_option_function<std::string>(
        "--" + key.name, [&flags, name = key.name](const std::string& v) { flags.values[name] = v; },
        fmt::format("{} (default: {})", key.help, key.default_value.empty() ? "none" : key.default_value));
    opt->type_name("VALUE");
  }
}

const std::set<std::string> kGeneratorKeys{"epochs",        "batch_size", "embedding_dim", "hidden",
                                           "pac",           "gp_weight",  "max_modes",     "gumbel_tau",
                                           "condition_retry_cap", "seed"};
const std::set<std::string> kClassifierKeys{"classifier", "n_trees", "max_depth", "seed"};

// Accepts the UCI file (with recording names) or a table written by this
// tool (no group column).
Table load_table(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(fmt::format("cannot open '{}'", path.string()));
  std::string header;
  std::getline(in, header);
  std::stringstream cells(header);
  bool grouped = false;
  for (std::string cell; std::getline(cells, cell, ',');) {
    const auto first = cell.find_first_not_of(" \t\r\"");
    const auto last = cell.find_last_not_of(" \t\r\"");
    if (first != std::string::npos && cell.substr(first, last - first + 1) == "name") grouped = true;
  }
  return load_csv(path, parkinsons_schema(grouped));
}

// Writes to `out` (format from its extension) or prints to stdout.
template <typename Artifact>
void emit(const Artifact& artifact, const std::optional<fs::path>& out, ReportFormat fallback) {
  if (out) {
    emit_report(artifact, format_for_path(*out), *out);
  } else {
    std::cout << render(artifact, fallback);
  }
}

void log_line(std::string_view line) { std::cerr << line << '\n'; }

// ---------------------------------------------------------------------------

int cmd_ingest(const fs::path& input, bool json) {
  const Table t = load_table(input);
  const auto summary = summarize(t);
  if (json) {
    nlohmann::json j;
    j["rows"] = t.num_rows();
    for (const auto& s : summary) {
      nlohmann::json c{{"name", s.name}, {"kind", std::string(to_string(s.kind))}, {"count", s.count}};
      if (s.kind == ColumnKind::continuous) {
        c["mean"] = s.mean;
        c["std"] = s.std;
        c["min"] = s.min;
        c["max"] = s.max;
      } else {
        c["frequencies"] = s.frequencies;
      }
      j["columns"].push_back(c);
    }
    std::cout << j.dump(2) << '\n';
    return 0;
  }
  fmt::print("{} rows, {} columns\n", t.num_rows(), t.num_columns());
  fmt::print("{:<22} {:>6} {:>12} {:>12} {:>12} {:>12}\n", "column", "count", "mean", "std", "min", "max");
  for (const auto& s : summary) {
    if (s.kind == ColumnKind::continuous) {
      fmt::print("{:<22} {:>6} {:>12.6g} {:>12.6g} {:>12.6g} {:>12.6g}\n", s.name, s.count, s.mean, s.std, s.min,
                 s.max);
    } else {
      std::vector<std::string> freq;
      for (const auto& [k, v] : s.frequencies) freq.push_back(fmt::format("{}={}", k, v));
      fmt::print("{:<22} {:>6} {}\n", s.name, s.count, fmt::join(freq, " "));
    }
  }
  return 0;
}

int cmd_heatmap(const fs::path& input, const std::string& cls, const std::string& method,
                const std::optional<fs::path>& out) {
  std::optional<int> filter;
  if (cls == "healthy") filter = 0;
  else if (cls == "patient") filter = 1;
  else if (cls != "all") throw ConfigError(fmt::format("--class: expected all, healthy or patient, got '{}'", cls));
  CorrelationMethod m = CorrelationMethod::pearson;
  if (method == "spearman") m = CorrelationMethod::spearman;
  else if (method != "pearson") throw ConfigError(fmt::format("--method: expected pearson or spearman, got '{}'", method));
  emit(correlation_matrix(load_table(input), filter, m), out, ReportFormat::csv);
  return 0;
}

struct SynthArgs {
  std::optional<fs::path> input;
  std::optional<fs::path> model_in;
  std::optional<fs::path> model_out;
  std::optional<fs::path> out;
  std::string kind = "tvae";
  std::optional<std::size_t> n_healthy;
  std::optional<std::size_t> n_patient;
  std::string preset = "paper2023";
};

int cmd_synth(const SynthArgs& a, const KeyFlags& flags) {
  if (a.input.has_value() == a.model_in.has_value()) {
    throw ConfigError("give exactly one of --input (fit a model) or --model (load one)");
  }
  if (a.n_healthy.has_value() != a.n_patient.has_value()) {
    throw ConfigError("--n-healthy and --n-patient go together");
  }
  const RunConfig rc = flags.resolve();
  const auto kind = parse_generator_kind(a.kind);
  GeneratorModel model;
  if (a.input) {
    GeneratorConfig gc = rc.generator;
    gc.kind = kind;
    gc.seed = stage_seed(rc.seed, "fit:" + a.kind);
    log_line(fmt::format("fitting {} ({} epochs)", a.kind, gc.epochs));
    model = fit_generator(load_table(*a.input), gc);
    if (a.model_out) save_model(model, *a.model_out);
  } else {
    model = load_model(*a.model_in);
  }
  if (!a.out) {
    if (!a.model_out) throw ConfigError("nothing to write: give --out and/or --model-out");
    return 0;
  }
  const ClassCounts counts = a.n_healthy ? ClassCounts{*a.n_healthy, *a.n_patient}
                                         : preset_counts(a.preset, model.config.kind);
  SampleStats stats;
  const Table synth = sample_by_class(model, counts, stage_seed(rc.seed, "sample:" + std::string(to_string(model.config.kind))), &stats);
  save_csv(synth, *a.out);
  log_line(fmt::format("wrote {} rows ({} healthy, {} patient)", synth.num_rows(), counts.healthy, counts.patient));
  return 0;
}

int cmd_quality(const fs::path& real, const fs::path& synth, const std::optional<fs::path>& out) {
  const auto report = quality_score(load_table(real).without_group(), load_table(synth).without_group());
  log_line(fmt::format("column shapes {:.2f}%, column pair trends {:.2f}%, overall {:.2f}%",
                       100 * report.column_shapes_mean, 100 * report.column_pair_trends_mean, 100 * report.overall));
  emit(report, out, ReportFormat::json);
  return 0;
}

struct SelectArgs {
  fs::path input;
  std::optional<fs::path> real;
  std::optional<fs::path> ranking_out;
  std::optional<fs::path> out;
};

int cmd_select(const SelectArgs& a, const KeyFlags& flags) {
  const RunConfig rc = flags.resolve();
  const Table synth = load_table(a.input);
  std::optional<Table> real;
  if (a.real) real = load_table(*a.real);
  const auto ranking = rfe_rank(synth, rc.rfe_params, stage_seed(rc.seed, "rfe"));
  if (a.ranking_out) write_text_file(*a.ranking_out, ranking.to_json().dump(2) + "\n");
  SweepOptions so;
  so.k_min = rc.k_min;
  so.k_max = rc.k_max;
  so.max_d = rc.max_d;
  so.kind = rc.classifier;
  so.params = rc.classifier_params;
  so.protocol = rc.protocol;
  so.real = real ? &*real : nullptr;
  so.threads = rc.threads;
  const auto grid = sweep(synth, ranking, so, stage_seed(rc.seed, "sweep"));
  const auto best = best_config(grid);
  log_line(fmt::format("best k={} d={} f1={:.4f} features={}", best.k, best.d, best.f1,
                       fmt::join(ranking.subset(best.d), ",")));
  emit(grid, a.out, ReportFormat::csv);
  return 0;
}

struct TrainArgs {
  fs::path input;
  std::optional<fs::path> ranking;
  std::optional<std::size_t> d;
  std::vector<std::string> features;
  std::optional<fs::path> test;
  fs::path model_out;
};

int cmd_train(const TrainArgs& a, const KeyFlags& flags) {
  const RunConfig rc = flags.resolve();
  const Table train = load_table(a.input);
  std::vector<std::string> features = a.features;
  if (a.ranking) {
    if (!features.empty()) throw ConfigError("give either --ranking or --features, not both");
    std::ifstream in(*a.ranking);
    if (!in) throw ParseError(fmt::format("cannot open '{}'", a.ranking->string()));
    const auto ranking = RfeRanking::from_json(nlohmann::json::parse(in));
    features = ranking.subset(a.d.value_or(ranking.size()));
  } else if (a.d) {
    throw ConfigError("--d needs --ranking");
  }
  if (features.empty()) features = train.schema().feature_names();
  const auto model = fit_classifier(rc.classifier, feature_matrix(train, features), train.labels(), features,
                                    rc.classifier_params, stage_seed(rc.seed, "final"));
  save_classifier(model, a.model_out);
  log_line(fmt::format("{} on {} rows, {} features", to_string(rc.classifier), train.num_rows(), features.size()));
  if (a.test) {
    const Table test = load_table(*a.test);
    const auto m = evaluate(test.labels(), predict(model, model_inputs(model, test)));
    fmt::print("accuracy {:.4f} precision {:.4f} recall {:.4f} f1 {:.4f} (tp {} fp {} fn {} tn {})\n", m.accuracy,
               m.precision, m.recall, m.f1, m.tp, m.fp, m.fn, m.tn);
  }
  return 0;
}

struct ExplainArgs {
  fs::path model;
  fs::path input;
  std::optional<fs::path> background;
  std::optional<fs::path> out;
};

int cmd_explain(const ExplainArgs& a, const KeyFlags& flags) {
  const RunConfig rc = flags.resolve();
  const auto model = load_classifier(a.model);
  const Table test = load_table(a.input);
  std::optional<Table> background;
  if (a.background) background = load_table(*a.background);
  const auto report = influence_report(model, test, rc.attribution, stage_seed(rc.seed, "explain"),
                                       background ? &*background : nullptr, rc.influence);
  auto by_rank = report.features;
  std::sort(by_rank.begin(), by_rank.end(), [](const auto& a, const auto& b) { return a.rank < b.rank; });
  for (const auto& f : by_rank) {
    log_line(fmt::format("{:>3}  {:<22} {:.6g}", f.rank, f.feature, f.mean_abs));
  }
  emit(report, a.out, ReportFormat::json);
  return 0;
}

int cmd_run(const KeyFlags& flags) {
  const RunConfig rc = flags.resolve();
  log_line(fmt::format("voxsynth {} seed {} ({}) -> {}", kToolVersion, rc.seed, rc.seed_source, rc.output.string()));
  const auto outcome = run_pipeline(rc, log_line);
  if (outcome.exit_code != 0) {
    std::cerr << "error: " << outcome.message << '\n';
  } else {
    log_line(fmt::format("done: {} files", outcome.manifest.files.size()));
  }
  return outcome.exit_code;
}

int print_checks(const std::vector<CheckResult>& results) {
  bool ok = true;
  for (const auto& r : results) {
    fmt::print("{} {:<24} {:>7.2f}s  {}\n", r.passed ? "PASS" : "FAIL", r.name, r.seconds, r.detail);
    ok = ok && r.passed;
  }
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Synthetic voice-feature data, fidelity scoring and classifier benchmarking", "voxsynth"};
  app.set_version_flag("--version", std::string(kToolVersion));
  app.require_subcommand(1);

  std::vector<std::function<int()>> actions;

  // ingest
  fs::path ingest_input;
  bool ingest_json = false;
  auto* ingest = app.add_subcommand("ingest", "Validate a voice CSV and print column summaries");
  ingest->add_option("input", ingest_input, "CSV file")->required();
  ingest->add_flag("--json", ingest_json, "Print JSON instead of a table");
  ingest->callback([&] { actions.push_back([&] { return cmd_ingest(ingest_input, ingest_json); }); });

  // heatmap
  fs::path heat_input;
  std::string heat_class = "all", heat_method = "pearson";
  std::optional<fs::path> heat_out;
  auto* heatmap = app.add_subcommand("heatmap", "Feature correlation matrix as CSV or SVG");
  heatmap->add_option("input", heat_input, "CSV file")->required();
  heatmap->add_option("--class", heat_class, "all, healthy or patient")->capture_default_str();
  heatmap->add_option("--method", heat_method, "pearson or spearman")->capture_default_str();
  heatmap->add_option("--out", heat_out, "Output file (.csv or .svg); stdout CSV when omitted");
  heatmap->callback([&] { actions.push_back([&] { return cmd_heatmap(heat_input, heat_class, heat_method, heat_out); }); });

  // synth
  SynthArgs synth_args;
  KeyFlags synth_flags;
  auto* synth = app.add_subcommand("synth", "Fit a generator and/or sample a synthetic table");
  synth->add_option("--input", synth_args.input, "Training CSV (fits a new model)");
  synth->add_option("--model", synth_args.model_in, "Existing model file to sample from");
  synth->add_option("--model-out", synth_args.model_out, "Where to save the fitted model");
  synth->add_option("--kind", synth_args.kind, "tvae, ctgan or copulagan")->capture_default_str();
  synth->add_option("--n-healthy", synth_args.n_healthy, "Healthy rows to sample");
  synth->add_option("--n-patient", synth_args.n_patient, "Patient rows to sample");
  synth->add_option("--preset", synth_args.preset, "Per-class count preset")->capture_default_str();
  synth->add_option("--out", synth_args.out, "Synthetic CSV output");
  synth->add_option("--config", synth_flags.config_file, "Config file");
  add_key_flags(synth, synth_flags, kGeneratorKeys);
  synth->callback([&] { actions.push_back([&] { return cmd_synth(synth_args, synth_flags); }); });

  // quality
  fs::path q_real, q_synth;
  std::optional<fs::path> q_out;
  auto* quality = app.add_subcommand("quality", "Score a synthetic table against the real one");
  quality->add_option("--real", q_real, "Real CSV")->required();
  quality->add_option("--synthetic", q_synth, "Synthetic CSV")->required();
  quality->add_option("--out", q_out, "Report file (.json or .csv); stdout JSON when omitted");
  quality->callback([&] { actions.push_back([&] { return cmd_quality(q_real, q_synth, q_out); }); });

  // select
  SelectArgs sel_args;
  KeyFlags sel_flags;
  auto* select = app.add_subcommand("select", "RFE ranking plus the k-fold x feature-count F1 sweep");
  select->add_option("--input", sel_args.input, "Table to rank and cross-validate on")->required();
  select->add_option("--real", sel_args.real, "Real CSV (augmented and tstr protocols)");
  select->add_option("--ranking-out", sel_args.ranking_out, "Ranking JSON output");
  select->add_option("--out", sel_args.out, "Grid output (.csv, .json or .svg); stdout CSV when omitted");
  select->add_option("--config", sel_flags.config_file, "Config file");
  add_key_flags(select, sel_flags,
                {"classifier", "n_trees", "max_depth", "rfe_trees", "k_min", "k_max", "max_d", "protocol", "seed", "threads"});
  select->callback([&] { actions.push_back([&] { return cmd_select(sel_args, sel_flags); }); });

  // train
  TrainArgs train_args;
  KeyFlags train_flags;
  auto* train = app.add_subcommand("train", "Fit a classifier on selected features");
  train->add_option("--input", train_args.input, "Training CSV")->required();
  train->add_option("--ranking", train_args.ranking, "Ranking JSON from `select`");
  train->add_option("--d", train_args.d, "Number of top-ranked features to keep");
  train->add_option("--features", train_args.features, "Explicit feature names")->delimiter(',');
  train->add_option("--test", train_args.test, "CSV to report metrics on");
  train->add_option("--model-out", train_args.model_out, "Classifier model output")->required();
  train->add_option("--config", train_flags.config_file, "Config file");
  add_key_flags(train, train_flags, kClassifierKeys);
  train->callback([&] { actions.push_back([&] { return cmd_train(train_args, train_flags); }); });

  // explain
  ExplainArgs ex_args;
  KeyFlags ex_flags;
  auto* explain = app.add_subcommand("explain", "Feature influence of a trained classifier");
  explain->add_option("--model", ex_args.model, "Classifier model file")->required();
  explain->add_option("--input", ex_args.input, "Rows to explain")->required();
  explain->add_option("--background", ex_args.background, "Background table (required for shapley)");
  explain->add_option("--out", ex_args.out, "Report file (.json or .svg); stdout JSON when omitted");
  explain->add_option("--config", ex_flags.config_file, "Config file");
  add_key_flags(explain, ex_flags, {"attribution", "repeats", "n_permutations", "background_cap", "seed"});
  explain->callback([&] { actions.push_back([&] { return cmd_explain(ex_args, ex_flags); }); });

  // run
  KeyFlags run_flags;
  auto* run = app.add_subcommand("run", "Full pipeline into an output directory");
  run->add_option("--config", run_flags.config_file, "Config file (key = value lines)");
  add_key_flags(run, run_flags);
  run->footer("VOXSYNTH_SEED overrides the config file seed; flags override both.");
  run->callback([&] { actions.push_back([&] { return cmd_run(run_flags); }); });

  // verify
  std::optional<fs::path> verify_input, verify_run;
  auto* verify = app.add_subcommand("verify", "Run the invariant suite, or check a finished run directory");
  verify->add_option("--input", verify_input, "Corpus for the determinism check (a fixture is generated otherwise)");
  verify->add_option("--run", verify_run, "Run directory to check against its manifest");
  verify->callback([&] {
    actions.push_back([&] {
      if (verify_run) return print_checks(verify_run_directory(*verify_run));
      VerifyOptions options;
      options.input = verify_input;
      return print_checks(run_invariant_suite(options));
    });
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    int code = 0;
    for (const auto& action : actions) code = action();
    return code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e);
  }
}
