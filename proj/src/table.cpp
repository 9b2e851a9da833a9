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

#include "voxsynth/table.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <fmt/format.h>

#include "voxsynth/error.hpp"
#include "voxsynth/format.hpp"
#include "voxsynth/rng.hpp"

namespace voxsynth {

std::string_view to_string(ColumnKind kind) {
  return kind == ColumnKind::continuous ? "continuous" : "discrete";
}

std::optional<std::size_t> Schema::find(std::string_view name) const {
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i].name == name) return i;
  }
  return std::nullopt;
}

std::size_t Schema::index_of(std::string_view name) const {
  if (auto i = find(name)) return *i;
  throw SchemaMismatch(fmt::format("column '{}' not in schema", name));
}

std::vector<std::size_t> Schema::feature_indices() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < columns.size(); ++i) {
    const auto& c = columns[i];
    if (c.kind != ColumnKind::continuous) continue;
    if (c.name == target_column) continue;
    if (group_column && c.name == *group_column) continue;
    out.push_back(i);
  }
  return out;
}

std::vector<std::string> Schema::feature_names() const {
  std::vector<std::string> out;
  for (auto i : feature_indices()) out.push_back(columns[i].name);
  return out;
}

void Schema::validate() const {
  std::unordered_set<std::string> seen;
  for (const auto& c : columns) {
    if (c.name.empty()) throw SchemaMismatch("empty column name");
    if (!seen.insert(c.name).second) {
      throw SchemaMismatch(fmt::format("duplicate column '{}'", c.name));
    }
  }
  if (!target_column.empty() && !find(target_column)) {
    throw SchemaMismatch(
        fmt::format("target column '{}' not in schema", target_column));
  }
  if (!target_column.empty() &&
      columns[*find(target_column)].kind != ColumnKind::discrete) {
    throw SchemaMismatch("target column must be discrete");
  }
  if (group_column && !find(*group_column)) {
    throw SchemaMismatch(
        fmt::format("group column '{}' not in schema", *group_column));
  }
}

std::string Schema::fingerprint() const {
  std::string text;
  for (const auto& c : columns) {
    text += c.name;
    text += ':';
    text += to_string(c.kind);
    for (const auto& cat : c.categories) {
      text += '|';
      text += cat;
    }
    text += ';';
  }
  text += "target=" + target_column;
  if (group_column) text += ";group=" + *group_column;
  return fmt::format("{:016x}", fnv1a64(text));
}

Schema Schema::without_group() const {
  Schema out = *this;
  if (!group_column) return out;
  auto it = std::find_if(out.columns.begin(), out.columns.end(),
                         [&](const Column& c) { return c.name == *group_column; });
  if (it != out.columns.end()) out.columns.erase(it);
  out.group_column.reset();
  return out;
}

namespace {

struct FeatureDoc {
  const char* name;
  const char* uci;
  const char* unit;
};

// Canonical order of the 22 voice features.
constexpr FeatureDoc kVoiceFeatures[] = {
    {"mdvp_fo_hz", "MDVP:Fo(Hz)", "Average vocal fundamental frequency"},
    {"mdvp_fhi_hz", "MDVP:Fhi(Hz)", "Maximum vocal fundamental frequency"},
    {"mdvp_flo_hz", "MDVP:Flo(Hz)", "Minimum vocal fundamental frequency"},
    {"mdvp_jitter", "MDVP:Jitter(%)", "Jitter in percentage"},
    {"mdvp_jitter_abs", "MDVP:Jitter(Abs)", "Absolute jitter in ms"},
    {"mdvp_rap", "MDVP:RAP", "Relative amplitude perturbation"},
    {"mdvp_ppq", "MDVP:PPQ", "Five-point period perturbation quotient"},
    {"jitter_ddp", "Jitter:DDP",
     "Average absolute difference of differences between jitter cycles"},
    {"mdvp_shimmer", "MDVP:Shimmer", "Local shimmer"},
    {"mdvp_shimmer_db", "MDVP:Shimmer(dB)", "Local shimmer in dB"},
    {"shimmer_apq3", "Shimmer:APQ3", "Three-point amplitude perturbation quotient"},
    {"shimmer_apq5", "Shimmer:APQ5", "Five-point amplitude perturbation quotient"},
    {"mdvp_apq", "MDVP:APQ", "11-point amplitude perturbation quotient"},
    {"shimmer_dda", "Shimmer:DDA",
     "Average absolute differences between the amplitudes of consecutive "
     "periods"},
    {"nhr", "NHR", "Noise-to-harmonics ratio"},
    {"hnr", "HNR", "Harmonics-to-noise ratio"},
    {"rpde", "RPDE", "Recurrence period density entropy measure"},
    {"dfa", "DFA",
     "Signal fractal scaling exponent of detrended fluctuation analysis"},
    {"spread1", "spread1", "Nonlinear measure of fundamental frequency variation"},
    {"spread2", "spread2", "Nonlinear measure of fundamental frequency variation"},
    {"d2", "D2", "Correlation dimension"},
    {"ppe", "PPE", "Pitch period entropy"},
};

std::string generic_snake_case(std::string_view header) {
  std::string out;
  bool pending_sep = false;
  for (char ch : header) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c)) {
      if (pending_sep && !out.empty()) out += '_';
      pending_sep = false;
      out += static_cast<char>(std::tolower(c));
    } else {
      pending_sep = true;
    }
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(trim(line.substr(start)));
      break;
    }
    out.push_back(trim(line.substr(start, pos - start)));
    start = pos + 1;
  }
  return out;
}

}  // namespace

Schema parkinsons_schema(bool with_group) {
  Schema schema;
  for (const auto& f : kVoiceFeatures) {
    schema.columns.push_back({f.name, ColumnKind::continuous, f.unit, {}});
  }
  schema.columns.push_back({"status", ColumnKind::discrete,
                            "0 healthy, 1 patient", {"0", "1"}});
  schema.target_column = "status";
  if (with_group) {
    schema.columns.push_back(
        {"name", ColumnKind::discrete, "recording id", {}});
    schema.group_column = "name";
  }
  return schema;
}

const std::vector<std::pair<std::string, std::string>>& uci_header_aliases() {
  static const auto aliases = [] {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& f : kVoiceFeatures) out.emplace_back(f.uci, f.name);
    out.emplace_back("status", "status");
    out.emplace_back("name", "name");
    return out;
  }();
  return aliases;
}

std::string canonical_column_name(std::string_view header) {
  header = trim(header);
  for (const auto& [alias, canonical] : uci_header_aliases()) {
    if (alias == header) return canonical;
  }
  return generic_snake_case(header);
}

std::string subject_from_recording(std::string_view recording) {
  const auto pos = recording.rfind('_');
  if (pos == std::string_view::npos || pos + 1 == recording.size()) {
    return std::string(recording);
  }
  const auto suffix = recording.substr(pos + 1);
  const bool digits = std::all_of(suffix.begin(), suffix.end(), [](char c) {
    return std::isdigit(static_cast<unsigned char>(c)) != 0;
  });
  return digits ? std::string(recording.substr(0, pos)) : std::string(recording);
}

// ---------------------------------------------------------------- Table

Table::Table(Schema schema, std::vector<std::vector<double>> columns)
    : schema_(std::move(schema)), columns_(std::move(columns)) {
  schema_.validate();
  if (columns_.size() != schema_.columns.size()) {
    throw ShapeError(fmt::format("table has {} columns, schema has {}",
                                 columns_.size(), schema_.columns.size()));
  }
  rows_ = columns_.empty() ? 0 : columns_.front().size();
  for (std::size_t c = 0; c < columns_.size(); ++c) {
    const auto& col = schema_.columns[c];
    if (columns_[c].size() != rows_) {
      throw ShapeError(fmt::format("column '{}' has {} rows, expected {}",
                                   col.name, columns_[c].size(), rows_));
    }
    for (std::size_t r = 0; r < rows_; ++r) {
      const double v = columns_[c][r];
      if (!std::isfinite(v)) {
        throw ParseError(fmt::format("row {}, column '{}': non-finite value", r,
                                     col.name));
      }
      if (col.kind == ColumnKind::discrete) {
        const double k = std::round(v);
        if (k != v || k < 0 || k >= static_cast<double>(col.categories.size())) {
          throw ParseError(fmt::format(
              "row {}, column '{}': invalid category code {}", r, col.name, v));
        }
      }
    }
  }
}

Table Table::from_rows(Schema schema,
                       const std::vector<std::vector<double>>& rows) {
  std::vector<std::vector<double>> columns(schema.columns.size());
  for (auto& c : columns) c.reserve(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != schema.columns.size()) {
      throw ShapeError(fmt::format("row {} has {} cells, expected {}", r,
                                   rows[r].size(), schema.columns.size()));
    }
    for (std::size_t c = 0; c < columns.size(); ++c) columns[c].push_back(rows[r][c]);
  }
  return Table(std::move(schema), std::move(columns));
}

std::span<const double> Table::column(std::size_t index) const {
  if (index >= columns_.size()) {
    throw IndexError(fmt::format("column index {} out of range", index));
  }
  return columns_[index];
}

std::span<const double> Table::column(std::string_view name) const {
  return columns_[schema_.index_of(name)];
}

std::vector<double> Table::row(std::size_t r) const {
  std::vector<double> out(columns_.size());
  for (std::size_t c = 0; c < columns_.size(); ++c) out[c] = columns_[c][r];
  return out;
}

std::vector<int> Table::labels() const {
  const auto& col = columns_[schema_.target_index()];
  std::vector<int> out(col.size());
  for (std::size_t i = 0; i < col.size(); ++i) out[i] = static_cast<int>(col[i]);
  return out;
}

std::vector<std::string> Table::group_ids() const {
  if (!schema_.group_column) throw SchemaMismatch("table has no group column");
  const auto g = schema_.index_of(*schema_.group_column);
  const auto& cats = schema_.columns[g].categories;
  std::vector<std::string> out(rows_);
  for (std::size_t r = 0; r < rows_; ++r) {
    out[r] = subject_from_recording(cats[static_cast<std::size_t>(columns_[g][r])]);
  }
  return out;
}

std::string Table::cell_text(std::size_t row, std::size_t col) const {
  const auto& c = schema_.columns[col];
  const double v = columns_[col][row];
  if (c.kind == ColumnKind::discrete) return c.categories[static_cast<std::size_t>(v)];
  return format_double(v);
}

Table Table::select_rows(std::span<const std::size_t> indices) const {
  std::vector<std::vector<double>> cols(columns_.size());
  for (std::size_t c = 0; c < columns_.size(); ++c) {
    cols[c].reserve(indices.size());
    for (auto r : indices) {
      if (r >= rows_) throw IndexError(fmt::format("row index {} out of range", r));
      cols[c].push_back(columns_[c][r]);
    }
  }
  Table out;
  out.schema_ = schema_;
  out.columns_ = std::move(cols);
  out.rows_ = indices.size();
  return out;
}

Table Table::select_columns(std::span<const std::string> names) const {
  Schema schema;
  std::vector<std::vector<double>> cols;
  for (const auto& name : names) {
    const auto i = schema_.index_of(name);
    schema.columns.push_back(schema_.columns[i]);
    cols.push_back(columns_[i]);
  }
  if (schema.find(schema_.target_column)) schema.target_column = schema_.target_column;
  if (schema_.group_column && schema.find(*schema_.group_column)) {
    schema.group_column = schema_.group_column;
  }
  schema.validate();
  Table out;
  out.schema_ = std::move(schema);
  out.columns_ = std::move(cols);
  out.rows_ = rows_;
  return out;
}

Table Table::without_group() const {
  if (!schema_.group_column) return *this;
  std::vector<std::string> keep;
  for (const auto& c : schema_.columns) {
    if (c.name != *schema_.group_column) keep.push_back(c.name);
  }
  return select_columns(keep);
}

Table Table::with_column(std::size_t index, std::vector<double> values) const {
  auto cols = columns_;
  cols.at(index) = std::move(values);
  return Table(schema_, std::move(cols));
}

Matrix Table::matrix(std::span<const std::size_t> column_indices) const {
  Matrix m(static_cast<Eigen::Index>(rows_),
           static_cast<Eigen::Index>(column_indices.size()));
  for (std::size_t j = 0; j < column_indices.size(); ++j) {
    const auto& col = columns_.at(column_indices[j]);
    for (std::size_t r = 0; r < rows_; ++r) {
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = col[r];
    }
  }
  return m;
}

// ---------------------------------------------------------------- CSV

Table parse_csv(std::istream& in, const Schema& schema_in) {
  schema_in.validate();
  Schema schema = schema_in;
  std::string line;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    if (!trim(line).empty()) break;
  }
  if (trim(line).empty()) throw EmptyInput("CSV input is empty");
  for (auto field : split_commas(line)) header.push_back(canonical_column_name(field));

  std::vector<std::size_t> source(schema.columns.size());
  std::vector<std::string> missing;
  for (std::size_t c = 0; c < schema.columns.size(); ++c) {
    auto it = std::find(header.begin(), header.end(), schema.columns[c].name);
    if (it == header.end()) {
      missing.push_back(schema.columns[c].name);
    } else {
      source[c] = static_cast<std::size_t>(it - header.begin());
    }
  }
  if (!missing.empty()) {
    std::string names;
    for (const auto& m : missing) names += (names.empty() ? "" : ", ") + m;
    throw SchemaMismatch("missing columns: " + names);
  }

  // Raw text for discrete columns so categories can be learned first.
  std::vector<std::vector<double>> cols(schema.columns.size());
  std::vector<std::vector<std::string>> raw(schema.columns.size());
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    const auto fields = split_commas(line);
    if (fields.size() != header.size()) {
      throw ParseError(fmt::format("row {}: {} fields, header has {}", row,
                                   fields.size(), header.size()));
    }
    for (std::size_t c = 0; c < schema.columns.size(); ++c) {
      const auto text = fields[source[c]];
      if (schema.columns[c].kind == ColumnKind::discrete) {
        raw[c].emplace_back(text);
        continue;
      }
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
      if (ec != std::errc() || ptr != text.data() + text.size() || text.empty() ||
          !std::isfinite(v)) {
        throw ParseError(fmt::format("row {}, column '{}': cannot parse '{}'", row,
                                     schema.columns[c].name, text));
      }
      cols[c].push_back(v);
    }
    ++row;
  }
  if (row == 0) throw EmptyInput("CSV input has a header but no rows");

  for (std::size_t c = 0; c < schema.columns.size(); ++c) {
    auto& col = schema.columns[c];
    if (col.kind != ColumnKind::discrete) continue;
    if (col.categories.empty()) {
      std::set<std::string> uniq(raw[c].begin(), raw[c].end());
      col.categories.assign(uniq.begin(), uniq.end());
    }
    std::unordered_map<std::string, std::size_t> code;
    for (std::size_t k = 0; k < col.categories.size(); ++k) code[col.categories[k]] = k;
    cols[c].reserve(raw[c].size());
    for (std::size_t r = 0; r < raw[c].size(); ++r) {
      auto it = code.find(raw[c][r]);
      if (it == code.end()) {
        throw ParseError(fmt::format("row {}, column '{}': unknown category '{}'", r,
                                     col.name, raw[c][r]));
      }
      cols[c].push_back(static_cast<double>(it->second));
    }
  }
  return Table(std::move(schema), std::move(cols));
}

Table load_csv(const std::filesystem::path& path, const Schema& schema) {
  std::ifstream in(path);
  if (!in) throw EmptyInput(fmt::format("cannot open '{}'", path.string()));
  return parse_csv(in, schema);
}

void write_csv(const Table& table, std::ostream& out) {
  const auto& cols = table.schema().columns;
  for (std::size_t c = 0; c < cols.size(); ++c) {
    out << (c ? "," : "") << cols[c].name;
  }
  out << '\n';
  for (std::size_t r = 0; r < table.num_rows(); ++r) {
    for (std::size_t c = 0; c < cols.size(); ++c) {
      out << (c ? "," : "") << table.cell_text(r, c);
    }
    out << '\n';
  }
}

void save_csv(const Table& table, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError(fmt::format("cannot write '{}'", path.string()));
  write_csv(table, out);
}

// ---------------------------------------------------------------- stats

std::vector<ColumnSummary> summarize(const Table& table) {
  std::vector<ColumnSummary> out;
  for (std::size_t c = 0; c < table.num_columns(); ++c) {
    const auto& col = table.schema().columns[c];
    ColumnSummary s;
    s.name = col.name;
    s.kind = col.kind;
    s.count = table.num_rows();
    const auto values = table.column(c);
    if (col.kind == ColumnKind::discrete) {
      for (const auto& cat : col.categories) s.frequencies[cat] = 0;
      for (double v : values) ++s.frequencies[col.categories[static_cast<std::size_t>(v)]];
    }
    if (!values.empty()) {
      s.mean = std::accumulate(values.begin(), values.end(), 0.0) /
               static_cast<double>(values.size());
      double ss = 0.0;
      for (double v : values) ss += (v - s.mean) * (v - s.mean);
      s.std = values.size() > 1 ? std::sqrt(ss / static_cast<double>(values.size() - 1))
                                : 0.0;
      auto [lo, hi] = std::minmax_element(values.begin(), values.end());
      s.min = *lo;
      s.max = *hi;
      s.mean = std::clamp(s.mean, s.min, s.max);
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::optional<double> pearson(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = x.size();
  if (n != y.size()) throw ShapeError("pearson: length mismatch");
  if (n < 2) return std::nullopt;
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx <= 0.0 || syy <= 0.0) return std::nullopt;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::vector<double> ranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](auto a, auto b) { return values[a] < values[b]; });
  std::vector<double> out(values.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) out[order[k]] = rank;
    i = j + 1;
  }
  return out;
}

CorrelationMatrix correlation_matrix(const Table& table, std::optional<int> class_filter,
                                     CorrelationMethod method) {
  std::vector<std::size_t> rows;
  if (class_filter) {
    const auto labels = table.labels();
    for (std::size_t r = 0; r < labels.size(); ++r) {
      if (labels[r] == *class_filter) rows.push_back(r);
    }
  } else {
    rows.resize(table.num_rows());
    std::iota(rows.begin(), rows.end(), 0);
  }
  if (rows.size() < 2) {
    throw InsufficientData(fmt::format(
        "correlation needs at least 2 rows, {} remain after filtering", rows.size()));
  }
  const auto features = table.schema().feature_indices();
  const std::size_t d = features.size();
  std::vector<std::vector<double>> data(d);
  for (std::size_t j = 0; j < d; ++j) {
    const auto col = table.column(features[j]);
    data[j].reserve(rows.size());
    for (auto r : rows) data[j].push_back(col[r]);
    if (method == CorrelationMethod::spearman) data[j] = ranks(data[j]);
  }
  CorrelationMatrix out;
  out.values = Matrix::Identity(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  out.zero_variance.assign(d, false);
  for (std::size_t j = 0; j < d; ++j) {
    out.names.push_back(table.schema().columns[features[j]].name);
    const auto [lo, hi] = std::minmax_element(data[j].begin(), data[j].end());
    out.zero_variance[j] = *lo == *hi;
  }
  for (std::size_t a = 0; a < d; ++a) {
    for (std::size_t b = a + 1; b < d; ++b) {
      const double rho = pearson(data[a], data[b]).value_or(0.0);
      const auto ia = static_cast<Eigen::Index>(a), ib = static_cast<Eigen::Index>(b);
      out.values(ia, ib) = rho;
      out.values(ib, ia) = rho;
    }
  }
  return out;
}

// ---------------------------------------------------------------- splits

namespace {

Split make_split(const Table& table, std::vector<std::size_t> test_rows) {
  std::sort(test_rows.begin(), test_rows.end());
  std::vector<std::size_t> train_rows;
  std::size_t t = 0;
  for (std::size_t r = 0; r < table.num_rows(); ++r) {
    if (t < test_rows.size() && test_rows[t] == r) {
      ++t;
    } else {
      train_rows.push_back(r);
    }
  }
  if (train_rows.empty() || test_rows.empty()) {
    throw DegenerateSplit(fmt::format("split leaves an empty partition ({} train, {} test)",
                                      train_rows.size(), test_rows.size()));
  }
  Split s;
  s.train = table.select_rows(train_rows);
  s.test = table.select_rows(test_rows);
  s.train_rows = std::move(train_rows);
  s.test_rows = std::move(test_rows);
  return s;
}

std::size_t rounded_share(std::size_t n, double fraction) {
  return static_cast<std::size_t>(std::llround(static_cast<double>(n) * fraction));
}

}  // namespace

std::vector<std::size_t> canonical_row_order(const Table& table) {
  std::vector<std::size_t> order(table.num_rows());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    for (std::size_t c = 0; c < table.num_columns(); ++c) {
      const double va = table.at(a, c), vb = table.at(b, c);
      if (va != vb) return va < vb;
    }
    return false;
  });
  return order;
}

Split split_table(const Table& table, SplitStrategy strategy, double test_fraction,
                  std::uint64_t seed) {
  if (table.empty()) throw EmptyInput("cannot split an empty table");
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw DegenerateSplit("test_fraction must lie in (0, 1)");
  }
  Rng rng(seed);
  auto order = canonical_row_order(table);
  std::vector<std::size_t> test;
  switch (strategy) {
    case SplitStrategy::random: {
      rng.shuffle(order);
      const auto n_test = rounded_share(order.size(), test_fraction);
      test.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(
                                                     std::min(n_test, order.size())));
      break;
    }
    case SplitStrategy::stratified: {
      const auto labels = table.labels();
      std::map<int, std::vector<std::size_t>> by_class;
      for (auto r : order) by_class[labels[r]].push_back(r);
      for (auto& [cls, rows] : by_class) {
        rng.shuffle(rows);
        const auto n_test = rounded_share(rows.size(), test_fraction);
        test.insert(test.end(), rows.begin(),
                    rows.begin() + static_cast<std::ptrdiff_t>(n_test));
      }
      break;
    }
    case SplitStrategy::grouped: {
      if (!table.schema().group_column) {
        throw SchemaMismatch("grouped split requires a group column");
      }
      const auto groups = table.group_ids();
      std::map<std::string, std::vector<std::size_t>> by_group;
      for (std::size_t r = 0; r < groups.size(); ++r) by_group[groups[r]].push_back(r);
      std::vector<const std::vector<std::size_t>*> members;
      for (const auto& [name, rows] : by_group) members.push_back(&rows);
      rng.shuffle(members);
      const double want = test_fraction * static_cast<double>(table.num_rows());
      for (const auto* rows : members) {
        if (static_cast<double>(test.size()) >= want) break;
        test.insert(test.end(), rows->begin(), rows->end());
      }
      break;
    }
  }
  return make_split(table, std::move(test));
}

Table undersample(const Table& table, const std::map<int, std::size_t>& target_counts,
                  std::uint64_t seed) {
  const auto labels = table.labels();
  std::map<int, std::vector<std::size_t>> by_class;
  for (auto r : canonical_row_order(table)) by_class[labels[r]].push_back(r);
  Rng rng(seed);
  std::vector<std::size_t> keep;
  for (const auto& [cls, count] : target_counts) {
    auto& rows = by_class[cls];
    if (count > rows.size()) {
      throw InsufficientClassRows(fmt::format(
          "class {} has {} rows, {} requested", cls, rows.size(), count));
    }
    rng.shuffle(rows);
    keep.insert(keep.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(count));
  }
  std::sort(keep.begin(), keep.end());
  return table.select_rows(keep);
}

}  // namespace voxsynth
