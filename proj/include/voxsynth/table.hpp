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

// Column-typed tables: the voice-feature corpus and every synthetic dataset
// derived from it.
//
// A Table is immutable once built. Cells are stored column-major as doubles;
// discrete cells hold the index of their category in the column's category
// list, so a binary `status` column declared with categories {"0", "1"}
// stores the class label directly.

#ifndef VOXSYNTH_TABLE_HPP_
#define VOXSYNTH_TABLE_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace voxsynth {

using Matrix = Eigen::MatrixXd;

enum class ColumnKind { continuous, discrete };

std::string_view to_string(ColumnKind kind);

struct Column {
  std::string name;
  ColumnKind kind = ColumnKind::continuous;
  std::string unit;
  // Discrete only. Empty at load time means "learn from the data"
  // (sorted lexicographically).
  std::vector<std::string> categories;
};

struct Schema {
  std::vector<Column> columns;
  std::string target_column;
  std::optional<std::string> group_column;

  std::optional<std::size_t> find(std::string_view name) const;
  // Throws SchemaMismatch if the column is absent.
  std::size_t index_of(std::string_view name) const;
  std::size_t target_index() const { return index_of(target_column); }

  // Continuous columns other than target and group, in schema order.
  std::vector<std::size_t> feature_indices() const;
  std::vector<std::string> feature_names() const;

  // Throws SchemaMismatch when names repeat or target/group are missing.
  void validate() const;

  // Stable hash of names, kinds and category lists (hex string).
  std::string fingerprint() const;

  // Copy of the schema without the group column.
  Schema without_group() const;
};

// The 22-feature Parkinson's voice schema: mdvp_fo_hz ... ppe, discrete
// `status` with categories {"0", "1"} and, optionally, group column `name`.
Schema parkinsons_schema(bool with_group = true);

// UCI header -> canonical snake_case column name.
const std::vector<std::pair<std::string, std::string>>& uci_header_aliases();

// Alias lookup, falling back to a generic snake_case conversion.
std::string canonical_column_name(std::string_view header);

class Table {
 public:
  Table() = default;
  // Column-major constructor; validates shapes, finiteness and category codes.
  Table(Schema schema, std::vector<std::vector<double>> columns);

  static Table from_rows(Schema schema,
                         const std::vector<std::vector<double>>& rows);

  const Schema& schema() const noexcept { return schema_; }
  std::size_t num_rows() const noexcept { return rows_; }
  std::size_t num_columns() const noexcept { return columns_.size(); }
  bool empty() const noexcept { return rows_ == 0; }

  std::span<const double> column(std::size_t index) const;
  std::span<const double> column(std::string_view name) const;
  double at(std::size_t row, std::size_t col) const {
    return columns_[col][row];
  }
  std::vector<double> row(std::size_t r) const;

  // Target codes as integers.
  std::vector<int> labels() const;
  // Subject identity per row (group column with the recording suffix
  // stripped). Throws SchemaMismatch if no group column is configured.
  std::vector<std::string> group_ids() const;

  // Text rendering of a cell: category label or shortest round-trip number.
  std::string cell_text(std::size_t row, std::size_t col) const;

  Table select_rows(std::span<const std::size_t> indices) const;
  // Keeps exactly the named columns in the given order; target/group are
  // dropped from the schema if not listed.
  Table select_columns(std::span<const std::string> names) const;
  Table without_group() const;
  // Replaces one column's values (same kind, same categories).
  Table with_column(std::size_t index, std::vector<double> values) const;

  // Rows as a dense matrix of the given column indices.
  Matrix matrix(std::span<const std::size_t> column_indices) const;

 private:
  Schema schema_;
  std::vector<std::vector<double>> columns_;
  std::size_t rows_ = 0;
};

// Subject id for a UCI recording name: "phon_R01_S01_1" -> "phon_R01_S01".
std::string subject_from_recording(std::string_view recording);

Table load_csv(const std::filesystem::path& path, const Schema& schema);
Table parse_csv(std::istream& in, const Schema& schema);
void write_csv(const Table& table, std::ostream& out);
void save_csv(const Table& table, const std::filesystem::path& path);

struct ColumnSummary {
  std::string name;
  ColumnKind kind = ColumnKind::continuous;
  std::size_t count = 0;
  double mean = 0.0;
  double std = 0.0;  // sample (n - 1) standard deviation
  double min = 0.0;
  double max = 0.0;
  std::map<std::string, std::size_t> frequencies;  // discrete only
};

std::vector<ColumnSummary> summarize(const Table& table);

enum class CorrelationMethod { pearson, spearman };

struct CorrelationMatrix {
  std::vector<std::string> names;
  Matrix values;
  // Columns whose variance is zero after filtering; their off-diagonal
  // entries are reported as 0.0.
  std::vector<bool> zero_variance;
};

// Correlation over the continuous feature columns, optionally restricted to
// rows whose target equals `class_filter`.
CorrelationMatrix correlation_matrix(
    const Table& table, std::optional<int> class_filter = std::nullopt,
    CorrelationMethod method = CorrelationMethod::pearson);

// Pearson correlation of two equal-length samples; nullopt when either has
// zero variance.
std::optional<double> pearson(std::span<const double> x,
                              std::span<const double> y);
// Average ranks (ties share the mean rank).
std::vector<double> ranks(std::span<const double> values);

enum class SplitStrategy { random, stratified, grouped };

struct Split {
  Table train;
  Table test;
  std::vector<std::size_t> train_rows;
  std::vector<std::size_t> test_rows;
};

Split split_table(const Table& table, SplitStrategy strategy,
                  double test_fraction, std::uint64_t seed);

// Draws exactly target_counts[c] rows of each listed class without
// replacement; classes not listed are dropped. Output keeps input row order.
Table undersample(const Table& table,
                  const std::map<int, std::size_t>& target_counts,
                  std::uint64_t seed);

// Row permutation that sorts rows lexicographically by cell values; used to
// make seeded procedures independent of input row order.
std::vector<std::size_t> canonical_row_order(const Table& table);

}  // namespace voxsynth

#endif  // VOXSYNTH_TABLE_HPP_
