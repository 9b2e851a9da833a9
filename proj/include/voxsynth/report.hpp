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

// Report emitters.
//
//   artifact            csv  json  svg
//   QualityReport        x    x
//   EvalGrid             x    x    x   (line chart, one line per k)
//   InfluenceReport           x    x   (horizontal bars, descending)
//   CorrelationMatrix    x         x   (heatmap)
//
// Any other pairing throws FormatError. Output is a pure function of the
// artifact: no timestamps, fixed number formatting (shortest round trip for
// data, two decimals for SVG geometry).
//
// SVG conventions: 720 px wide line/bar charts; 28 px heatmap cells; the
// diverging heatmap palette runs #2166ac (-1) -> #f7f7f7 (0) -> #b2182b (+1)
// with linear RGB interpolation in between.

#ifndef VOXSYNTH_REPORT_HPP_
#define VOXSYNTH_REPORT_HPP_

#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "voxsynth/attribution.hpp"
#include "voxsynth/quality.hpp"
#include "voxsynth/selection.hpp"
#include "voxsynth/table.hpp"

namespace voxsynth {

enum class ReportFormat { csv, json, svg };

std::string_view to_string(ReportFormat format);
ReportFormat parse_report_format(std::string_view text);
// Format from a file extension (".csv", ".json", ".svg").
ReportFormat format_for_path(const std::filesystem::path& path);

std::string render(const QualityReport& report, ReportFormat format);
// CSV header: k,d,f1_mean,f1_fold_1,...,f1_fold_K (K = largest k; shorter
// rows leave trailing cells empty).
std::string render(const EvalGrid& grid, ReportFormat format);
std::string render(const InfluenceReport& report, ReportFormat format);
std::string render(const CorrelationMatrix& matrix, ReportFormat format);

// "#rrggbb" for a correlation in [-1, 1] (clamped).
std::string diverging_color(double value);

// One row per generator: generator,column_shapes,column_pair_trends,overall.
std::string quality_summary_csv(
    const std::vector<std::pair<std::string, QualityReport>>& reports);

// Renders and writes; returns the bytes written.
template <typename Artifact>
std::string emit_report(const Artifact& artifact, ReportFormat format,
                        const std::filesystem::path& path);

void write_text_file(const std::filesystem::path& path, std::string_view bytes);

}  // namespace voxsynth

#endif  // VOXSYNTH_REPORT_HPP_
