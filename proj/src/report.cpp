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

#include "voxsynth/report.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>

#include <fmt/format.h>

#include "voxsynth/error.hpp"

namespace voxsynth {

namespace {

constexpr double kChartWidth = 720.0;
constexpr double kChartHeight = 480.0;
constexpr double kCell = 28.0;
constexpr double kLabelMargin = 140.0;

// One colour per fold count k = 2..9.
constexpr std::array<std::string_view, 8> kLineColors = {
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

std::string num(double v) { return fmt::format("{}", v); }
std::string px(double v) { return fmt::format("{:.2f}", v); }

std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&':
        out += "&amp;";
        break;
      case '<':
        out += "&lt;";
        break;
      case '>':
        out += "&gt;";
        break;
      case '"':
        out += "&quot;";
        break;
      default:
        out += c;
    }
  }
  return out;
}

std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

[[noreturn]] void unsupported(std::string_view artifact, ReportFormat format) {
  throw FormatError(fmt::format("{} cannot be written as {}", artifact, to_string(format)));
}

std::string svg_open(double width, double height) {
  return fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" "
      "viewBox=\"0 0 {0} {1}\" font-family=\"sans-serif\" font-size=\"12\">\n"
      "<rect width=\"{0}\" height=\"{1}\" fill=\"#ffffff\"/>\n",
      px(width), px(height));
}

std::string text(double x, double y, std::string_view body, std::string_view extra = "") {
  return fmt::format("<text x=\"{}\" y=\"{}\"{}>{}</text>\n", px(x), px(y),
                     extra.empty() ? "" : fmt::format(" {}", extra), xml_escape(body));
}

nlohmann::json grid_json(const EvalGrid& grid) {
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& c : grid.cells) {
    cells.push_back({{"k", c.k}, {"d", c.d}, {"f1", c.f1}, {"folds", c.folds}});
  }
  nlohmann::json j = {{"ks", grid.ks},
                      {"max_d", grid.max_d},
                      {"classifier", std::string(to_string(grid.kind))},
                      {"protocol", std::string(to_string(grid.protocol))},
                      {"seed", grid.seed},
                      {"ranking", grid.ranking.to_json()},
                      {"cells", cells}};
  if (!grid.cells.empty()) {
    const auto best = best_config(grid);
    j["best"] = {{"k", best.k}, {"d", best.d}, {"f1", best.f1}};
  }
  return j;
}

std::string grid_svg(const EvalGrid& grid) {
  const double left = 60, right = 110, top = 40, bottom = 50;
  const double plot_w = kChartWidth - left - right;
  const double plot_h = kChartHeight - top - bottom;
  double lowest = 1.0;
  for (const auto& c : grid.cells) lowest = std::min(lowest, c.f1);
  double y_min = std::clamp(std::floor(lowest * 10.0) / 10.0, 0.0, 0.9);
  const auto max_d = std::max<std::size_t>(grid.max_d, 1);
  auto x_of = [&](std::size_t d) {
    return max_d == 1 ? left + plot_w / 2
                      : left + plot_w * static_cast<double>(d - 1) / static_cast<double>(max_d - 1);
  };
  auto y_of = [&](double f1) { return top + plot_h * (1.0 - (f1 - y_min) / (1.0 - y_min)); };

  std::string out = svg_open(kChartWidth, kChartHeight);
  out += text(left, 24, "F1 by number of selected features", "font-size=\"14\"");
  out += fmt::format(
      "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#333333\"/>\n",
      px(left), px(top), px(plot_w), px(plot_h));
  for (int i = 0; y_min + 0.1 * i <= 1.0 + 1e-9; ++i) {
    const double v = y_min + 0.1 * i;
    const double y = y_of(v);
    out += fmt::format("<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#dddddd\"/>\n",
                       px(left), px(y), px(left + plot_w), px(y));
    out += text(left - 8, y + 4, fmt::format("{:.1f}", v), "text-anchor=\"end\"");
  }
  for (std::size_t d = 1; d <= max_d; ++d) {
    out += text(x_of(d), top + plot_h + 18, std::to_string(d), "text-anchor=\"middle\"");
  }
  out += text(left + plot_w / 2, kChartHeight - 10, "features (d)", "text-anchor=\"middle\"");
  out += text(16, top + plot_h / 2, "F1",
              fmt::format("text-anchor=\"middle\" transform=\"rotate(-90 16 {})\"", px(top + plot_h / 2)));

  for (std::size_t i = 0; i < grid.ks.size(); ++i) {
    const auto k = grid.ks[i];
    const auto color = kLineColors[(k >= 2 ? k - 2 : k) % kLineColors.size()];
    std::string points;
    for (const auto& c : grid.cells) {
      if (c.k != k) continue;
      if (!points.empty()) points += ' ';
      points += fmt::format("{},{}", px(x_of(c.d)), px(y_of(c.f1)));
    }
    out += fmt::format(
        "<polyline class=\"k{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"2\" points=\"{}\"/>\n", k,
        color, points);
    const double ly = top + 16.0 * static_cast<double>(i) + 8;
    out += fmt::format("<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"{}\" stroke-width=\"2\"/>\n",
                       px(kChartWidth - right + 12), px(ly), px(kChartWidth - right + 32), px(ly), color);
    out += text(kChartWidth - right + 38, ly + 4, fmt::format("k = {}", k));
  }
  out += "</svg>\n";
  return out;
}

std::string influence_svg(const InfluenceReport& r) {
  std::vector<const FeatureInfluence*> order;
  for (const auto& f : r.features) order.push_back(&f);
  std::sort(order.begin(), order.end(), [](const auto* a, const auto* b) { return a->rank < b->rank; });
  const double bar_h = 18, gap = 6, top = 40, value_w = 80;
  const double height = top + (bar_h + gap) * static_cast<double>(order.size()) + 20;
  const double max_w = kChartWidth - kLabelMargin - value_w;
  double largest = 0.0;
  for (const auto* f : order) largest = std::max(largest, f->mean_abs);

  std::string out = svg_open(kChartWidth, height);
  out += text(10, 24,
              fmt::format("Feature influence ({}, mean |attribution|)", to_string(r.method)),
              "font-size=\"14\"");
  for (std::size_t i = 0; i < order.size(); ++i) {
    const auto* f = order[i];
    const double y = top + (bar_h + gap) * static_cast<double>(i);
    const double w = largest > 0 ? max_w * f->mean_abs / largest : 0.0;
    out += text(kLabelMargin - 8, y + 13, f->feature, "text-anchor=\"end\"");
    out += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"#1f77b4\"/>\n",
                       px(kLabelMargin), px(y), px(w), px(bar_h));
    out += text(kLabelMargin + w + 6, y + 13, fmt::format("{:.4f}", f->mean_abs));
  }
  out += "</svg>\n";
  return out;
}

std::string heatmap_svg(const CorrelationMatrix& m) {
  const auto n = m.names.size();
  const double grid_w = kCell * static_cast<double>(n);
  const double legend = 100;
  const double width = kLabelMargin + grid_w + legend;
  const double height = kLabelMargin + std::max(grid_w, 21.0 * 8) + 20;
  std::string out = svg_open(width, height);
  for (std::size_t i = 0; i < n; ++i) {
    const double c = kLabelMargin + kCell * static_cast<double>(i) + kCell / 2;
    out += text(kLabelMargin - 6, c + 4, m.names[i], "text-anchor=\"end\"");
    out += text(c + 4, kLabelMargin - 6, m.names[i],
                fmt::format("text-anchor=\"start\" transform=\"rotate(-90 {} {})\"", px(c + 4),
                            px(kLabelMargin - 6)));
  }
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) {
      const double v = m.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
      out += fmt::format(
          "<rect class=\"cell\" x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{}\">"
          "<title>{} / {}: {:.3f}</title></rect>\n",
          px(kLabelMargin + kCell * static_cast<double>(c)),
          px(kLabelMargin + kCell * static_cast<double>(r)), px(kCell), px(kCell),
          diverging_color(v), xml_escape(m.names[r]), xml_escape(m.names[c]), v);
    }
  }
  const double lx = kLabelMargin + grid_w + 20;
  for (int i = 0; i <= 20; ++i) {
    const double v = 1.0 - 0.1 * i;
    out += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"16\" height=\"8\" fill=\"{}\"/>\n", px(lx),
                       px(kLabelMargin + 8.0 * i), diverging_color(v));
    if (i % 10 == 0) out += text(lx + 22, kLabelMargin + 8.0 * i + 8, i == 0 ? "+1" : i == 10 ? "0" : "-1");
  }
  out += "</svg>\n";
  return out;
}

}  // namespace

std::string_view to_string(ReportFormat format) {
  switch (format) {
    case ReportFormat::csv:
      return "csv";
    case ReportFormat::json:
      return "json";
    case ReportFormat::svg:
      return "svg";
  }
  return "csv";
}

ReportFormat parse_report_format(std::string_view text) {
  for (auto f : {ReportFormat::csv, ReportFormat::json, ReportFormat::svg}) {
    if (text == to_string(f)) return f;
  }
  throw FormatError(fmt::format("unknown report format '{}' (csv, json, svg)", text));
}

ReportFormat format_for_path(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  return parse_report_format(ext.empty() ? ext : ext.substr(1));
}

std::string diverging_color(double value) {
  static constexpr std::array<double, 3> blue{0x21, 0x66, 0xac};
  static constexpr std::array<double, 3> white{0xf7, 0xf7, 0xf7};
  static constexpr std::array<double, 3> red{0xb2, 0x18, 0x2b};
  const double v = std::clamp(value, -1.0, 1.0);
  const auto& end = v < 0 ? blue : red;
  const double t = std::abs(v);
  int rgb[3];
  for (int i = 0; i < 3; ++i) rgb[i] = static_cast<int>(std::lround(white[i] + t * (end[i] - white[i])));
  return fmt::format("#{:02x}{:02x}{:02x}", rgb[0], rgb[1], rgb[2]);
}

std::string render(const QualityReport& report, ReportFormat format) {
  if (format == ReportFormat::json) return to_json(report).dump(2) + "\n";
  if (format != ReportFormat::csv) unsupported("a quality report", format);
  std::string out = "kind,name,metric,score\n";
  out += fmt::format("summary,column_shapes,mean,{}\n", num(report.column_shapes_mean));
  out += fmt::format("summary,column_pair_trends,mean,{}\n", num(report.column_pair_trends_mean));
  out += fmt::format("summary,overall,quality_score,{}\n", num(report.overall));
  for (const auto& s : report.shapes) {
    out += fmt::format("shape,{},{},{}\n", csv_field(s.name), s.metric, num(s.score));
  }
  for (const auto& t : report.trends) {
    out += fmt::format("trend,{},correlation_similarity,{}\n", csv_field(t.a + "|" + t.b), num(t.score));
  }
  return out;
}

std::string render(const EvalGrid& grid, ReportFormat format) {
  switch (format) {
    case ReportFormat::json:
      return grid_json(grid).dump(2) + "\n";
    case ReportFormat::svg:
      return grid_svg(grid);
    case ReportFormat::csv:
      break;
  }
  std::size_t folds = 0;
  for (const auto& c : grid.cells) folds = std::max(folds, c.folds.size());
  std::string out = "k,d,f1_mean";
  for (std::size_t i = 1; i <= folds; ++i) out += fmt::format(",f1_fold_{}", i);
  out += '\n';
  for (const auto& c : grid.cells) {
    out += fmt::format("{},{},{}", c.k, c.d, num(c.f1));
    for (std::size_t i = 0; i < folds; ++i) {
      out += ',';
      if (i < c.folds.size()) out += num(c.folds[i]);
    }
    out += '\n';
  }
  return out;
}

std::string render(const InfluenceReport& report, ReportFormat format) {
  if (format == ReportFormat::json) return report.to_json().dump(2) + "\n";
  if (format == ReportFormat::svg) return influence_svg(report);
  unsupported("an influence report", format);
}

std::string render(const CorrelationMatrix& matrix, ReportFormat format) {
  if (format == ReportFormat::svg) return heatmap_svg(matrix);
  if (format != ReportFormat::csv) unsupported("a correlation matrix", format);
  std::string out = "feature";
  for (const auto& n : matrix.names) out += "," + csv_field(n);
  out += '\n';
  for (std::size_t r = 0; r < matrix.names.size(); ++r) {
    out += csv_field(matrix.names[r]);
    for (std::size_t c = 0; c < matrix.names.size(); ++c) {
      out += "," + num(matrix.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)));
    }
    out += '\n';
  }
  return out;
}

std::string quality_summary_csv(const std::vector<std::pair<std::string, QualityReport>>& reports) {
  std::string out = "generator,column_shapes,column_pair_trends,overall\n";
  for (const auto& [name, q] : reports) {
    out += fmt::format("{},{},{},{}\n", csv_field(name), num(q.column_shapes_mean),
                       num(q.column_pair_trends_mean), num(q.overall));
  }
  return out;
}

void write_text_file(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError(fmt::format("cannot write '{}'", path.string()));
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ConfigError(fmt::format("write to '{}' failed", path.string()));
}

template <typename Artifact>
std::string emit_report(const Artifact& artifact, ReportFormat format,
                        const std::filesystem::path& path) {
  auto bytes = render(artifact, format);
  write_text_file(path, bytes);
  return bytes;
}

template std::string emit_report(const QualityReport&, ReportFormat, const std::filesystem::path&);
template std::string emit_report(const EvalGrid&, ReportFormat, const std::filesystem::path&);
template std::string emit_report(const InfluenceReport&, ReportFormat, const std::filesystem::path&);
template std::string emit_report(const CorrelationMatrix&, ReportFormat,
                                 const std::filesystem::path&);

}  // namespace voxsynth
