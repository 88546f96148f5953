#pragma once

// Result tables (CSV, Markdown) and a grouped bar chart (SVG) from a Summary.
// Output is a pure function of the summary.

#include <cstdio>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "core.hpp"
#include "eval.hpp"
#include "harmonizer.hpp"

namespace entail {

namespace detail {

inline std::string format_fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

inline std::string format_exact(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
  return out;
}

inline std::string md_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (c == '|') out += '\\';
    out += c;
  }
  return out;
}

}  // namespace detail

struct Tables {
  std::string csv;       // full-precision values
  std::string markdown;  // 3 decimals
};

// One row per dataset (sorted by id), one column per condition. Missing
// values are empty cells.
inline Tables emit_table(const Summary& s) {
  Tables t;
  t.csv = "dataset_id";
  t.markdown = "| dataset_id |";
  std::string rule = "|---|";
  for (const auto& c : s.conditions) {
    t.csv += "," + csv_escape(c);
    t.markdown += " " + detail::md_escape(c) + " |";
    rule += "---:|";
  }
  t.csv += '\n';
  t.markdown += "\n" + rule + "\n";
  for (const auto& [ds, row] : s.values) {
    t.csv += csv_escape(ds);
    t.markdown += "| " + detail::md_escape(ds) + " |";
    for (const auto& c : s.conditions) {
      auto it = row.find(c);
      t.csv += ",";
      if (it != row.end()) t.csv += detail::format_exact(it->second);
      t.markdown += " " + (it != row.end() ? detail::format_fixed(it->second, 3) : std::string()) + " |";
    }
    t.csv += '\n';
    t.markdown += '\n';
  }
  return t;
}

struct ChartLayout {
  double plot_height = 300.0;  // pixels for a value of 1.0
  double bar_width = 18.0;
  double group_gap = 24.0;
  double margin_left = 56.0;
  double margin_top = 40.0;
  double margin_bottom = 110.0;
  double legend_width = 140.0;
};

// Grouped bars: one group per dataset plus a trailing "mean" group, one bar
// per condition, y axis fixed to [0, 1]. Each bar is a <rect class="bar">
// carrying data-dataset / data-condition / data-value attributes.
inline std::string emit_bar_chart(const Summary& s, const ChartLayout& L = {}) {
  static constexpr std::string_view palette[] = {"#4c72b0", "#dd8452", "#55a868", "#c44e52",
                                                 "#8172b3", "#937860", "#da8bc3", "#8c8c8c"};
  using detail::format_fixed;

  std::vector<std::pair<std::string, std::map<std::string, double>>> groups(s.values.begin(), s.values.end());
  if (!groups.empty()) groups.emplace_back("mean", s.means);

  const auto nc = std::max<std::size_t>(s.conditions.size(), 1);
  const double group_width = static_cast<double>(nc) * L.bar_width + L.group_gap;
  const double plot_width = std::max(1.0, static_cast<double>(groups.size())) * group_width;
  const double width = L.margin_left + plot_width + L.legend_width;
  const double height = L.margin_top + L.plot_height + L.margin_bottom;
  const double base_y = L.margin_top + L.plot_height;

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + format_fixed(width, 0) + "\" height=\"" +
         format_fixed(height, 0) + "\" viewBox=\"0 0 " + format_fixed(width, 0) + " " + format_fixed(height, 0) +
         "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  svg += "<rect x=\"0\" y=\"0\" width=\"" + format_fixed(width, 0) + "\" height=\"" + format_fixed(height, 0) +
         "\" fill=\"white\"/>\n";
  svg += "<text x=\"" + format_fixed(L.margin_left, 0) + "\" y=\"20\" font-size=\"13\">Balanced accuracy</text>\n";

  for (int tick = 0; tick <= 4; ++tick) {
    const double v = tick * 0.25;
    const double y = base_y - v * L.plot_height;
    svg += "<line class=\"grid\" x1=\"" + format_fixed(L.margin_left, 2) + "\" y1=\"" + format_fixed(y, 2) +
           "\" x2=\"" + format_fixed(L.margin_left + plot_width, 2) + "\" y2=\"" + format_fixed(y, 2) +
           "\" stroke=\"#dddddd\"/>\n";
    svg += "<text x=\"" + format_fixed(L.margin_left - 6, 2) + "\" y=\"" + format_fixed(y + 4, 2) +
           "\" text-anchor=\"end\">" + format_fixed(v, 2) + "</text>\n";
  }
  svg += "<line class=\"axis\" x1=\"" + format_fixed(L.margin_left, 2) + "\" y1=\"" + format_fixed(L.margin_top, 2) +
         "\" x2=\"" + format_fixed(L.margin_left, 2) + "\" y2=\"" + format_fixed(base_y, 2) + "\" stroke=\"black\"/>\n";
  svg += "<line class=\"axis\" x1=\"" + format_fixed(L.margin_left, 2) + "\" y1=\"" + format_fixed(base_y, 2) +
         "\" x2=\"" + format_fixed(L.margin_left + plot_width, 2) + "\" y2=\"" + format_fixed(base_y, 2) +
         "\" stroke=\"black\"/>\n";

  if (groups.empty())
    svg += "<text x=\"" + format_fixed(L.margin_left + plot_width / 2, 2) + "\" y=\"" +
           format_fixed(base_y - L.plot_height / 2, 2) + "\" text-anchor=\"middle\">no data</text>\n";

  for (std::size_t g = 0; g < groups.size(); ++g) {
    const auto& [name, row] = groups[g];
    const double gx = L.margin_left + L.group_gap / 2 + static_cast<double>(g) * group_width;
    for (std::size_t c = 0; c < s.conditions.size(); ++c) {
      auto it = row.find(s.conditions[c]);
      if (it == row.end()) continue;
      const double v = std::clamp(it->second, 0.0, 1.0);
      const double h = v * L.plot_height;
      svg += "<rect class=\"bar\" data-dataset=\"" + detail::xml_escape(name) + "\" data-condition=\"" +
             detail::xml_escape(s.conditions[c]) + "\" data-value=\"" + detail::format_exact(it->second) +
             "\" x=\"" + format_fixed(gx + static_cast<double>(c) * L.bar_width, 2) + "\" y=\"" +
             format_fixed(base_y - h, 2) + "\" width=\"" + format_fixed(L.bar_width - 2, 2) + "\" height=\"" +
             format_fixed(h, 2) + "\" fill=\"" + std::string(palette[c % std::size(palette)]) + "\"/>\n";
    }
    const double lx = gx + static_cast<double>(nc) * L.bar_width / 2;
    svg += "<text x=\"" + format_fixed(lx, 2) + "\" y=\"" + format_fixed(base_y + 12, 2) +
           "\" text-anchor=\"end\" transform=\"rotate(-45 " + format_fixed(lx, 2) + " " +
           format_fixed(base_y + 12, 2) + ")\">" + detail::xml_escape(name) + "</text>\n";
  }

  const double legend_x = L.margin_left + plot_width + 16;
  for (std::size_t c = 0; c < s.conditions.size(); ++c) {
    const double y = L.margin_top + static_cast<double>(c) * 18;
    svg += "<rect class=\"legend\" x=\"" + format_fixed(legend_x, 2) + "\" y=\"" + format_fixed(y, 2) +
           "\" width=\"12\" height=\"12\" fill=\"" + std::string(palette[c % std::size(palette)]) + "\"/>\n";
    svg += "<text x=\"" + format_fixed(legend_x + 18, 2) + "\" y=\"" + format_fixed(y + 10, 2) + "\">" +
           detail::xml_escape(s.conditions[c]) + "</text>\n";
  }
  svg += "</svg>\n";
  return svg;
}

// Writes summary.csv, summary.md and summary.svg into `dir`.
inline void write_reports(const Summary& s, const std::filesystem::path& dir) {
  const auto t = emit_table(s);
  open_output(dir / "summary.csv") << t.csv;
  open_output(dir / "summary.md") << t.markdown;
  open_output(dir / "summary.svg") << emit_bar_chart(s);
}

}  // namespace entail
