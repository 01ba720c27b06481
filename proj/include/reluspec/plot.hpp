#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace reluspec {

struct PlotSeries {
  enum class Style { kLine, kPoints };
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  Style style = Style::kLine;
};

struct PlotArrow {
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;
};

struct PlotSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_x = false;
  bool log_y = false;
  std::vector<PlotSeries> series;
  std::vector<PlotArrow> arrows;
};

/// Minimal SVG line/scatter chart. Points that are non-finite, or
/// non-positive on a log axis, are skipped. Output is byte-stable for equal input.
std::string render_svg(const PlotSpec& spec);
void write_svg(const std::filesystem::path& path, const PlotSpec& spec);

}  // namespace reluspec
