#include "reluspec/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "reluspec/error.hpp"

namespace reluspec {
namespace {

constexpr double kWidth = 720, kHeight = 480;
constexpr double kLeft = 80, kRight = 170, kTop = 40, kBottom = 60;
constexpr const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf"};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Axis {
  bool log = false;
  double lo = 0, hi = 1;
  double pix_lo = 0, pix_hi = 1;

  bool usable(double v) const { return std::isfinite(v) && (!log || v > 0); }
  double t(double v) const { return log ? std::log10(v) : v; }
  double map(double v) const { return pix_lo + (t(v) - lo) / (hi - lo) * (pix_hi - pix_lo); }

  void fit(double a, double b) {
    lo = t(a);
    hi = t(b);
    if (hi - lo < 1e-12) {
      lo -= 0.5;
      hi += 0.5;
    } else if (!log) {
      const double pad = 0.05 * (hi - lo);
      lo -= pad;
      hi += pad;
    }
  }

  std::vector<double> ticks() const {
    std::vector<double> out;
    if (log) {
      for (double e = std::ceil(lo); e <= hi + 1e-9; e += std::max(1.0, std::floor((hi - lo) / 6.0))) {
        out.push_back(std::pow(10.0, e));
      }
      return out;
    }
    const double raw = (hi - lo) / 5.0;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    double step = mag;
    for (double mult : {1.0, 2.0, 5.0, 10.0}) {
      if (mult * mag >= raw) {
        step = mult * mag;
        break;
      }
    }
    for (double v = std::ceil(lo / step) * step; v <= hi + 1e-12; v += step) out.push_back(std::abs(v) < 1e-14 ? 0.0 : v);
    return out;
  }
};

}  // namespace

std::string render_svg(const PlotSpec& spec) {
  Axis ax{spec.log_x, 0, 1, kLeft, kWidth - kRight};
  Axis ay{spec.log_y, 0, 1, kHeight - kBottom, kTop};

  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin, ymin = xmin, ymax = -xmin;
  auto extend = [&](double x, double y) {
    if (!ax.usable(x) || !ay.usable(y)) return;
    xmin = std::min(xmin, x);
    xmax = std::max(xmax, x);
    ymin = std::min(ymin, y);
    ymax = std::max(ymax, y);
  };
  for (const auto& s : spec.series) {
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) extend(s.x[i], s.y[i]);
  }
  for (const auto& a : spec.arrows) {
    extend(a.x0, a.y0);
    extend(a.x1, a.y1);
  }
  if (!std::isfinite(xmin)) {
    xmin = ymin = spec.log_x ? 1.0 : 0.0;
    xmax = ymax = xmin + 1.0;
  }
  ax.fit(xmin, xmax);
  ay.fit(ymin, ymax);

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<defs><marker id=\"arrow\" markerWidth=\"8\" markerHeight=\"8\" refX=\"7\" refY=\"4\" orient=\"auto\">"
       "<path d=\"M0,0 L8,4 L0,8 z\" fill=\"#555\"/></marker></defs>\n";
  o << "<text x=\"" << fmt(kWidth / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << escape(spec.title)
    << "</text>\n";
  const double x0 = kLeft, x1 = kWidth - kRight, y0 = kHeight - kBottom, y1 = kTop;
  o << "<rect x=\"" << fmt(x0) << "\" y=\"" << fmt(y1) << "\" width=\"" << fmt(x1 - x0) << "\" height=\"" << fmt(y0 - y1)
    << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (double t : ax.ticks()) {
    const double px = ax.map(t);
    o << "<line x1=\"" << fmt(px) << "\" y1=\"" << fmt(y0) << "\" x2=\"" << fmt(px) << "\" y2=\"" << fmt(y0 + 5)
      << "\" stroke=\"black\"/><text x=\"" << fmt(px) << "\" y=\"" << fmt(y0 + 18) << "\" text-anchor=\"middle\">"
      << tick_label(t) << "</text>\n";
  }
  for (double t : ay.ticks()) {
    const double py = ay.map(t);
    o << "<line x1=\"" << fmt(x0 - 5) << "\" y1=\"" << fmt(py) << "\" x2=\"" << fmt(x0) << "\" y2=\"" << fmt(py)
      << "\" stroke=\"black\"/><text x=\"" << fmt(x0 - 8) << "\" y=\"" << fmt(py + 4) << "\" text-anchor=\"end\">"
      << tick_label(t) << "</text>\n";
  }
  o << "<text x=\"" << fmt((x0 + x1) / 2) << "\" y=\"" << fmt(kHeight - 15) << "\" text-anchor=\"middle\">"
    << escape(spec.x_label) << "</text>\n";
  o << "<text transform=\"translate(18," << fmt((y0 + y1) / 2) << ") rotate(-90)\" text-anchor=\"middle\">"
    << escape(spec.y_label) << "</text>\n";

  for (std::size_t si = 0; si < spec.series.size(); ++si) {
    const auto& s = spec.series[si];
    const char* color = kColors[si % std::size(kColors)];
    std::vector<std::pair<double, double>> pts;
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
      if (!ax.usable(s.x[i]) || !ay.usable(s.y[i])) continue;
      const double px = ax.map(s.x[i]), py = ay.map(s.y[i]);
      // Thin points that land on the same pixel as the previous one.
      if (!pts.empty() && std::abs(px - pts.back().first) < 0.5 && std::abs(py - pts.back().second) < 0.5) continue;
      pts.emplace_back(px, py);
    }
    if (s.style == PlotSeries::Style::kLine) {
      o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
      for (const auto& [px, py] : pts) o << fmt(px) << ',' << fmt(py) << ' ';
      o << "\"/>\n";
    } else {
      for (const auto& [px, py] : pts) {
        o << "<circle cx=\"" << fmt(px) << "\" cy=\"" << fmt(py) << "\" r=\"3\" fill=\"" << color << "\"/>\n";
      }
    }
    const double ly = kTop + 10 + 18.0 * double(si);
    o << "<rect x=\"" << fmt(x1 + 12) << "\" y=\"" << fmt(ly - 5) << "\" width=\"14\" height=\"4\" fill=\"" << color
      << "\"/><text x=\"" << fmt(x1 + 32) << "\" y=\"" << fmt(ly) << "\">" << escape(s.label) << "</text>\n";
  }
  for (const auto& a : spec.arrows) {
    if (!ax.usable(a.x0) || !ax.usable(a.x1) || !ay.usable(a.y0) || !ay.usable(a.y1)) continue;
    o << "<line x1=\"" << fmt(ax.map(a.x0)) << "\" y1=\"" << fmt(ay.map(a.y0)) << "\" x2=\"" << fmt(ax.map(a.x1))
      << "\" y2=\"" << fmt(ay.map(a.y1)) << "\" stroke=\"#555\" marker-end=\"url(#arrow)\"/>\n";
  }
  o << "</svg>\n";
  return o.str();
}

void write_svg(const std::filesystem::path& path, const PlotSpec& spec) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorCode::kIo, "cannot open " + path.string() + " for writing");
  out << render_svg(spec);
}

}  // namespace reluspec
