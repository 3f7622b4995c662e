#pragma once

// Minimal SVG line charts for quick visual checks of a run.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "gsto/errors.hpp"

namespace gsto::io {

struct Series {
  std::string label;
  std::vector<double> y;
  std::string color = "#1f77b4";
  bool dashed = false;
};

struct Chart {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<double> x;
  std::vector<Series> series;
  bool log_y = false;
  double width = 800;
  double height = 360;
  std::size_t max_points = 2000;  // polylines are decimated to this many vertices
};

inline const std::vector<std::string>& palette() {
  static const std::vector<std::string> p{"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};
  return p;
}

namespace detail {
inline std::string fmt(double v, const char* spec = "%.6g") {
  char b[48];
  std::snprintf(b, sizeof b, spec, v);
  return b;
}
inline std::string escape(const std::string& s) {
  std::string o;
  for (char c : s) {
    switch (c) {
      case '<': o += "&lt;"; break;
      case '>': o += "&gt;"; break;
      case '&': o += "&amp;"; break;
      default: o += c;
    }
  }
  return o;
}
}  // namespace detail

inline std::string render_svg(const Chart& c) {
  const double ml = 70, mr = 150, mt = 30, mb = 45;
  const double pw = c.width - ml - mr, ph = c.height - mt - mb;
  auto tf = [&](double v) { return c.log_y ? std::log10(std::max(v, 1e-300)) : v; };

  double x0 = c.x.empty() ? 0.0 : c.x.front(), x1 = c.x.empty() ? 1.0 : c.x.back();
  if (x1 <= x0) x1 = x0 + 1.0;
  double y0 = std::numeric_limits<double>::infinity(), y1 = -y0;
  for (const auto& s : c.series)
    for (double v : s.y) {
      if (!std::isfinite(v) || (c.log_y && v <= 0.0)) continue;
      y0 = std::min(y0, tf(v));
      y1 = std::max(y1, tf(v));
    }
  if (!std::isfinite(y0)) y0 = 0.0, y1 = 1.0;
  if (y1 <= y0) y1 = y0 + 1.0;

  auto px = [&](double v) { return ml + (v - x0) / (x1 - x0) * pw; };
  auto py = [&](double v) { return mt + ph - (tf(v) - y0) / (y1 - y0) * ph; };

  std::string o;
  o += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + detail::fmt(c.width) + "\" height=\"" +
       detail::fmt(c.height) + "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o += "<text x=\"" + detail::fmt(ml) + "\" y=\"18\" font-size=\"14\">" + detail::escape(c.title) + "</text>\n";
  o += "<rect x=\"" + detail::fmt(ml) + "\" y=\"" + detail::fmt(mt) + "\" width=\"" + detail::fmt(pw) +
       "\" height=\"" + detail::fmt(ph) + "\" fill=\"none\" stroke=\"#444\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double fx = x0 + (x1 - x0) * k / 4.0;
    const double fy = y0 + (y1 - y0) * k / 4.0;
    const double gx = ml + pw * k / 4.0, gy = mt + ph - ph * k / 4.0;
    o += "<text x=\"" + detail::fmt(gx) + "\" y=\"" + detail::fmt(mt + ph + 15) + "\" text-anchor=\"middle\">" +
         detail::fmt(fx, "%.4g") + "</text>\n";
    const std::string lab = c.log_y ? "1e" + detail::fmt(fy, "%.3g") : detail::fmt(fy, "%.4g");
    o += "<text x=\"" + detail::fmt(ml - 5) + "\" y=\"" + detail::fmt(gy + 4) + "\" text-anchor=\"end\">" + lab +
         "</text>\n";
  }
  o += "<text x=\"" + detail::fmt(ml + pw / 2) + "\" y=\"" + detail::fmt(c.height - 8) +
       "\" text-anchor=\"middle\">" + detail::escape(c.x_label) + "</text>\n";
  o += "<text transform=\"translate(14," + detail::fmt(mt + ph / 2) + ") rotate(-90)\" text-anchor=\"middle\">" +
       detail::escape(c.y_label) + "</text>\n";

  const std::size_t n = c.x.size();
  const std::size_t step = std::max<std::size_t>(1, n / std::max<std::size_t>(1, c.max_points));
  for (std::size_t s = 0; s < c.series.size(); ++s) {
    const auto& ser = c.series[s];
    o += "<polyline fill=\"none\" stroke-width=\"1.2\" stroke=\"" + ser.color + "\"" +
         (ser.dashed ? " stroke-dasharray=\"5,3\"" : "") + " points=\"";
    for (std::size_t k = 0; k < n && k < ser.y.size(); k += step) {
      const double v = ser.y[k];
      if (!std::isfinite(v) || (c.log_y && v <= 0.0)) continue;
      o += detail::fmt(px(c.x[k]), "%.2f") + "," + detail::fmt(py(v), "%.2f") + " ";
    }
    o += "\"/>\n";
    const double ly = mt + 12 + 16.0 * static_cast<double>(s);
    o += "<line x1=\"" + detail::fmt(ml + pw + 10) + "\" y1=\"" + detail::fmt(ly - 4) + "\" x2=\"" +
         detail::fmt(ml + pw + 30) + "\" y2=\"" + detail::fmt(ly - 4) + "\" stroke=\"" + ser.color + "\"" +
         (ser.dashed ? " stroke-dasharray=\"5,3\"" : "") + "/>\n";
    o += "<text x=\"" + detail::fmt(ml + pw + 35) + "\" y=\"" + detail::fmt(ly) + "\">" + detail::escape(ser.label) +
         "</text>\n";
  }
  o += "</svg>\n";
  return o;
}

inline void write_svg(const std::string& path, const Chart& c) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out << render_svg(c);
}

}  // namespace gsto::io
