#pragma once

// Minimal static SVG line plots for sweep outputs.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

namespace svg {

struct Series {
  std::string name;
  std::vector<double> x, y;
};

struct Axes {
  std::string title, xlabel, ylabel;
  bool log_y = false;
};

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

inline std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      default: out += c;
    }
  }
  return out;
}

inline std::string line_plot(const std::vector<Series>& series, const Axes& axes) {
  const double W = 640, H = 420, left = 70, right = 20, top = 40, bottom = 55;
  auto ty = [&](double v) { return axes.log_y ? std::log10(std::max(v, 1e-300)) : v; };

  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, ty(s.y[i]));
      y1 = std::max(y1, ty(s.y[i]));
    }
  }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 == x0) x0 -= 0.5, x1 += 0.5;
  if (y1 == y0) y0 -= 0.5, y1 += 0.5;
  const double pad = 0.05 * (y1 - y0);
  y0 -= pad;
  y1 += pad;

  auto px = [&](double v) { return left + (v - x0) / (x1 - x0) * (W - left - right); };
  auto py = [&](double v) { return H - bottom - (ty(v) - y0) / (y1 - y0) * (H - top - bottom); };
  auto pyt = [&](double t) { return H - bottom - (t - y0) / (y1 - y0) * (H - top - bottom); };

  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};
  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">"
    << escape(axes.title) << "</text>\n";
  o << "<line x1=\"" << left << "\" y1=\"" << H - bottom << "\" x2=\"" << W - right
    << "\" y2=\"" << H - bottom << "\" stroke=\"black\"/>\n";
  o << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\""
    << H - bottom << "\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double xv = x0 + (x1 - x0) * k / 4.0, yt = y0 + (y1 - y0) * k / 4.0;
    o << "<text x=\"" << px(xv) << "\" y=\"" << H - bottom + 18
      << "\" text-anchor=\"middle\">" << num(xv) << "</text>\n";
    o << "<text x=\"" << left - 6 << "\" y=\"" << pyt(yt) + 4 << "\" text-anchor=\"end\">"
      << num(axes.log_y ? std::pow(10.0, yt) : yt) << "</text>\n";
  }
  o << "<text x=\"" << (left + W - right) / 2 << "\" y=\"" << H - 12
    << "\" text-anchor=\"middle\">" << escape(axes.xlabel) << "</text>\n";
  o << "<text x=\"16\" y=\"" << (top + H - bottom) / 2
    << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " << (top + H - bottom) / 2
    << ")\">" << escape(axes.ylabel) << "</text>\n";

  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* c = colors[s % 5];
    std::ostringstream pts;
    for (std::size_t i = 0; i < series[s].x.size() && i < series[s].y.size(); ++i) {
      if (!std::isfinite(series[s].y[i])) continue;
      const double X = px(series[s].x[i]), Y = py(series[s].y[i]);
      pts << X << "," << Y << " ";
      o << "<circle cx=\"" << X << "\" cy=\"" << Y << "\" r=\"3\" fill=\"" << c << "\"/>\n";
    }
    o << "<polyline fill=\"none\" stroke=\"" << c << "\" stroke-width=\"1.5\" points=\""
      << pts.str() << "\"/>\n";
    o << "<text x=\"" << W - right - 4 << "\" y=\"" << top + 14 * (s + 1)
      << "\" text-anchor=\"end\" fill=\"" << c << "\">" << escape(series[s].name)
      << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

}  // namespace svg
