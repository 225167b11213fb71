#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

namespace taskphase {

/// One curve with a symmetric band (mean +- sd).
struct CurveBand {
  std::string label;
  std::vector<double> x;
  std::vector<double> mean;
  std::vector<double> sd;
};

namespace detail {

inline std::string svg_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

inline std::string svg_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

}  // namespace detail

/// Self-contained SVG line plot with shaded bands and a legend.
inline std::string render_band_plot(const std::vector<CurveBand>& curves, const std::string& title,
                                    const std::string& x_label, const std::string& y_label) {
  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b"};
  const double width = 720, height = 440, left = 70, right = 190, top = 40, bottom = 60;
  const double pw = width - left - right, ph = height - top - bottom;

  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& c : curves)
    for (std::size_t i = 0; i < c.x.size(); ++i) {
      x0 = std::min(x0, c.x[i]);
      x1 = std::max(x1, c.x[i]);
      y0 = std::min(y0, c.mean[i] - c.sd[i]);
      y1 = std::max(y1, c.mean[i] + c.sd[i]);
    }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 == x0) x1 = x0 + 1;
  if (y1 - y0 < 1e-12) y0 -= 0.5, y1 += 0.5;
  const double pad = 0.05 * (y1 - y0);
  y0 -= pad;
  y1 += pad;
  auto px = [&](double x) { return left + (x - x0) / (x1 - x0) * pw; };
  auto py = [&](double y) { return top + (1.0 - (y - y0) / (y1 - y0)) * ph; };

  using detail::svg_num;
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<text x=\"" << svg_num(left + pw / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">"
    << detail::svg_escape(title) << "</text>\n";
  s << "<rect x=\"" << svg_num(left) << "\" y=\"" << svg_num(top) << "\" width=\"" << svg_num(pw) << "\" height=\""
    << svg_num(ph) << "\" fill=\"none\" stroke=\"#333\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double xv = x0 + (x1 - x0) * k / 4.0, yv = y0 + (y1 - y0) * k / 4.0;
    s << "<text x=\"" << svg_num(px(xv)) << "\" y=\"" << svg_num(top + ph + 16) << "\" text-anchor=\"middle\">"
      << detail::tick_label(xv) << "</text>\n";
    s << "<text x=\"" << svg_num(left - 6) << "\" y=\"" << svg_num(py(yv) + 4) << "\" text-anchor=\"end\">"
      << detail::tick_label(yv) << "</text>\n";
    s << "<line x1=\"" << svg_num(left) << "\" x2=\"" << svg_num(left + pw) << "\" y1=\"" << svg_num(py(yv))
      << "\" y2=\"" << svg_num(py(yv)) << "\" stroke=\"#ddd\"/>\n";
  }
  s << "<text x=\"" << svg_num(left + pw / 2) << "\" y=\"" << svg_num(height - 18) << "\" text-anchor=\"middle\">"
    << detail::svg_escape(x_label) << "</text>\n";
  s << "<text transform=\"translate(18," << svg_num(top + ph / 2) << ") rotate(-90)\" text-anchor=\"middle\">"
    << detail::svg_escape(y_label) << "</text>\n";

  for (std::size_t k = 0; k < curves.size(); ++k) {
    const auto& c = curves[k];
    const char* color = palette[k % (sizeof palette / sizeof *palette)];
    if (c.x.empty()) continue;
    s << "<polygon fill=\"" << color << "\" fill-opacity=\"0.2\" stroke=\"none\" points=\"";
    for (std::size_t i = 0; i < c.x.size(); ++i) s << svg_num(px(c.x[i])) << ',' << svg_num(py(c.mean[i] + c.sd[i])) << ' ';
    for (std::size_t i = c.x.size(); i-- > 0;) s << svg_num(px(c.x[i])) << ',' << svg_num(py(c.mean[i] - c.sd[i])) << ' ';
    s << "\"/>\n<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < c.x.size(); ++i) s << svg_num(px(c.x[i])) << ',' << svg_num(py(c.mean[i])) << ' ';
    s << "\"/>\n";
    const double ly = top + 14 + 18.0 * static_cast<double>(k);
    s << "<line x1=\"" << svg_num(left + pw + 12) << "\" x2=\"" << svg_num(left + pw + 32) << "\" y1=\"" << svg_num(ly)
      << "\" y2=\"" << svg_num(ly) << "\" stroke=\"" << color << "\" stroke-width=\"3\"/>\n";
    s << "<text x=\"" << svg_num(left + pw + 38) << "\" y=\"" << svg_num(ly + 4) << "\">" << detail::svg_escape(c.label)
      << "</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

}  // namespace taskphase
