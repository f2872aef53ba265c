#pragma once

// CSV tables and small SVG figures. Number formatting is fixed so reruns are
// byte-identical.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "repe/common.hpp"

namespace repe::report {

inline std::string num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

class CsvTable {
public:
  explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

  CsvTable& row(std::vector<std::string> cells) {
    if (cells.size() != header_.size()) throw Error(ErrorKind::invalid_argument, "csv row has the wrong number of cells");
    rows_.push_back(std::move(cells));
    return *this;
  }

  std::string str() const {
    std::string out;
    auto line = [&](const std::vector<std::string>& cells) {
      for (std::size_t i = 0; i < cells.size(); ++i) out += (i ? "," : "") + csv_field(cells[i]);
      out += '\n';
    };
    line(header_);
    for (const auto& r : rows_) line(r);
    return out;
  }

  std::size_t size() const { return rows_.size(); }

private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::io, "cannot open '" + path + "' for writing");
  f << text;
  if (!f) throw Error(ErrorKind::io, "write to '" + path + "' failed");
}

inline std::string xml_escape(const std::string& s) {
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

/// Diverging blue-white-red for signed data, white-to-blue otherwise.
inline std::string color(double v, double lo, double hi) {
  auto hex = [](double x) {
    char b[8];
    std::snprintf(b, sizeof b, "%02x", static_cast<int>(std::lround(std::clamp(x, 0.0, 1.0) * 255)));
    return std::string(b);
  };
  if (std::isnan(v)) return "#cccccc";
  double r, g, b;
  if (lo < 0 && hi > 0) {
    const double m = std::max(-lo, hi);
    const double t = std::clamp(v / m, -1.0, 1.0);
    if (t >= 0) { r = 1; g = 1 - t; b = 1 - t; }
    else { r = 1 + t; g = 1 + t; b = 1; }
  } else {
    const double t = hi > lo ? std::clamp((v - lo) / (hi - lo), 0.0, 1.0) : 0.5;
    r = 1 - 0.85 * t; g = 1 - 0.6 * t; b = 1;
  }
  return "#" + hex(r) + hex(g) + hex(b);
}

struct Heatmap {
  std::string title;
  std::vector<std::string> row_labels, col_labels;
  std::vector<std::vector<double>> values; // [row][col]
  std::string x_label = "layer";
};

inline std::string svg_heatmap(const Heatmap& h) {
  const int cell = 28, left = 120, top = 40;
  const int cols = static_cast<int>(h.col_labels.size()), rows = static_cast<int>(h.row_labels.size());
  double lo = INFINITY, hi = -INFINITY;
  for (const auto& r : h.values)
    for (double v : r)
      if (!std::isnan(v)) lo = std::min(lo, v), hi = std::max(hi, v);
  if (!std::isfinite(lo)) lo = 0, hi = 1;
  std::ostringstream s;
  const int w = left + cols * cell + 20, ht = top + rows * cell + 50;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << ht << "\" font-family=\"sans-serif\" font-size=\"10\">\n";
  s << "<text x=\"" << left << "\" y=\"20\" font-size=\"13\">" << xml_escape(h.title) << "</text>\n";
  for (int i = 0; i < rows; ++i) {
    s << "<text x=\"" << left - 6 << "\" y=\"" << top + i * cell + cell / 2 + 4 << "\" text-anchor=\"end\">" << xml_escape(h.row_labels[i])
      << "</text>\n";
    for (int j = 0; j < cols; ++j) {
      const double v = h.values.at(i).at(j);
      s << "<rect x=\"" << left + j * cell << "\" y=\"" << top + i * cell << "\" width=\"" << cell << "\" height=\"" << cell
        << "\" fill=\"" << color(v, lo, hi) << "\"><title>" << num(v) << "</title></rect>\n";
    }
  }
  for (int j = 0; j < cols; ++j)
    s << "<text x=\"" << left + j * cell + cell / 2 << "\" y=\"" << top + rows * cell + 14 << "\" text-anchor=\"middle\">"
      << xml_escape(h.col_labels[j]) << "</text>\n";
  s << "<text x=\"" << left + cols * cell / 2 << "\" y=\"" << top + rows * cell + 34 << "\" text-anchor=\"middle\">" << xml_escape(h.x_label)
    << "</text>\n";
  s << "</svg>\n";
  return s.str();
}

struct Series {
  std::string name;
  std::vector<double> x, y;
};

inline std::string svg_lines(const std::string& title, const std::vector<Series>& series, const std::string& x_label,
                             const std::string& y_label) {
  static constexpr const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
  const double W = 520, H = 300, left = 60, top = 40, pw = 340, ph = 200;
  double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
  for (const auto& sr : series)
    for (std::size_t i = 0; i < sr.x.size(); ++i) {
      x0 = std::min(x0, sr.x[i]), x1 = std::max(x1, sr.x[i]);
      if (std::isfinite(sr.y[i])) y0 = std::min(y0, sr.y[i]), y1 = std::max(y1, sr.y[i]);
    }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1;
  if (!std::isfinite(y0)) y0 = 0, y1 = 1;
  if (x1 == x0) x1 = x0 + 1;
  if (y1 == y0) y0 -= 0.5, y1 += 0.5;
  auto px = [&](double x) { return left + (x - x0) / (x1 - x0) * pw; };
  auto py = [&](double y) { return top + ph - (y - y0) / (y1 - y0) * ph; };
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" font-family=\"sans-serif\" font-size=\"10\">\n";
  s << "<text x=\"" << left << "\" y=\"20\" font-size=\"13\">" << xml_escape(title) << "</text>\n";
  s << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph << "\" fill=\"none\" stroke=\"#888\"/>\n";
  if (y0 < 0 && y1 > 0)
    s << "<line x1=\"" << left << "\" x2=\"" << left + pw << "\" y1=\"" << num(py(0)) << "\" y2=\"" << num(py(0))
      << "\" stroke=\"#bbb\" stroke-dasharray=\"3,3\"/>\n";
  s << "<text x=\"" << left << "\" y=\"" << top + ph + 14 << "\">" << num(x0) << "</text>\n";
  s << "<text x=\"" << left + pw << "\" y=\"" << top + ph + 14 << "\" text-anchor=\"end\">" << num(x1) << "</text>\n";
  s << "<text x=\"" << left - 4 << "\" y=\"" << top + 4 << "\" text-anchor=\"end\">" << num(y1) << "</text>\n";
  s << "<text x=\"" << left - 4 << "\" y=\"" << top + ph << "\" text-anchor=\"end\">" << num(y0) << "</text>\n";
  s << "<text x=\"" << left + pw / 2 << "\" y=\"" << top + ph + 30 << "\" text-anchor=\"middle\">" << xml_escape(x_label) << "</text>\n";
  s << "<text x=\"14\" y=\"" << top + ph / 2 << "\" transform=\"rotate(-90 14 " << top + ph / 2 << ")\" text-anchor=\"middle\">"
    << xml_escape(y_label) << "</text>\n";
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& sr = series[k];
    const char* c = palette[k % std::size(palette)];
    s << "<polyline fill=\"none\" stroke=\"" << c << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < sr.x.size(); ++i)
      if (std::isfinite(sr.y[i])) s << num(px(sr.x[i])) << "," << num(py(sr.y[i])) << " ";
    s << "\"/>\n";
    s << "<text x=\"" << left + pw + 10 << "\" y=\"" << top + 12 + 14 * k << "\" fill=\"" << c << "\">" << xml_escape(sr.name) << "</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

} // namespace repe::report
