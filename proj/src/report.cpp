#include "omnifht/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "omnifht/errors.hpp"

namespace omnifht {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

std::string fmt3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                          "#9467bd", "#8c564b"};

}  // namespace

void write_csv(const std::string& path, const std::vector<std::string>& headers,
               const std::vector<std::vector<double>>& columns) {
  if (headers.size() != columns.size())
    throw ConfigError("write_csv: " + std::to_string(headers.size()) +
                      " headers for " + std::to_string(columns.size()) +
                      " columns");
  if (columns.empty()) throw ConfigError("write_csv: no columns");
  for (const auto& c : columns)
    if (c.size() != columns.front().size())
      throw ConfigError("write_csv: column lengths differ");

  std::ofstream out(path);
  if (!out) throw DataError("write_csv: cannot open " + path);
  for (std::size_t i = 0; i < headers.size(); ++i)
    out << (i ? "," : "") << headers[i];
  out << "\n";
  for (std::size_t r = 0; r < columns.front().size(); ++r) {
    for (std::size_t c = 0; c < columns.size(); ++c)
      out << (c ? "," : "") << fmt(columns[c][r]);
    out << "\n";
  }
  if (!out) throw DataError("write_csv: write failed for " + path);
}

void write_curves_svg(const std::string& path, const std::string& title,
                      const std::string& x_label, const std::string& y_label,
                      const std::vector<CurveSeries>& series) {
  if (series.empty()) throw ConfigError("write_curves_svg: no series");
  double x_lo = std::numeric_limits<double>::infinity(), x_hi = -x_lo;
  double y_lo = x_lo, y_hi = -x_lo;
  for (const auto& s : series) {
    if (s.x.size() != s.y.size())
      throw ConfigError("write_curves_svg: x/y length mismatch in series '" +
                        s.label + "'");
    if (s.x.size() < 2)
      throw ConfigError("write_curves_svg: series '" + s.label +
                        "' needs at least two points");
    for (double v : s.x) {
      x_lo = std::min(x_lo, v);
      x_hi = std::max(x_hi, v);
    }
    for (double v : s.y) {
      y_lo = std::min(y_lo, v);
      y_hi = std::max(y_hi, v);
    }
  }
  if (x_hi <= x_lo) x_hi = x_lo + 1.0;
  if (y_hi <= y_lo) y_hi = y_lo + 1.0;
  const double y_pad = 0.05 * (y_hi - y_lo);
  y_lo -= y_pad;
  y_hi += y_pad;

  const double w = 800, h = 500;
  const double ml = 70, mr = 20, mt = 40, mb = 55;
  const auto px = [&](double x) {
    return ml + (x - x_lo) / (x_hi - x_lo) * (w - ml - mr);
  };
  const auto py = [&](double y) {
    return h - mb - (y - y_lo) / (y_hi - y_lo) * (h - mt - mb);
  };

  std::ofstream out(path);
  if (!out) throw DataError("write_curves_svg: cannot open " + path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w
      << "\" height=\"" << h << "\" viewBox=\"0 0 " << w << " " << h
      << "\">\n"
      << "<rect width=\"" << w << "\" height=\"" << h
      << "\" fill=\"white\"/>\n"
      << "<text x=\"" << w / 2 << "\" y=\"24\" text-anchor=\"middle\" "
         "font-family=\"sans-serif\" font-size=\"16\">"
      << title << "</text>\n";

  // Axes with five ticks per side.
  out << "<g font-family=\"sans-serif\" font-size=\"11\" fill=\"#333\">\n";
  for (int t = 0; t <= 5; ++t) {
    const double xv = x_lo + t * (x_hi - x_lo) / 5.0;
    const double yv = y_lo + t * (y_hi - y_lo) / 5.0;
    out << "<line x1=\"" << px(xv) << "\" y1=\"" << h - mb << "\" x2=\""
        << px(xv) << "\" y2=\"" << mt
        << "\" stroke=\"#ddd\" stroke-width=\"1\"/>\n"
        << "<text x=\"" << px(xv) << "\" y=\"" << h - mb + 16
        << "\" text-anchor=\"middle\">" << fmt3(xv) << "</text>\n"
        << "<line x1=\"" << ml << "\" y1=\"" << py(yv) << "\" x2=\"" << w - mr
        << "\" y2=\"" << py(yv)
        << "\" stroke=\"#ddd\" stroke-width=\"1\"/>\n"
        << "<text x=\"" << ml - 6 << "\" y=\"" << py(yv) + 4
        << "\" text-anchor=\"end\">" << fmt3(yv) << "</text>\n";
  }
  out << "<text x=\"" << (ml + w - mr) / 2 << "\" y=\"" << h - 12
      << "\" text-anchor=\"middle\">" << x_label << "</text>\n"
      << "<text x=\"16\" y=\"" << (mt + h - mb) / 2
      << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
      << (mt + h - mb) / 2 << ")\">" << y_label << "</text>\n</g>\n"
      << "<rect x=\"" << ml << "\" y=\"" << mt << "\" width=\"" << w - ml - mr
      << "\" height=\"" << h - mt - mb
      << "\" fill=\"none\" stroke=\"#333\"/>\n";

  for (std::size_t i = 0; i < series.size(); ++i) {
    const char* color = kPalette[i % (sizeof(kPalette) / sizeof(*kPalette))];
    out << "<polyline fill=\"none\" stroke=\"" << color
        << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t j = 0; j < series[i].x.size(); ++j)
      out << (j ? " " : "") << fmt3(px(series[i].x[j])) << ","
          << fmt3(py(series[i].y[j]));
    out << "\"/>\n";
    const double ly = mt + 16 + 16 * static_cast<double>(i);
    out << "<line x1=\"" << w - mr - 150 << "\" y1=\"" << ly << "\" x2=\""
        << w - mr - 125 << "\" y2=\"" << ly << "\" stroke=\"" << color
        << "\" stroke-width=\"1.5\"/>\n"
        << "<text x=\"" << w - mr - 120 << "\" y=\"" << ly + 4
        << "\" font-family=\"sans-serif\" font-size=\"11\">"
        << series[i].label << "</text>\n";
  }
  out << "</svg>\n";
  if (!out) throw DataError("write_curves_svg: write failed for " + path);
}

}  // namespace omnifht
