#pragma once

#include <string>
#include <vector>

namespace omnifht {

// One labelled curve for write_curves_svg. x and y must be the same length.
struct CurveSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

// Plain CSV, one header row then one row per index. All columns must share
// a length matching the header count. Throws DataError when the file cannot
// be opened, ConfigError on shape mismatches.
void write_csv(const std::string& path, const std::vector<std::string>& headers,
               const std::vector<std::vector<double>>& columns);

// Minimal self-contained line plot (polylines, axes, ticks, legend). Meant
// for quick inspection of FSC / loss / angle curves without a plotting
// stack. Every series needs at least two points.
void write_curves_svg(const std::string& path, const std::string& title,
                      const std::string& x_label, const std::string& y_label,
                      const std::vector<CurveSeries>& series);

}  // namespace omnifht
