#pragma once

#include <string>
#include <vector>

namespace mftg::cli {

struct PlotSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

/// Line chart as a standalone SVG document with a fixed 640×400 viewport.
std::string line_plot_svg(const std::string& title, const std::string& x_label,
                          const std::string& y_label, const std::vector<PlotSeries>& series);

}  // namespace mftg::cli
