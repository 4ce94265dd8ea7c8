#pragma once

#include <string>
#include <vector>

namespace salmask {

struct PlotSeries {
  std::string name;
  std::vector<std::pair<double, double>> points;
};

// Minimal line plot rendered straight to a PNG: axes, ticks, one colored
// polyline per series with a small legend.
void render_line_plot(const std::string& path, const std::string& title,
                      const std::vector<PlotSeries>& series);

}  // namespace salmask
