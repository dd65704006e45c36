#pragma once

#include <array>
#include <string>
#include <vector>

#include "turbsyn/image.hpp"

namespace turbsyn {

struct PlotSeries {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
  std::array<uint8_t, 3> color{0, 0, 0};
};

struct AxisRange {
  double lo = 0.0;
  double hi = 1.0;
};

// Padded range covering all finite values (5% margin; degenerate data
// widened to a unit span).
AxisRange compute_axis_range(const std::vector<double>& values);

// One scatter panel per series (own y-range), shared x axis and label.
Image render_scatter_panels(const std::string& x_label,
                            const std::vector<PlotSeries>& series,
                            int panel_width = 420, int panel_height = 300);

}  // namespace turbsyn
