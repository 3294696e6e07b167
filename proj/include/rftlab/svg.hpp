#pragma once

#include <string>
#include <vector>

namespace rftlab::svg {

struct Series {
  std::string label;
  std::vector<double> xs;
  std::vector<double> ys;
};

/// Simple line chart with axes, ticks and a legend. Output is a plain SVG
/// string with fixed-precision coordinates, byte-deterministic for identical
/// inputs.
std::string line_chart(const std::string& title, const std::string& x_label,
                       const std::string& y_label, const std::vector<Series>& series,
                       double y_min = 0.0, double y_max = 1.0);

}  // namespace rftlab::svg
