#pragma once

#include <string>
#include <vector>

#include "sgm/io.hpp"

namespace sgm {

struct PlotOptions {
  std::string title;
  bool log_y = false;
  int width = 720;
  int height = 440;
};

// Standalone SVG line chart: one polyline per y column over x. Rows with a
// non-finite x or y are skipped for that series. Missing columns and
// nonpositive values on a log axis raise ConfigError.
std::string plot_svg(const io::Csv& csv, const std::string& x_col,
                     const std::vector<std::string>& y_cols, const PlotOptions& options = {});

}  // namespace sgm
