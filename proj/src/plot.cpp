#include "sgm/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "sgm/error.hpp"

namespace sgm {

namespace {

constexpr const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                   "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

std::string escape(const std::string& s) {
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

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  void add(double v) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  void pad() {
    if (!(hi > lo)) {
      const double w = lo == 0.0 ? 1.0 : std::abs(lo) * 0.1;
      lo -= w;
      hi += w;
    }
  }
};

std::vector<double> column_values(const io::Csv& csv, const std::string& name) {
  const int j = csv.column(name);
  if (j < 0) throw ConfigError("CSV has no column '" + name + "'");
  std::vector<double> out;
  for (const auto& row : csv.rows) out.push_back(row[static_cast<std::size_t>(j)]);
  return out;
}

}  // namespace

std::string plot_svg(const io::Csv& csv, const std::string& x_col,
                     const std::vector<std::string>& y_cols, const PlotOptions& options) {
  if (y_cols.empty()) throw ConfigError("plot needs at least one y column");
  const std::vector<double> x = column_values(csv, x_col);
  std::vector<std::vector<double>> ys;
  for (const auto& name : y_cols) ys.push_back(column_values(csv, name));

  Range xr, yr;
  std::vector<std::vector<std::pair<double, double>>> series(ys.size());
  for (std::size_t s = 0; s < ys.size(); ++s) {
    for (std::size_t i = 0; i < x.size(); ++i) {
      double y = ys[s][i];
      if (!std::isfinite(x[i]) || !std::isfinite(y)) continue;
      if (options.log_y) {
        if (y <= 0.0)
          throw ConfigError("column '" + y_cols[s] + "' has nonpositive value " + label(y) +
                            " on a log axis");
        y = std::log10(y);
      }
      series[s].emplace_back(x[i], y);
      xr.add(x[i]);
      yr.add(y);
    }
  }
  if (!std::isfinite(xr.lo)) throw ConfigError("no finite points to plot");
  xr.pad();
  yr.pad();

  const double W = options.width, H = options.height;
  const double left = 70, right = 170, top = 40, bottom = 50;
  const double pw = W - left - right, ph = H - top - bottom;
  auto px = [&](double v) { return left + (v - xr.lo) / (xr.hi - xr.lo) * pw; };
  auto py = [&](double v) { return top + (1.0 - (v - yr.lo) / (yr.hi - yr.lo)) * ph; };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << options.width << "\" height=\""
      << options.height << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (!options.title.empty())
    svg << "<text x=\"" << num(left + pw / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">"
        << escape(options.title) << "</text>\n";

  // Axes and ticks.
  svg << "<line x1=\"" << num(left) << "\" y1=\"" << num(top + ph) << "\" x2=\"" << num(left + pw)
      << "\" y2=\"" << num(top + ph) << "\" stroke=\"black\"/>\n";
  svg << "<line x1=\"" << num(left) << "\" y1=\"" << num(top) << "\" x2=\"" << num(left)
      << "\" y2=\"" << num(top + ph) << "\" stroke=\"black\"/>\n";
  constexpr int kTicks = 5;
  for (int i = 0; i <= kTicks; ++i) {
    const double xv = xr.lo + (xr.hi - xr.lo) * i / kTicks;
    const double yv = yr.lo + (yr.hi - yr.lo) * i / kTicks;
    svg << "<line x1=\"" << num(px(xv)) << "\" y1=\"" << num(top + ph) << "\" x2=\"" << num(px(xv))
        << "\" y2=\"" << num(top + ph + 5) << "\" stroke=\"black\"/>";
    svg << "<text x=\"" << num(px(xv)) << "\" y=\"" << num(top + ph + 18)
        << "\" text-anchor=\"middle\">" << label(xv) << "</text>\n";
    svg << "<line x1=\"" << num(left - 5) << "\" y1=\"" << num(py(yv)) << "\" x2=\"" << num(left)
        << "\" y2=\"" << num(py(yv)) << "\" stroke=\"black\"/>";
    svg << "<text x=\"" << num(left - 8) << "\" y=\"" << num(py(yv) + 4) << "\" text-anchor=\"end\">"
        << label(options.log_y ? std::pow(10.0, yv) : yv) << "</text>\n";
  }
  svg << "<text x=\"" << num(left + pw / 2) << "\" y=\"" << num(H - 12)
      << "\" text-anchor=\"middle\">" << escape(x_col) << "</text>\n";
  if (options.log_y)
    svg << "<text x=\"16\" y=\"" << num(top + ph / 2) << "\" transform=\"rotate(-90 16 "
        << num(top + ph / 2) << ")\" text-anchor=\"middle\">log scale</text>\n";

  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* color = kColors[s % std::size(kColors)];
    svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < series[s].size(); ++i)
      svg << (i ? " " : "") << num(px(series[s][i].first)) << ',' << num(py(series[s][i].second));
    svg << "\"/>\n";
    const double ly = top + 10 + 20.0 * static_cast<double>(s);
    svg << "<line x1=\"" << num(left + pw + 15) << "\" y1=\"" << num(ly) << "\" x2=\""
        << num(left + pw + 40) << "\" y2=\"" << num(ly) << "\" stroke=\"" << color
        << "\" stroke-width=\"2\"/>";
    svg << "<text x=\"" << num(left + pw + 46) << "\" y=\"" << num(ly + 4) << "\">"
        << escape(y_cols[s]) << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace sgm
