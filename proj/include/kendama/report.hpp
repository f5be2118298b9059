#pragma once

/**
 * @file report.hpp
 * @brief Dependency-free SVG line charts of sweep summaries.
 */

#include <filesystem>
#include <string>
#include <vector>

#include "kendama/harness.hpp"

namespace kendama::report {

struct Series {
  std::string name;
  std::vector<double> y;
  /// Optional shaded interval; both empty or both the size of y.
  std::vector<double> lo;
  std::vector<double> hi;
};

struct Chart {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<double> x;
  std::vector<Series> series;
  bool log_x = false;
};

/**
 * One <path class="series"> per series and one <path class="band"> per
 * interval. A single x value is drawn as a flat segment across the plot.
 */
std::string render_svg(const Chart& chart);

/// Hit-center %, impact velocity mean ± one standard deviation, and catch %.
std::vector<Chart> summary_charts(const harness::SweepSummary& summary);

/// Writes hit_center.svg, impact_vz.svg and catch.svg under `dir`; returns the paths.
std::vector<std::filesystem::path> write_report(const harness::SweepSummary& summary,
                                                const std::filesystem::path& dir);

}  // namespace kendama::report
