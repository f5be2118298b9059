#include "kendama/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "kendama/io.hpp"

namespace kendama::report {

namespace {

constexpr double kWidth = 640.0;
constexpr double kHeight = 400.0;
constexpr double kLeft = 70.0;
constexpr double kRight = 20.0;
constexpr double kTop = 40.0;
constexpr double kBottom = 50.0;

const char* const kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
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

struct Scale {
  double lo, hi, px_lo, px_hi;
  bool log;
  double operator()(double v) const {
    const double a = log ? std::log10(lo) : lo;
    const double b = log ? std::log10(hi) : hi;
    const double x = log ? std::log10(v) : v;
    if (b == a) return 0.5 * (px_lo + px_hi);
    return px_lo + (x - a) / (b - a) * (px_hi - px_lo);
  }
};

}  // namespace

std::string render_svg(const Chart& c) {
  if (c.x.empty()) throw std::invalid_argument("chart needs at least one x value");
  for (const auto& s : c.series) {
    if (s.y.size() != c.x.size()) throw std::invalid_argument("series '" + s.name + "' does not match x");
    if (s.lo.size() != s.hi.size() || (!s.lo.empty() && s.lo.size() != c.x.size())) {
      throw std::invalid_argument("series '" + s.name + "' has a malformed interval");
    }
  }
  const bool log_x = c.log_x && std::all_of(c.x.begin(), c.x.end(), [](double v) { return v > 0.0; });
  double ylo = INFINITY, yhi = -INFINITY;
  for (const auto& s : c.series) {
    for (double v : s.y) ylo = std::min(ylo, v), yhi = std::max(yhi, v);
    for (double v : s.lo) ylo = std::min(ylo, v);
    for (double v : s.hi) yhi = std::max(yhi, v);
  }
  if (!std::isfinite(ylo)) ylo = 0.0, yhi = 1.0;
  if (yhi - ylo < 1e-12) ylo -= 1.0, yhi += 1.0;
  const double pad = 0.05 * (yhi - ylo);
  ylo -= pad;
  yhi += pad;

  const double xmin = *std::min_element(c.x.begin(), c.x.end());
  const double xmax = *std::max_element(c.x.begin(), c.x.end());
  const bool single = c.x.size() == 1;
  const Scale sx{xmin, xmax, kLeft, kWidth - kRight, log_x};
  const Scale sy{ylo, yhi, kHeight - kBottom, kTop, false};
  auto px = [&](std::size_t i) { return sx(c.x[i]); };

  std::string out;
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(kWidth) + "\" height=\"" + num(kHeight) +
         "\" viewBox=\"0 0 " + num(kWidth) + " " + num(kHeight) + "\">\n";
  out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out += "<text x=\"" + num(kWidth / 2) + "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">" + escape(c.title) +
         "</text>\n";
  // Axes.
  out += "<line class=\"axis\" x1=\"" + num(kLeft) + "\" y1=\"" + num(kHeight - kBottom) + "\" x2=\"" +
         num(kWidth - kRight) + "\" y2=\"" + num(kHeight - kBottom) + "\" stroke=\"black\"/>\n";
  out += "<line class=\"axis\" x1=\"" + num(kLeft) + "\" y1=\"" + num(kTop) + "\" x2=\"" + num(kLeft) + "\" y2=\"" +
         num(kHeight - kBottom) + "\" stroke=\"black\"/>\n";
  out += "<text class=\"x-label\" x=\"" + num((kLeft + kWidth - kRight) / 2) + "\" y=\"" + num(kHeight - 10) +
         "\" text-anchor=\"middle\" font-size=\"13\">" + escape(c.x_label) + "</text>\n";
  out += "<text class=\"y-label\" x=\"16\" y=\"" + num((kTop + kHeight - kBottom) / 2) +
         "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 16 " +
         num((kTop + kHeight - kBottom) / 2) + ")\">" + escape(c.y_label) + "</text>\n";
  for (std::size_t i = 0; i < c.x.size(); ++i) {
    out += "<text x=\"" + num(px(i)) + "\" y=\"" + num(kHeight - kBottom + 16) +
           "\" text-anchor=\"middle\" font-size=\"11\">" + tick(c.x[i]) + "</text>\n";
  }
  for (int k = 0; k <= 4; ++k) {
    const double v = ylo + (yhi - ylo) * k / 4.0;
    out += "<text x=\"" + num(kLeft - 6) + "\" y=\"" + num(sy(v) + 4) + "\" text-anchor=\"end\" font-size=\"11\">" +
           tick(std::round(v * 1000.0) / 1000.0) + "</text>\n";
  }

  for (std::size_t k = 0; k < c.series.size(); ++k) {
    const auto& s = c.series[k];
    const char* color = kColors[k % (sizeof kColors / sizeof kColors[0])];
    if (!s.lo.empty()) {
      std::string d;
      if (single) {
        d = "M" + num(kLeft) + "," + num(sy(s.hi[0])) + " L" + num(kWidth - kRight) + "," + num(sy(s.hi[0])) + " L" +
            num(kWidth - kRight) + "," + num(sy(s.lo[0])) + " L" + num(kLeft) + "," + num(sy(s.lo[0]));
      } else {
        for (std::size_t i = 0; i < c.x.size(); ++i) d += (i ? " L" : "M") + num(px(i)) + "," + num(sy(s.hi[i]));
        for (std::size_t i = c.x.size(); i-- > 0;) d += " L" + num(px(i)) + "," + num(sy(s.lo[i]));
      }
      out += "<path class=\"band\" d=\"" + d + " Z\" fill=\"" + color + "\" fill-opacity=\"0.2\" stroke=\"none\"/>\n";
    }
    std::string d;
    if (single) {
      d = "M" + num(kLeft) + "," + num(sy(s.y[0])) + " L" + num(kWidth - kRight) + "," + num(sy(s.y[0]));
    } else {
      for (std::size_t i = 0; i < c.x.size(); ++i) d += (i ? " L" : "M") + num(px(i)) + "," + num(sy(s.y[i]));
    }
    out += "<path class=\"series\" data-name=\"" + escape(s.name) + "\" d=\"" + d + "\" fill=\"none\" stroke=\"" +
           color + "\" stroke-width=\"2\"/>\n";
    for (std::size_t i = 0; i < c.x.size(); ++i) {
      out += "<circle cx=\"" + num(single ? 0.5 * (kLeft + kWidth - kRight) : px(i)) + "\" cy=\"" + num(sy(s.y[i])) +
             "\" r=\"3\" fill=\"" + color + "\"/>\n";
    }
    out += "<text x=\"" + num(kWidth - kRight - 4) + "\" y=\"" + num(kTop + 14 + 16 * static_cast<double>(k)) +
           "\" text-anchor=\"end\" font-size=\"12\" fill=\"" + color + "\">" + escape(s.name) + "</text>\n";
  }
  out += "</svg>\n";
  return out;
}

std::vector<Chart> summary_charts(const harness::SweepSummary& summary) {
  std::vector<double> x;
  Series hit{"hit center", {}, {}, {}};
  Series vz{"mean impact velocity", {}, {}, {}};
  Series caught{"successful catch", {}, {}, {}};
  for (const auto& s : summary.per_n) {
    x.push_back(static_cast<double>(s.n));
    hit.y.push_back(s.pct(s.hit_center));
    caught.y.push_back(s.pct(s.catches));
    vz.y.push_back(s.impact_vz.mean);
    vz.lo.push_back(s.impact_vz.mean - s.impact_vz.std);
    vz.hi.push_back(s.impact_vz.mean + s.impact_vz.std);
  }
  return {
      {"Hit-center rate vs sample size", "sample size n", "hit center [%]", x, {hit}, true},
      {"Impact relative z-velocity (mean ± 1 std)", "sample size n", "impact velocity [m/s]", x, {vz}, true},
      {"Successful catches vs sample size", "sample size n", "successful catch [%]", x, {caught}, true},
  };
}

std::vector<std::filesystem::path> write_report(const harness::SweepSummary& summary,
                                                const std::filesystem::path& dir) {
  const auto charts = summary_charts(summary);
  const char* names[] = {"hit_center.svg", "impact_vz.svg", "catch.svg"};
  std::vector<std::filesystem::path> paths;
  for (std::size_t i = 0; i < charts.size(); ++i) {
    paths.push_back(dir / names[i]);
    io::write_text(paths.back(), render_svg(charts[i]));
  }
  return paths;
}

}  // namespace kendama::report
