#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "lossprobe/harness.hpp"

namespace lossprobe::harness {

namespace {

constexpr double kWidth = 720.0;
constexpr double kHeight = 420.0;
constexpr double kLeft = 70.0;
constexpr double kRight = 20.0;
constexpr double kTop = 40.0;
constexpr double kBottom = 50.0;

struct Axis {
  double lo = 0.0;
  double hi = 1.0;
  double pixel_lo = 0.0;
  double pixel_hi = 1.0;

  double map(double v) const {
    if (hi == lo) return 0.5 * (pixel_lo + pixel_hi);
    return pixel_lo + (v - lo) / (hi - lo) * (pixel_hi - pixel_lo);
  }
};

Axis padded(double lo, double hi, double p0, double p1) {
  if (!(hi > lo)) {
    lo -= 1.0;
    hi += 1.0;
  }
  const double pad = 0.05 * (hi - lo);
  return {lo - pad, hi + pad, p0, p1};
}

std::string header(const std::string& title) {
  return fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" "
      "viewBox=\"0 0 {0} {1}\" font-family=\"sans-serif\" font-size=\"12\">\n"
      "<rect width=\"{0}\" height=\"{1}\" fill=\"white\"/>\n"
      "<text x=\"{2}\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">{3}</text>\n",
      kWidth, kHeight, kWidth / 2, title);
}

std::string frame(const Axis& x, const Axis& y, const std::string& xlabel,
                  const std::string& ylabel) {
  std::string out;
  const double x0 = kLeft, x1 = kWidth - kRight, y0 = kHeight - kBottom, y1 = kTop;
  out += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" "
                     "stroke=\"#444\"/>\n",
                     x0, y1, x1 - x0, y0 - y1);
  if (y.lo < 0.0 && y.hi > 0.0) {
    out += fmt::format("<line x1=\"{}\" y1=\"{:.2f}\" x2=\"{}\" y2=\"{:.2f}\" stroke=\"#999\" "
                       "stroke-dasharray=\"4 3\"/>\n",
                       x0, y.map(0.0), x1, y.map(0.0));
  }
  for (int i = 0; i <= 4; ++i) {
    const double xv = x.lo + (x.hi - x.lo) * i / 4.0;
    const double yv = y.lo + (y.hi - y.lo) * i / 4.0;
    out += fmt::format("<text x=\"{:.2f}\" y=\"{}\" text-anchor=\"middle\">{:.4g}</text>\n",
                       x.map(xv), y0 + 16, xv);
    out += fmt::format("<text x=\"{}\" y=\"{:.2f}\" text-anchor=\"end\">{:.4g}</text>\n", x0 - 6,
                       y.map(yv) + 4, yv);
  }
  out += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
                     (x0 + x1) / 2, kHeight - 12, xlabel);
  out += fmt::format("<text x=\"16\" y=\"{}\" text-anchor=\"middle\" "
                     "transform=\"rotate(-90 16 {})\">{}</text>\n",
                     (y0 + y1) / 2, (y0 + y1) / 2, ylabel);
  return out;
}

}  // namespace

std::string svg_delta_vs_length(const SweepReport& report) {
  double xmin = std::numeric_limits<double>::max(), xmax = std::numeric_limits<double>::lowest();
  double ymin = xmin, ymax = xmax;
  for (const auto& a : report.aggregates) {
    xmin = std::min(xmin, static_cast<double>(a.length));
    xmax = std::max(xmax, static_cast<double>(a.length));
    ymin = std::min(ymin, a.mean - a.std);
    ymax = std::max(ymax, a.mean + a.std);
  }
  if (report.aggregates.empty()) xmin = xmax = ymin = ymax = 0.0;
  ymin = std::min(ymin, 0.0);
  ymax = std::max(ymax, 0.0);
  const Axis x = padded(xmin, xmax, kLeft, kWidth - kRight);
  const Axis y = padded(ymin, ymax, kHeight - kBottom, kTop);

  std::string out = header(fmt::format("Mean loss difference vs. perturbation length ({})",
                                       report.kind));
  out += frame(x, y, "perturbation length (tokens)", "mean delta NLL (nats) +/- std");
  std::string path;
  for (const auto& a : report.aggregates) {
    const double px = x.map(static_cast<double>(a.length));
    out += fmt::format("<line x1=\"{0:.2f}\" y1=\"{1:.2f}\" x2=\"{0:.2f}\" y2=\"{2:.2f}\" "
                       "stroke=\"#1f77b4\" stroke-opacity=\"0.5\"/>\n",
                       px, y.map(a.mean - a.std), y.map(a.mean + a.std));
    out += fmt::format("<circle cx=\"{:.2f}\" cy=\"{:.2f}\" r=\"3.5\" fill=\"#1f77b4\"/>\n", px,
                       y.map(a.mean));
    path += fmt::format("{}{:.2f},{:.2f} ", path.empty() ? "M" : "L", px, y.map(a.mean));
  }
  if (!path.empty()) {
    out += fmt::format("<path d=\"{}\" fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"2\"/>\n",
                       path);
  }
  out += "</svg>\n";
  return out;
}

std::string svg_token_profile(const LengthAggregate& agg, const PerturbWindow& window) {
  const auto& v = agg.mean_delta_trace;
  double ymin = 0.0, ymax = 0.0;
  for (double d : v) {
    ymin = std::min(ymin, d);
    ymax = std::max(ymax, d);
  }
  const Axis x = padded(0.0, v.empty() ? 1.0 : static_cast<double>(v.size() - 1), kLeft,
                        kWidth - kRight);
  const Axis y = padded(ymin, ymax, kHeight - kBottom, kTop);

  std::string out = header(fmt::format("Token-wise mean delta NLL, perturbation length {} (n={})",
                                       agg.length, agg.n));
  const auto shade = [&](const analysis::Range& r, const char* color, const char* label) {
    if (r.empty()) return;
    const double a = x.map(static_cast<double>(r.start)), b = x.map(static_cast<double>(r.end));
    out += fmt::format("<rect x=\"{:.2f}\" y=\"{}\" width=\"{:.2f}\" height=\"{}\" fill=\"{}\" "
                       "fill-opacity=\"0.25\"><title>{} [{}, {})</title></rect>\n",
                       a, kTop, std::max(1.0, b - a), kHeight - kTop - kBottom, color, label,
                       r.start, r.end);
  };
  shade(agg.mean_regions.peak, "#d62728", "peak");
  shade(agg.mean_regions.assimilation, "#2ca02c", "assimilation");
  shade(agg.mean_regions.recovery, "#ff7f0e", "recovery");
  out += frame(x, y, "token index", "mean delta NLL (nats)");
  out += fmt::format("<line x1=\"{0:.2f}\" y1=\"{1}\" x2=\"{0:.2f}\" y2=\"{2}\" stroke=\"#444\" "
                     "stroke-dasharray=\"2 2\"/>\n",
                     x.map(static_cast<double>(window.start)), kTop, kHeight - kBottom);
  std::string path;
  for (std::size_t t = 0; t < v.size(); ++t) {
    path += fmt::format("{}{:.2f},{:.2f} ", t == 0 ? "M" : "L", x.map(static_cast<double>(t)),
                        y.map(v[t]));
  }
  if (!path.empty()) {
    out += fmt::format("<path d=\"{}\" fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1.2\"/>\n",
                       path);
  }
  out += "<g font-size=\"11\">"
         "<rect x=\"560\" y=\"46\" width=\"10\" height=\"10\" fill=\"#d62728\" fill-opacity=\"0.4\"/>"
         "<text x=\"575\" y=\"55\">peak</text>"
         "<rect x=\"560\" y=\"62\" width=\"10\" height=\"10\" fill=\"#2ca02c\" fill-opacity=\"0.4\"/>"
         "<text x=\"575\" y=\"71\">assimilation</text>"
         "<rect x=\"560\" y=\"78\" width=\"10\" height=\"10\" fill=\"#ff7f0e\" fill-opacity=\"0.4\"/>"
         "<text x=\"575\" y=\"87\">recovery</text></g>\n";
  out += "</svg>\n";
  return out;
}

}  // namespace lossprobe::harness
