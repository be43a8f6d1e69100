#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include "jamcord/errors.hpp"
#include "jamcord/grasp_simulation.hpp"

namespace jamcord {

struct PlotSeries {
  std::string label;
  GraspTrace trace;
};

struct PlotOptions {
  double width = 640.0;
  double height = 420.0;
  std::optional<Phase> phase;  // only plot this phase
  std::string title;
};

namespace svg_detail {

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", std::abs(v) < 0.005 ? 0.0 : v);
  return buf;
}

inline std::string escape(const std::string& s) {
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

/// 1, 2 or 5 times a power of ten, giving about `target` intervals.
inline double nice_step(double span, int target) {
  const double raw = span / target;
  const double p = std::pow(10.0, std::floor(std::log10(raw)));
  for (double m : {1.0, 2.0, 5.0})
    if (m * p >= raw) return m * p;
  return 10.0 * p;
}

inline std::string tick_label(double v, double step) {
  char buf[32];
  const int decimals = step >= 1.0 ? 0 : static_cast<int>(std::ceil(-std::log10(step)));
  std::snprintf(buf, sizeof buf, "%.*f", decimals, std::abs(v) < step * 1e-6 ? 0.0 : v);
  return buf;
}

struct Axis {
  double lo, hi, step;
};

inline Axis make_axis(double lo, double hi) {
  if (!(hi > lo)) {
    lo -= 1.0;
    hi += 1.0;
  }
  const double step = nice_step(hi - lo, 5);
  return {std::floor(lo / step) * step, std::ceil(hi / step) * step, step};
}

constexpr const char* kColours[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf",
                                    "#7f7f7f"};

}  // namespace svg_detail

/// One <g> per series, one <polyline> per phase inside it. Output depends only
/// on the inputs.
inline std::string plot_svg(const std::vector<PlotSeries>& series, const PlotOptions& opt = {}) {
  using namespace svg_detail;
  if (series.empty()) throw InvalidInput("plot: no traces");

  std::vector<std::vector<std::vector<TraceSample>>> runs(series.size());
  double xmin = 0.0, xmax = 0.0, ymin = 0.0, ymax = 0.0;
  bool any = false;
  for (std::size_t i = 0; i < series.size(); ++i) {
    for (Phase p : {Phase::Press, Phase::Jam, Phase::Lift}) {
      if (opt.phase && *opt.phase != p) continue;
      auto s = series[i].trace.phase(p);
      if (s.empty()) continue;
      for (const auto& t : s) {
        if (!any) {
          xmin = xmax = t.displacement;
          ymin = ymax = t.force;
          any = true;
        }
        xmin = std::min(xmin, t.displacement);
        xmax = std::max(xmax, t.displacement);
        ymin = std::min(ymin, t.force);
        ymax = std::max(ymax, t.force);
      }
      runs[i].push_back(std::move(s));
    }
  }
  if (!any) throw InvalidInput("plot: traces hold no samples to draw");
  ymin = std::min(ymin, 0.0);

  const Axis ax = make_axis(xmin, xmax), ay = make_axis(ymin, ymax);
  const double left = 70.0, right = 20.0, top = opt.title.empty() ? 20.0 : 40.0, bottom = 55.0;
  const double pw = opt.width - left - right, ph = opt.height - top - bottom;
  auto X = [&](double x) { return left + (x - ax.lo) / (ax.hi - ax.lo) * pw; };
  auto Y = [&](double y) { return top + ph - (y - ay.lo) / (ay.hi - ay.lo) * ph; };

  std::string o;
  o += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  o += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(opt.width) + "\" height=\"" + num(opt.height) +
       "\" viewBox=\"0 0 " + num(opt.width) + " " + num(opt.height) + "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o += "<rect x=\"0\" y=\"0\" width=\"" + num(opt.width) + "\" height=\"" + num(opt.height) + "\" fill=\"white\"/>\n";
  if (!opt.title.empty())
    o += "<text x=\"" + num(left + pw / 2) + "\" y=\"24.00\" text-anchor=\"middle\" font-size=\"14\">" +
         escape(opt.title) + "</text>\n";

  o += "<g class=\"grid\" stroke=\"#dddddd\" stroke-width=\"1\">\n";
  const int nx = static_cast<int>(std::lround((ax.hi - ax.lo) / ax.step));
  const int ny = static_cast<int>(std::lround((ay.hi - ay.lo) / ay.step));
  for (int k = 0; k <= nx; ++k) {
    const double x = X(ax.lo + k * ax.step);
    o += "<line x1=\"" + num(x) + "\" y1=\"" + num(top) + "\" x2=\"" + num(x) + "\" y2=\"" + num(top + ph) + "\"/>\n";
  }
  for (int k = 0; k <= ny; ++k) {
    const double y = Y(ay.lo + k * ay.step);
    o += "<line x1=\"" + num(left) + "\" y1=\"" + num(y) + "\" x2=\"" + num(left + pw) + "\" y2=\"" + num(y) + "\"/>\n";
  }
  o += "</g>\n";

  o += "<rect x=\"" + num(left) + "\" y=\"" + num(top) + "\" width=\"" + num(pw) + "\" height=\"" + num(ph) +
       "\" fill=\"none\" stroke=\"black\"/>\n";
  o += "<g class=\"ticks\">\n";
  for (int k = 0; k <= nx; ++k) {
    const double v = ax.lo + k * ax.step;
    o += "<text x=\"" + num(X(v)) + "\" y=\"" + num(top + ph + 16) + "\" text-anchor=\"middle\">" +
         tick_label(v, ax.step) + "</text>\n";
  }
  for (int k = 0; k <= ny; ++k) {
    const double v = ay.lo + k * ay.step;
    o += "<text x=\"" + num(left - 6) + "\" y=\"" + num(Y(v) + 4) + "\" text-anchor=\"end\">" +
         tick_label(v, ay.step) + "</text>\n";
  }
  o += "</g>\n";
  o += "<text x=\"" + num(left + pw / 2) + "\" y=\"" + num(opt.height - 12) +
       "\" text-anchor=\"middle\">displacement [mm]</text>\n";
  o += "<text x=\"16.00\" y=\"" + num(top + ph / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 16.00 " +
       num(top + ph / 2) + ")\">force [N]</text>\n";

  for (std::size_t i = 0; i < series.size(); ++i) {
    const std::string colour = kColours[i % std::size(kColours)];
    o += "<g class=\"trace\" id=\"trace-" + std::to_string(i) + "\">\n";
    o += "<title>" + escape(series[i].label) + "</title>\n";
    for (const auto& run : runs[i]) {
      o += "<polyline fill=\"none\" stroke=\"" + colour + "\" stroke-width=\"1.5\" data-phase=\"" +
           to_string(run.front().phase) + "\" points=\"";
      for (std::size_t k = 0; k < run.size(); ++k) {
        if (k) o += ' ';
        o += num(X(run[k].displacement)) + "," + num(Y(run[k].force));
      }
      o += "\"/>\n";
    }
    o += "</g>\n";
  }

  o += "<g class=\"legend\">\n";
  for (std::size_t i = 0; i < series.size(); ++i) {
    const double y = top + 14 + 16 * static_cast<double>(i);
    const double x = left + 10;
    o += "<line x1=\"" + num(x) + "\" y1=\"" + num(y - 4) + "\" x2=\"" + num(x + 20) + "\" y2=\"" + num(y - 4) +
         "\" stroke=\"" + kColours[i % std::size(kColours)] + "\" stroke-width=\"2\"/>\n";
    o += "<text x=\"" + num(x + 26) + "\" y=\"" + num(y) + "\">" + escape(series[i].label) + "</text>\n";
  }
  o += "</g>\n</svg>\n";
  return o;
}

}  // namespace jamcord
