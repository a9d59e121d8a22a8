#include "didkit/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

namespace didkit {

namespace {

struct Point {
  double x = 0.0;
  double y = 0.0;
  bool whisker = false;
  double lo = 0.0;
  double hi = 0.0;
};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return std::string(buf);
}

// A plain tick spacing: 1, 2, 2.5, 5 times a power of ten.
double nice_step(double span, int ticks) {
  double raw = span / std::max(1, ticks);
  double mag = std::pow(10.0, std::floor(std::log10(raw)));
  for (double m : {1.0, 2.0, 2.5, 5.0, 10.0}) {
    if (raw <= m * mag) return m * mag;
  }
  return 10.0 * mag;
}

}  // namespace

void write_event_study_svg(std::ostream& out, const EventStudyReport& report) {
  std::vector<Point> points;
  for (const auto& [h, eff] : report.placebos.horizons) {
    Point p;
    p.x = -2.0 - h;
    p.y = eff.estimate;
    auto it = report.placebo_ci.find(h);
    if (it != report.placebo_ci.end()) {
      p.whisker = true;
      p.lo = it->second.lower;
      p.hi = it->second.upper;
    }
    points.push_back(p);
  }
  points.push_back({-1.0, 0.0, false, 0.0, 0.0});
  for (const auto& [h, eff] : report.result.horizons) {
    Point p;
    p.x = static_cast<double>(h);
    p.y = eff.estimate;
    auto it = report.horizon_ci.find(h);
    if (it != report.horizon_ci.end()) {
      p.whisker = true;
      p.lo = it->second.lower;
      p.hi = it->second.upper;
    }
    points.push_back(p);
  }
  std::sort(points.begin(), points.end(),
            [](const Point& a, const Point& b) { return a.x < b.x; });

  double xmin = points.front().x - 0.5;
  double xmax = points.back().x + 0.5;
  double ymin = 0.0, ymax = 0.0;
  for (const auto& p : points) {
    ymin = std::min({ymin, p.y, p.whisker ? p.lo : p.y});
    ymax = std::max({ymax, p.y, p.whisker ? p.hi : p.y});
  }
  double pad = 0.08 * std::max(1e-12, ymax - ymin);
  ymin -= pad;
  ymax += pad;

  const double width = 720, height = 480;
  const double ml = 72, mr = 24, mt = 28, mb = 52;
  auto px = [&](double x) {
    return ml + (x - xmin) / (xmax - xmin) * (width - ml - mr);
  };
  auto py = [&](double y) {
    return height - mb - (y - ymin) / (ymax - ymin) * (height - mt - mb);
  };

  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
      << "\" height=\"" << height << "\" viewBox=\"0 0 " << width << " " << height
      << "\">\n";
  out << "<rect width=\"" << width << "\" height=\"" << height
      << "\" fill=\"white\"/>\n";

  // Axes.
  out << "<line x1=\"" << ml << "\" y1=\"" << height - mb << "\" x2=\"" << width - mr
      << "\" y2=\"" << height - mb << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\""
      << height - mb << "\" stroke=\"black\"/>\n";

  // Zero line.
  if (ymin < 0.0 && ymax > 0.0) {
    out << "<line x1=\"" << ml << "\" y1=\"" << py(0) << "\" x2=\"" << width - mr
        << "\" y2=\"" << py(0) << "\" stroke=\"#999\" stroke-dasharray=\"4 3\"/>\n";
  }

  // Integer x ticks.
  for (int x = static_cast<int>(std::ceil(xmin)); x <= static_cast<int>(std::floor(xmax));
       ++x) {
    out << "<line x1=\"" << px(x) << "\" y1=\"" << height - mb << "\" x2=\"" << px(x)
        << "\" y2=\"" << height - mb + 5 << "\" stroke=\"black\"/>\n";
    out << "<text x=\"" << px(x) << "\" y=\"" << height - mb + 20
        << "\" font-size=\"12\" text-anchor=\"middle\" font-family=\"sans-serif\">" << x
        << "</text>\n";
  }
  // y ticks.
  double step = nice_step(ymax - ymin, 6);
  for (double y = std::ceil(ymin / step) * step; y <= ymax + 1e-12; y += step) {
    out << "<line x1=\"" << ml - 5 << "\" y1=\"" << py(y) << "\" x2=\"" << ml
        << "\" y2=\"" << py(y) << "\" stroke=\"black\"/>\n";
    out << "<text x=\"" << ml - 8 << "\" y=\"" << py(y) + 4
        << "\" font-size=\"12\" text-anchor=\"end\" font-family=\"sans-serif\">" << num(y)
        << "</text>\n";
  }
  out << "<text x=\"" << (ml + width - mr) / 2 << "\" y=\"" << height - 14
      << "\" font-size=\"13\" text-anchor=\"middle\" font-family=\"sans-serif\">"
      << "periods since first treatment change</text>\n";
  out << "<text x=\"16\" y=\"" << (mt + height - mb) / 2
      << "\" font-size=\"13\" text-anchor=\"middle\" font-family=\"sans-serif\" "
      << "transform=\"rotate(-90 16 " << (mt + height - mb) / 2 << ")\">"
      << "estimate</text>\n";

  // Confidence whiskers.
  for (const auto& p : points) {
    if (!p.whisker) continue;
    double x = px(p.x);
    out << "<line x1=\"" << x << "\" y1=\"" << py(p.lo) << "\" x2=\"" << x << "\" y2=\""
        << py(p.hi) << "\" stroke=\"#d62728\" stroke-width=\"1.5\"/>\n";
    for (double v : {p.lo, p.hi}) {
      out << "<line x1=\"" << x - 4 << "\" y1=\"" << py(v) << "\" x2=\"" << x + 4
          << "\" y2=\"" << py(v) << "\" stroke=\"#d62728\" stroke-width=\"1.5\"/>\n";
    }
  }

  // Connecting line and markers.
  out << "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"2\" points=\"";
  for (const auto& p : points) out << px(p.x) << ',' << py(p.y) << ' ';
  out << "\"/>\n";
  for (const auto& p : points) {
    out << "<circle cx=\"" << px(p.x) << "\" cy=\"" << py(p.y)
        << "\" r=\"3.5\" fill=\"#1f77b4\"/>\n";
  }
  out << "</svg>\n";
}

}  // namespace didkit
