#pragma once

// Static SVG scatter plots: all candidates in gray, the ground-truth front,
// and the proxy-selected picks. Output is plain XML with no timestamps, so
// replays are byte-identical.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "zeronas/common.hpp"

namespace zeronas {

struct PlotSeries {
  std::string label;
  std::string color;
  double radius = 3.0;
  bool connect = false;  // polyline through the points, in x order
  std::vector<std::pair<double, double>> points;  // (x, y)
};

struct ScatterPlot {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<PlotSeries> series;
};

namespace detail {

inline std::string fmt_num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return std::string(buf);
}

inline std::string xml_escape(const std::string& s) {
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

}  // namespace detail

inline std::string render_svg(const ScatterPlot& plot) {
  const double width = 880, height = 620;
  const double ml = 80, mr = 30, mt = 40, mb = 60;
  const double pw = width - ml - mr, ph = height - mt - mb;

  double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  bool first = true;
  for (const auto& s : plot.series)
    for (const auto& [x, y] : s.points) {
      if (first) {
        xmin = xmax = x;
        ymin = ymax = y;
        first = false;
      }
      xmin = std::min(xmin, x);
      xmax = std::max(xmax, x);
      ymin = std::min(ymin, y);
      ymax = std::max(ymax, y);
    }
  if (xmax == xmin) xmax = xmin + 1.0;
  if (ymax == ymin) ymax = ymin + 1.0;
  const double xpad = 0.04 * (xmax - xmin), ypad = 0.04 * (ymax - ymin);
  xmin -= xpad;
  xmax += xpad;
  ymin -= ypad;
  ymax += ypad;

  auto sx = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * pw; };
  auto sy = [&](double y) { return mt + ph - (y - ymin) / (ymax - ymin) * ph; };

  std::string out;
  out += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + detail::fmt_num(width) +
         "\" height=\"" + detail::fmt_num(height) + "\" viewBox=\"0 0 " +
         detail::fmt_num(width) + " " + detail::fmt_num(height) + "\">\n";
  out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out += "<text x=\"" + detail::fmt_num(width / 2) +
         "\" y=\"22\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\">" +
         detail::xml_escape(plot.title) + "</text>\n";

  // axes + ticks
  out += "<line x1=\"" + detail::fmt_num(ml) + "\" y1=\"" + detail::fmt_num(mt + ph) +
         "\" x2=\"" + detail::fmt_num(ml + pw) + "\" y2=\"" + detail::fmt_num(mt + ph) +
         "\" stroke=\"black\"/>\n";
  out += "<line x1=\"" + detail::fmt_num(ml) + "\" y1=\"" + detail::fmt_num(mt) + "\" x2=\"" +
         detail::fmt_num(ml) + "\" y2=\"" + detail::fmt_num(mt + ph) + "\" stroke=\"black\"/>\n";
  const int ticks = 5;
  for (int i = 0; i <= ticks; ++i) {
    const double tx = xmin + (xmax - xmin) * i / ticks;
    const double ty = ymin + (ymax - ymin) * i / ticks;
    out += "<line x1=\"" + detail::fmt_num(sx(tx)) + "\" y1=\"" + detail::fmt_num(mt + ph) +
           "\" x2=\"" + detail::fmt_num(sx(tx)) + "\" y2=\"" + detail::fmt_num(mt + ph + 5) +
           "\" stroke=\"black\"/>\n";
    out += "<text x=\"" + detail::fmt_num(sx(tx)) + "\" y=\"" + detail::fmt_num(mt + ph + 20) +
           "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" +
           detail::fmt_num(tx) + "</text>\n";
    out += "<line x1=\"" + detail::fmt_num(ml - 5) + "\" y1=\"" + detail::fmt_num(sy(ty)) +
           "\" x2=\"" + detail::fmt_num(ml) + "\" y2=\"" + detail::fmt_num(sy(ty)) +
           "\" stroke=\"black\"/>\n";
    out += "<text x=\"" + detail::fmt_num(ml - 9) + "\" y=\"" + detail::fmt_num(sy(ty) + 4) +
           "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" +
           detail::fmt_num(ty) + "</text>\n";
  }
  out += "<text x=\"" + detail::fmt_num(ml + pw / 2) + "\" y=\"" +
         detail::fmt_num(height - 14) +
         "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">" +
         detail::xml_escape(plot.x_label) + "</text>\n";
  out += "<text x=\"20\" y=\"" + detail::fmt_num(mt + ph / 2) +
         "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" transform=\"rotate(-90 20 " +
         detail::fmt_num(mt + ph / 2) + ")\">" + detail::xml_escape(plot.y_label) + "</text>\n";

  for (const auto& s : plot.series) {
    if (s.connect && s.points.size() > 1) {
      std::vector<std::pair<double, double>> sorted = s.points;
      std::sort(sorted.begin(), sorted.end());
      out += "<polyline fill=\"none\" stroke=\"" + s.color + "\" stroke-width=\"1.5\" points=\"";
      for (const auto& [x, y] : sorted)
        out += detail::fmt_num(sx(x)) + "," + detail::fmt_num(sy(y)) + " ";
      out += "\"/>\n";
    }
    for (const auto& [x, y] : s.points)
      out += "<circle cx=\"" + detail::fmt_num(sx(x)) + "\" cy=\"" + detail::fmt_num(sy(y)) +
             "\" r=\"" + detail::fmt_num(s.radius) + "\" fill=\"" + s.color +
             "\" fill-opacity=\"0.8\"/>\n";
  }

  // legend
  double ly = mt + 12;
  for (const auto& s : plot.series) {
    out += "<circle cx=\"" + detail::fmt_num(ml + pw - 150) + "\" cy=\"" + detail::fmt_num(ly) +
           "\" r=\"4\" fill=\"" + s.color + "\"/>\n";
    out += "<text x=\"" + detail::fmt_num(ml + pw - 140) + "\" y=\"" + detail::fmt_num(ly + 4) +
           "\" font-family=\"sans-serif\" font-size=\"12\">" + detail::xml_escape(s.label) +
           "</text>\n";
    ly += 18;
  }
  out += "</svg>\n";
  return out;
}

inline void save_svg(const ScatterPlot& plot, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write SVG file: " + path);
  out << render_svg(plot);
}

}  // namespace zeronas
