#pragma once

#include "emlab/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace emlab {

enum class Marker { Circle, Square, Triangle, Line, Bar };

struct Series {
  std::string label;
  std::vector<Point2> pts;
  Marker marker = Marker::Circle;
  std::string color;                       // empty = palette by index
  std::vector<std::string> point_labels;   // bar charts: one x-axis label per point
};

struct PlotSpec {
  std::string title, xlabel, ylabel;
  bool logx = false, logy = false;
  std::vector<Series> series;
  std::vector<std::string> annotations;  // drawn inside the plot area, top-left
};

namespace svg_detail {

inline const char* palette(size_t i) {
  static const char* colors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                 "#9467bd", "#8c564b", "#17becf", "#7f7f7f"};
  return colors[i % 8];
}

inline std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

inline std::string fmt_g(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

inline std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Axis {
  double lo = 0.0, hi = 1.0;  // in plot space (log10 already applied if log)
  bool log = false;
  std::vector<double> ticks;  // plot-space positions
};

inline Axis make_axis(double lo, double hi, bool log) {
  Axis ax;
  ax.log = log;
  if (!(lo < hi)) {  // degenerate or empty: widen to something drawable
    const double pad = std::abs(lo) > 0 ? std::abs(lo) * 0.5 : 1.0;
    lo -= pad;
    hi = lo + 2 * pad;
  }
  if (log) {
    ax.lo = std::floor(lo);
    ax.hi = std::ceil(hi);
    if (ax.hi - ax.lo < 1.0) ax.hi = ax.lo + 1.0;
    for (double t = ax.lo; t <= ax.hi + 1e-9; t += 1.0) ax.ticks.push_back(t);
    return ax;
  }
  const double span = hi - lo;
  const double raw = span / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double m : {1.0, 2.0, 5.0, 10.0})
    if (mag * m >= raw) {
      step = mag * m;
      break;
    }
  ax.lo = std::floor(lo / step) * step;
  ax.hi = std::ceil(hi / step) * step;
  for (double t = ax.lo; t <= ax.hi + step * 1e-9; t += step) ax.ticks.push_back(t);
  return ax;
}

struct Panel {
  double x0, y0, w, h;  // pixel viewport of the data area
};

inline void render_panel(std::ostringstream& out, const PlotSpec& spec, const Panel& p) {
  // collect plot-space bounds
  double lo_x = HUGE_VAL, hi_x = -HUGE_VAL, lo_y = HUGE_VAL, hi_y = -HUGE_VAL;
  bool any = false;
  auto tx = [&](double v) { return spec.logx ? std::log10(v) : v; };
  auto ty = [&](double v) { return spec.logy ? std::log10(v) : v; };
  for (const Series& s : spec.series)
    for (const Point2& pt : s.pts) {
      if (spec.logx && !(pt.x > 0)) continue;
      if (spec.logy && !(pt.y > 0)) continue;
      lo_x = std::min(lo_x, tx(pt.x));
      hi_x = std::max(hi_x, tx(pt.x));
      lo_y = std::min(lo_y, ty(pt.y));
      hi_y = std::max(hi_y, ty(pt.y));
      any = true;
    }
  if (!any) {
    lo_x = lo_y = 0.0;
    hi_x = hi_y = 1.0;
  }
  bool bars = false;
  for (const Series& s : spec.series)
    if (s.marker == Marker::Bar) bars = true;
  if (bars && !spec.logy) lo_y = std::min(lo_y, 0.0);

  const Axis ax = make_axis(lo_x, hi_x, spec.logx);
  const Axis ay = make_axis(lo_y, hi_y, spec.logy);
  auto px = [&](double v) { return p.x0 + (tx(v) - ax.lo) / (ax.hi - ax.lo) * p.w; };
  auto py = [&](double v) { return p.y0 + p.h - (ty(v) - ay.lo) / (ay.hi - ay.lo) * p.h; };

  // frame and grid
  out << "<rect x='" << fmt(p.x0) << "' y='" << fmt(p.y0) << "' width='" << fmt(p.w)
      << "' height='" << fmt(p.h) << "' fill='white' stroke='#333'/>\n";
  for (double t : ax.ticks) {
    const double x = p.x0 + (t - ax.lo) / (ax.hi - ax.lo) * p.w;
    out << "<line x1='" << fmt(x) << "' y1='" << fmt(p.y0) << "' x2='" << fmt(x) << "' y2='"
        << fmt(p.y0 + p.h) << "' stroke='#eee'/>\n";
    const std::string label = spec.logx ? ("1e" + fmt_g(t)) : fmt_g(t);
    out << "<text x='" << fmt(x) << "' y='" << fmt(p.y0 + p.h + 14)
        << "' font-size='10' text-anchor='middle'>" << label << "</text>\n";
  }
  for (double t : ay.ticks) {
    const double y = p.y0 + p.h - (t - ay.lo) / (ay.hi - ay.lo) * p.h;
    out << "<line x1='" << fmt(p.x0) << "' y1='" << fmt(y) << "' x2='" << fmt(p.x0 + p.w)
        << "' y2='" << fmt(y) << "' stroke='#eee'/>\n";
    const std::string label = spec.logy ? ("1e" + fmt_g(t)) : fmt_g(t);
    out << "<text x='" << fmt(p.x0 - 4) << "' y='" << fmt(y + 3)
        << "' font-size='10' text-anchor='end'>" << label << "</text>\n";
  }

  // axis labels and title
  if (!spec.title.empty())
    out << "<text x='" << fmt(p.x0 + p.w / 2) << "' y='" << fmt(p.y0 - 8)
        << "' font-size='13' text-anchor='middle' font-weight='bold'>" << escape(spec.title)
        << "</text>\n";
  if (!spec.xlabel.empty())
    out << "<text x='" << fmt(p.x0 + p.w / 2) << "' y='" << fmt(p.y0 + p.h + 30)
        << "' font-size='11' text-anchor='middle'>" << escape(spec.xlabel) << "</text>\n";
  if (!spec.ylabel.empty())
    out << "<text x='" << fmt(p.x0 - 44) << "' y='" << fmt(p.y0 + p.h / 2)
        << "' font-size='11' text-anchor='middle' transform='rotate(-90 " << fmt(p.x0 - 44) << " "
        << fmt(p.y0 + p.h / 2) << ")'>" << escape(spec.ylabel) << "</text>\n";

  if (!any)
    out << "<text x='" << fmt(p.x0 + p.w / 2) << "' y='" << fmt(p.y0 + p.h / 2)
        << "' font-size='14' text-anchor='middle' fill='#888'>no data</text>\n";

  // series
  for (size_t si = 0; si < spec.series.size(); ++si) {
    const Series& s = spec.series[si];
    const std::string color = s.color.empty() ? palette(si) : s.color;
    if (s.marker == Marker::Line) {
      out << "<polyline fill='none' stroke='" << color << "' stroke-width='1.5' points='";
      for (const Point2& pt : s.pts) {
        if ((spec.logx && !(pt.x > 0)) || (spec.logy && !(pt.y > 0))) continue;
        out << fmt(px(pt.x)) << "," << fmt(py(pt.y)) << " ";
      }
      out << "'/>\n";
      continue;
    }
    if (s.marker == Marker::Bar) {
      const double base_y = py(std::max(spec.logy ? std::pow(10.0, ay.lo) : ay.lo, spec.logy ? 1e-300 : ay.lo));
      const double bw = p.w / (2.0 * std::max<size_t>(1, s.pts.size()));
      for (size_t i = 0; i < s.pts.size(); ++i) {
        const Point2& pt = s.pts[i];
        const double cx = px(pt.x);
        const double top = py(pt.y);
        out << "<rect x='" << fmt(cx - bw / 2) << "' y='" << fmt(std::min(top, base_y))
            << "' width='" << fmt(bw) << "' height='" << fmt(std::abs(base_y - top))
            << "' fill='" << color << "' fill-opacity='0.8'/>\n";
        if (i < s.point_labels.size())
          out << "<text x='" << fmt(cx) << "' y='" << fmt(p.y0 + p.h + 26)
              << "' font-size='9' text-anchor='middle'>" << escape(s.point_labels[i])
              << "</text>\n";
      }
      continue;
    }
    for (const Point2& pt : s.pts) {
      if ((spec.logx && !(pt.x > 0)) || (spec.logy && !(pt.y > 0))) continue;
      const double cx = px(pt.x), cy = py(pt.y);
      switch (s.marker) {
        case Marker::Circle:
          out << "<circle cx='" << fmt(cx) << "' cy='" << fmt(cy) << "' r='3' fill='" << color
              << "' fill-opacity='0.75'/>\n";
          break;
        case Marker::Square:
          out << "<rect x='" << fmt(cx - 3) << "' y='" << fmt(cy - 3)
              << "' width='6' height='6' fill='" << color << "' fill-opacity='0.75'/>\n";
          break;
        case Marker::Triangle:
          out << "<polygon points='" << fmt(cx) << "," << fmt(cy - 4) << " " << fmt(cx - 4) << ","
              << fmt(cy + 3) << " " << fmt(cx + 4) << "," << fmt(cy + 3) << "' fill='" << color
              << "' fill-opacity='0.75'/>\n";
          break;
        default: break;
      }
    }
  }

  // legend (only when labels exist)
  double ly = p.y0 + 12;
  for (size_t si = 0; si < spec.series.size(); ++si) {
    const Series& s = spec.series[si];
    if (s.label.empty()) continue;
    const std::string color = s.color.empty() ? palette(si) : s.color;
    out << "<rect x='" << fmt(p.x0 + p.w - 130) << "' y='" << fmt(ly - 8)
        << "' width='8' height='8' fill='" << color << "'/>\n";
    out << "<text x='" << fmt(p.x0 + p.w - 118) << "' y='" << fmt(ly)
        << "' font-size='10'>" << escape(s.label) << "</text>\n";
    ly += 14;
  }

  // annotations
  double ay_pos = p.y0 + 14;
  for (const std::string& a : spec.annotations) {
    out << "<text x='" << fmt(p.x0 + 8) << "' y='" << fmt(ay_pos)
        << "' font-size='11' fill='#444'>" << escape(a) << "</text>\n";
    ay_pos += 14;
  }
}

}  // namespace svg_detail

/// Grid of panels in one standalone SVG, `cols` panels per row.
inline void write_svg_grid(const std::vector<PlotSpec>& panels, int cols,
                           const std::string& path) {
  if (panels.empty()) throw std::invalid_argument("write_svg_grid: no panels");
  if (cols < 1) cols = 1;
  const int rows = (static_cast<int>(panels.size()) + cols - 1) / cols;
  const double pw = 460, ph = 320, ml = 72, mt = 42, mr = 24, mb = 56;
  const double cell_w = ml + pw + mr, cell_h = mt + ph + mb;
  std::ostringstream out;
  out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << cell_w * cols << "' height='"
      << cell_h * rows << "' font-family='sans-serif'>\n";
  out << "<rect width='100%' height='100%' fill='white'/>\n";
  for (size_t i = 0; i < panels.size(); ++i) {
    const int r = static_cast<int>(i) / cols, c = static_cast<int>(i) % cols;
    svg_detail::Panel p{c * cell_w + ml, r * cell_h + mt, pw, ph};
    svg_detail::render_panel(out, panels[i], p);
  }
  out << "</svg>\n";
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("write_svg_grid: cannot open " + path);
  f << out.str();
  if (!f) throw std::runtime_error("write_svg_grid: write failed for " + path);
}

inline void write_svg_plot(const PlotSpec& spec, const std::string& path) {
  write_svg_grid({spec}, 1, path);
}

/// CSV sidecar listing every plotted value exactly (17 significant digits
/// round-trip). Columns: series,label,x,y,point_label.
inline void write_plot_csv(const PlotSpec& spec, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("write_plot_csv: cannot open " + path);
  f << "series,label,x,y,point_label\n";
  char buf[128];
  for (size_t si = 0; si < spec.series.size(); ++si) {
    const Series& s = spec.series[si];
    for (size_t i = 0; i < s.pts.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%zu,%s,%.17g,%.17g,%s\n", si, s.label.c_str(), s.pts[i].x,
                    s.pts[i].y, i < s.point_labels.size() ? s.point_labels[i].c_str() : "");
      f << buf;
    }
  }
  if (!f) throw std::runtime_error("write_plot_csv: write failed for " + path);
}

/// Reads series data back from a sidecar (inverse of write_plot_csv for the
/// data payload; markers/axis flags are not stored).
inline std::vector<Series> read_plot_csv(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("read_plot_csv: cannot open " + path);
  std::string line;
  if (!std::getline(f, line)) throw std::runtime_error("read_plot_csv: empty file");
  std::vector<Series> out;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    while (cells.size() < 5) cells.emplace_back();
    const size_t si = static_cast<size_t>(std::stoull(cells[0]));
    while (out.size() <= si) out.emplace_back();
    out[si].label = cells[1];
    out[si].pts.push_back({std::stod(cells[2]), std::stod(cells[3])});
    if (!cells[4].empty()) {
      out[si].point_labels.resize(out[si].pts.size());
      out[si].point_labels.back() = cells[4];
    }
  }
  return out;
}

}  // namespace emlab
