#pragma once

// Minimal static SVG plots: QQ plots, score curves and layout overlays.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "netboot/uncertainty.hpp"
#include "netboot/validity.hpp"

namespace netboot::svg {

inline std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

/// Plot area with a linear data-to-pixel mapping and axes.
class Canvas {
 public:
  Canvas(double xmin, double xmax, double ymin, double ymax, int width = 480, int height = 400)
      : x0_(xmin), x1_(xmax), y0_(ymin), y1_(ymax), w_(width), h_(height) {
    if (x1_ <= x0_) x1_ = x0_ + 1.0;
    if (y1_ <= y0_) y1_ = y0_ + 1.0;
  }

  double px(double x) const { return kMargin + (x - x0_) / (x1_ - x0_) * (w_ - 2 * kMargin); }
  double py(double y) const { return h_ - kMargin - (y - y0_) / (y1_ - y0_) * (h_ - 2 * kMargin); }

  void line(double xa, double ya, double xb, double yb, const std::string& style) {
    body_ << "<line x1=\"" << num(px(xa)) << "\" y1=\"" << num(py(ya)) << "\" x2=\"" << num(px(xb))
          << "\" y2=\"" << num(py(yb)) << "\" style=\"" << style << "\"/>\n";
  }

  void polyline(const std::vector<std::pair<double, double>>& pts, const std::string& style) {
    body_ << "<polyline fill=\"none\" style=\"" << style << "\" points=\"";
    for (const auto& [x, y] : pts) body_ << num(px(x)) << ',' << num(py(y)) << ' ';
    body_ << "\"/>\n";
  }

  void circle(double x, double y, double r, const std::string& fill) {
    body_ << "<circle cx=\"" << num(px(x)) << "\" cy=\"" << num(py(y)) << "\" r=\"" << num(r)
          << "\" fill=\"" << fill << "\"/>\n";
  }

  void axes(const std::string& title, const std::string& xlabel, const std::string& ylabel) {
    const std::string axis = "stroke:#000;stroke-width:1";
    body_ << "<rect x=\"" << kMargin << "\" y=\"" << kMargin << "\" width=\"" << w_ - 2 * kMargin
          << "\" height=\"" << h_ - 2 * kMargin << "\" fill=\"none\" style=\"" << axis << "\"/>\n";
    for (int t = 0; t <= 4; ++t) {
      const double fx = x0_ + (x1_ - x0_) * t / 4.0, fy = y0_ + (y1_ - y0_) * t / 4.0;
      text(px(fx), h_ - kMargin + 16, tick(fx), "middle", 11);
      text(kMargin - 6, py(fy) + 4, tick(fy), "end", 11);
    }
    text(w_ / 2.0, 24, title, "middle", 14);
    text(w_ / 2.0, h_ - 10, xlabel, "middle", 12);
    body_ << "<text x=\"14\" y=\"" << h_ / 2 << "\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 14 "
          << h_ / 2 << ")\">" << escape(ylabel) << "</text>\n";
  }

  void text(double x, double y, const std::string& s, const char* anchor, int size) {
    body_ << "<text x=\"" << num(x) << "\" y=\"" << num(y) << "\" font-size=\"" << size
          << "\" text-anchor=\"" << anchor << "\">" << escape(s) << "</text>\n";
  }

  std::string str() const {
    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w_ << "\" height=\"" << h_
        << "\" font-family=\"sans-serif\">\n<rect width=\"100%\" height=\"100%\" fill=\"#fff\"/>\n"
        << body_.str() << "</svg>\n";
    return out.str();
  }

 private:
  static constexpr int kMargin = 50;

  static std::string tick(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
  }

  double x0_, x1_, y0_, y1_;
  int w_, h_;
  std::ostringstream body_;
};

/// Sorted p-values against uniform quantiles with the x = y reference line.
inline std::string qq_plot(const ValidityReport& report, const std::string& title) {
  Canvas c(0.0, 1.0, 0.0, 1.0);
  c.axes(title + " (S = " + num(report.score) + ")", "uniform quantile", "p-value");
  c.line(0.0, 0.0, 1.0, 1.0, "stroke:#888;stroke-dasharray:4 3");
  for (const auto& [q, p] : report.qq_pairs) c.circle(q, p, 2.5, "#1f77b4");
  return c.str();
}

/// A single curve with markers, e.g. score against k or against perplexity.
inline std::string line_plot(const std::vector<std::pair<double, double>>& points, const std::string& title,
                             const std::string& xlabel, const std::string& ylabel) {
  double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  if (!points.empty()) {
    xmin = xmax = points.front().first;
    ymin = 0.0;
    ymax = points.front().second;
    for (const auto& [x, y] : points) {
      xmin = std::min(xmin, x);
      xmax = std::max(xmax, x);
      ymin = std::min(ymin, y);
      ymax = std::max(ymax, y);
    }
    ymax += 0.05 * (ymax - ymin + 1e-12);
  }
  Canvas c(xmin, xmax, ymin, ymax);
  c.axes(title, xlabel, ylabel);
  c.polyline(points, "stroke:#d62728;stroke-width:1.5");
  for (const auto& [x, y] : points) c.circle(x, y, 3, "#d62728");
  return c.str();
}

/// Layout points coloured by class with the overlapping pairs drawn as edges.
inline std::string fuzziness_overlay(const Layout2D& layout, const FuzzinessMatrix& F,
                                     const std::vector<std::string>* classes, const std::string& title) {
  static const char* palette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                  "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
  const auto& V = layout.positions;
  const double lo = std::min(V.col(0).minCoeff(), V.col(1).minCoeff()) - 0.2;
  const double hi = std::max(V.col(0).maxCoeff(), V.col(1).maxCoeff()) + 0.2;
  Canvas c(lo, hi, lo, hi, 560, 560);
  c.axes(title, "x", "y");
  for (const auto& [i, j] : F.pairs()) c.line(V(i, 0), V(i, 1), V(j, 0), V(j, 1), "stroke:#999;stroke-width:0.6");
  std::map<std::string, std::size_t> colour;
  for (Eigen::Index i = 0; i < V.rows(); ++i) {
    std::size_t k = 0;
    if (classes) k = colour.emplace((*classes)[static_cast<std::size_t>(i)], colour.size()).first->second;
    c.circle(V(i, 0), V(i, 1), 3, palette[k % 10]);
  }
  return c.str();
}

}  // namespace netboot::svg
