#include "emo/core/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

namespace emo::svg {

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

struct Frame {
  double x0, x1, y0, y1;
  int left = 60, right = 20, top = 36, bottom = 44;
  int width, height;

  double px(double x) const { return left + (x - x0) / (x1 - x0) * (width - left - right); }
  double py(double y) const { return height - bottom - (y - y0) / (y1 - y0) * (height - top - bottom); }
};

void widen(double& lo, double& hi) {
  if (!std::isfinite(lo) || !std::isfinite(hi)) {
    lo = 0.0;
    hi = 1.0;
  }
  if (hi - lo < 1e-12) {
    lo -= 0.5;
    hi += 0.5;
  }
}

std::string open(int width, int height, const std::string& title) {
  return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(width) + "\" height=\"" +
         std::to_string(height) + "\" font-family=\"sans-serif\" font-size=\"11\">\n<rect width=\"100%\" " +
         "height=\"100%\" fill=\"white\"/>\n<text x=\"" + std::to_string(width / 2) +
         "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" + escape(title) + "</text>\n";
}

std::string axes(const Frame& f, const std::string& xl, const std::string& yl) {
  std::string s;
  const double xa = f.left, xb = f.width - f.right, ya = f.top, yb = f.height - f.bottom;
  s += "<rect x=\"" + num(xa) + "\" y=\"" + num(ya) + "\" width=\"" + num(xb - xa) + "\" height=\"" + num(yb - ya) +
       "\" fill=\"none\" stroke=\"#444\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double vx = f.x0 + (f.x1 - f.x0) * i / 4.0;
    const double vy = f.y0 + (f.y1 - f.y0) * i / 4.0;
    s += "<text x=\"" + num(f.px(vx)) + "\" y=\"" + num(yb + 14) + "\" text-anchor=\"middle\">" + tick(vx) +
         "</text>\n";
    s += "<text x=\"" + num(xa - 4) + "\" y=\"" + num(f.py(vy) + 4) + "\" text-anchor=\"end\">" + tick(vy) +
         "</text>\n";
  }
  if (!xl.empty())
    s += "<text x=\"" + num((xa + xb) / 2) + "\" y=\"" + num(f.height - 8.0) + "\" text-anchor=\"middle\">" +
         escape(xl) + "</text>\n";
  if (!yl.empty())
    s += "<text x=\"14\" y=\"" + num((ya + yb) / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 14 " +
         num((ya + yb) / 2) + ")\">" + escape(yl) + "</text>\n";
  return s;
}

std::string legend(const Frame& f, const std::vector<std::pair<std::string, std::string>>& items) {
  std::string s;
  double y = f.top + 12;
  for (const auto& [label, color] : items) {
    const double x = f.width - f.right - 150;
    s += "<rect x=\"" + num(x) + "\" y=\"" + num(y - 8) + "\" width=\"10\" height=\"10\" fill=\"" + color + "\"/>\n";
    s += "<text x=\"" + num(x + 14) + "\" y=\"" + num(y + 1) + "\">" + escape(label) + "</text>\n";
    y += 14;
  }
  return s;
}

}  // namespace

const std::string& palette(std::size_t i) {
  static const std::vector<std::string> colors = {"#d62728", "#1f77b4", "#2ca02c", "#9467bd",
                                                  "#ff7f0e", "#8c564b", "#e377c2", "#7f7f7f"};
  return colors[i % colors.size()];
}

std::string escape(const std::string& text) {
  std::string out;
  for (char c : text) {
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

std::string line_chart(const std::string& title, const std::string& x_label, const std::string& y_label,
                       const std::vector<Series>& series, int width, int height) {
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i]);
      y1 = std::max(y1, s.y[i]);
    }
  widen(x0, x1);
  widen(y0, y1);
  Frame f{x0, x1, y0, y1};
  f.width = width;
  f.height = height;
  std::string out = open(width, height, title) + axes(f, x_label, y_label);
  std::vector<std::pair<std::string, std::string>> items;
  for (const auto& s : series) {
    std::string pts;
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      pts += num(f.px(s.x[i])) + "," + num(f.py(s.y[i])) + " ";
    }
    out += "<polyline fill=\"none\" stroke-width=\"1.5\" stroke=\"" + s.color + "\" points=\"" + pts + "\"/>\n";
    items.emplace_back(s.label, s.color);
  }
  return out + legend(f, items) + "</svg>\n";
}

std::string scatter_plot(const std::string& title, const std::vector<ScatterGroup>& groups, int width, int height) {
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& g : groups)
    for (std::size_t i = 0; i < g.x.size(); ++i) {
      x0 = std::min(x0, g.x[i]);
      x1 = std::max(x1, g.x[i]);
      y0 = std::min(y0, g.y[i]);
      y1 = std::max(y1, g.y[i]);
    }
  widen(x0, x1);
  widen(y0, y1);
  Frame f{x0, x1, y0, y1};
  f.width = width;
  f.height = height;
  std::string out = open(width, height, title) + axes(f, "PC1", "PC2");
  std::vector<std::pair<std::string, std::string>> items;
  for (const auto& g : groups) {
    for (std::size_t i = 0; i < g.x.size(); ++i)
      out += "<circle cx=\"" + num(f.px(g.x[i])) + "\" cy=\"" + num(f.py(g.y[i])) + "\" r=\"1.6\" fill=\"" +
             g.color + "\" fill-opacity=\"0.6\"/>\n";
    items.emplace_back(g.label + " (" + std::to_string(g.x.size()) + ")", g.color);
  }
  return out + legend(f, items) + "</svg>\n";
}

std::string bar_chart(const std::string& title, const std::vector<Bar>& bars, int width, int height) {
  double hi = 0.0;
  for (const auto& b : bars) hi = std::max(hi, b.value);
  if (hi <= 0.0) hi = 1.0;
  Frame f{0.0, static_cast<double>(std::max<std::size_t>(bars.size(), 1)), 0.0, hi};
  f.width = width;
  f.height = height;
  std::string out = open(width, height, title);
  const double slot = (f.px(1.0) - f.px(0.0));
  for (std::size_t i = 0; i < bars.size(); ++i) {
    const double x = f.px(static_cast<double>(i)) + slot * 0.15;
    const double y = f.py(bars[i].value);
    out += "<rect x=\"" + num(x) + "\" y=\"" + num(y) + "\" width=\"" + num(slot * 0.7) + "\" height=\"" +
           num(f.py(0.0) - y) + "\" fill=\"" + bars[i].color + "\"/>\n";
    out += "<text x=\"" + num(x + slot * 0.35) + "\" y=\"" + num(f.py(0.0) + 14) + "\" text-anchor=\"middle\">" +
           escape(bars[i].label) + "</text>\n";
    out += "<text x=\"" + num(x + slot * 0.35) + "\" y=\"" + num(y - 3) + "\" text-anchor=\"middle\">" +
           tick(bars[i].value) + "</text>\n";
  }
  return out + "</svg>\n";
}

std::string stack(const std::vector<std::string>& charts, int width, const std::vector<int>& heights) {
  int total = 0;
  for (int h : heights) total += h;
  std::string out = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(width) + "\" height=\"" +
                    std::to_string(total) + "\">\n";
  int y = 0;
  for (std::size_t i = 0; i < charts.size(); ++i) {
    out += "<g transform=\"translate(0," + std::to_string(y) + ")\">\n" + charts[i] + "</g>\n";
    y += i < heights.size() ? heights[i] : 0;
  }
  return out + "</svg>\n";
}

}  // namespace emo::svg
