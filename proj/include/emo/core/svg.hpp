#pragma once

#include <string>
#include <vector>

namespace emo::svg {

struct Series {
  std::string label;
  std::vector<double> x, y;
  std::string color;
};

struct ScatterGroup {
  std::string label;
  std::vector<double> x, y;
  std::string color;
};

struct Bar {
  std::string label;
  double value = 0.0;
  std::string color;
};

std::string line_chart(const std::string& title, const std::string& x_label, const std::string& y_label,
                       const std::vector<Series>& series, int width = 640, int height = 360);
std::string scatter_plot(const std::string& title, const std::vector<ScatterGroup>& groups, int width = 480,
                         int height = 480);
std::string bar_chart(const std::string& title, const std::vector<Bar>& bars, int width = 480, int height = 320);

// Stacks several SVG documents vertically into one.
std::string stack(const std::vector<std::string>& charts, int width, const std::vector<int>& heights);

const std::string& palette(std::size_t i);
std::string escape(const std::string& text);

}  // namespace emo::svg
