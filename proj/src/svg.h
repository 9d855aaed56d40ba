#pragma once

// Minimal self-contained SVG charts for report output.

#include <optional>
#include <string>
#include <vector>

namespace probe::svg {

struct BarSeries {
  std::string name;
  std::vector<std::optional<double>> values;  // one per category
};

struct BarChart {
  std::string title;
  std::vector<std::string> categories;
  std::vector<BarSeries> series;
};

struct LineSeries {
  std::string name;
  std::vector<std::optional<double>> values;  // one per x point; nullopt breaks the line
};

struct Reference {
  std::string name;
  double value = 0.0;
};

struct LineChart {
  std::string title;
  std::vector<double> x;
  std::string x_label;
  std::vector<LineSeries> series;
  std::vector<Reference> references;
};

std::string render(const std::vector<BarChart>& panels);
std::string render(const std::vector<LineChart>& panels);

}  // namespace probe::svg
