#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace coursegraph::svg {

/// One labeled bar with a reference level (drawn as a dashed marker) and
/// an optional significance tick on the label.
struct Bar {
  std::string label;
  double value = 0.0;
  double reference = 0.5;
  bool significant = false;
};

/// Deterministic standalone SVG bar chart; values are clamped to
/// [0, y_max].
void write_bar_chart(const std::filesystem::path& path, const std::string& title,
                     const std::vector<Bar>& bars, double y_max = 1.0);

/// Grid of titled bar-chart panels laid out `columns` across (local
/// student pairs, 2x2 confusion matrices).
struct Panel {
  std::string title;
  std::vector<Bar> bars;
};

void write_panel_grid(const std::filesystem::path& path, const std::string& title,
                      const std::vector<Panel>& panels, int columns, double y_max = 1.0);

}  // namespace coursegraph::svg
