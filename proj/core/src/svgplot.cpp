#include "coursegraph/svgplot.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "coursegraph/types.hpp"

namespace coursegraph::svg {

namespace {

constexpr double kPanelWidth = 420.0;
constexpr double kPanelHeight = 260.0;
constexpr double kMarginLeft = 48.0;
constexpr double kMarginRight = 12.0;
constexpr double kMarginTop = 34.0;
constexpr double kMarginBottom = 70.0;

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string escape(const std::string& s) {
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

void render_panel(std::ostream& out, double ox, double oy, const std::string& title,
                  const std::vector<Bar>& bars, double y_max) {
  const double plot_w = kPanelWidth - kMarginLeft - kMarginRight;
  const double plot_h = kPanelHeight - kMarginTop - kMarginBottom;
  const double x0 = ox + kMarginLeft;
  const double y0 = oy + kMarginTop;

  out << "<text x=\"" << num(ox + kPanelWidth / 2) << "\" y=\"" << num(oy + 18)
      << "\" text-anchor=\"middle\" font-size=\"13\" font-family=\"sans-serif\">"
      << escape(title) << "</text>\n";
  out << "<rect x=\"" << num(x0) << "\" y=\"" << num(y0) << "\" width=\"" << num(plot_w)
      << "\" height=\"" << num(plot_h)
      << "\" fill=\"none\" stroke=\"#444444\" stroke-width=\"1\"/>\n";

  for (int tick = 0; tick <= 4; ++tick) {
    const double frac = tick / 4.0;
    const double y = y0 + plot_h * (1.0 - frac);
    out << "<line x1=\"" << num(x0 - 4) << "\" y1=\"" << num(y) << "\" x2=\"" << num(x0)
        << "\" y2=\"" << num(y) << "\" stroke=\"#444444\" stroke-width=\"1\"/>\n";
    out << "<text x=\"" << num(x0 - 8) << "\" y=\"" << num(y + 4)
        << "\" text-anchor=\"end\" font-size=\"10\" font-family=\"sans-serif\">"
        << num(frac * y_max) << "</text>\n";
  }

  if (bars.empty()) {
    out << "<text x=\"" << num(x0 + plot_w / 2) << "\" y=\"" << num(y0 + plot_h / 2)
        << "\" text-anchor=\"middle\" font-size=\"11\" font-family=\"sans-serif\""
        << " fill=\"#888888\">no students</text>\n";
    return;
  }

  const double slot = plot_w / bars.size();
  const double bar_w = slot * 0.6;
  for (size_t i = 0; i < bars.size(); ++i) {
    const Bar& b = bars[i];
    const double v = std::clamp(b.value, 0.0, y_max) / y_max;
    const double r = std::clamp(b.reference, 0.0, y_max) / y_max;
    const double bx = x0 + slot * i + (slot - bar_w) / 2;
    const double bh = plot_h * v;
    out << "<rect x=\"" << num(bx) << "\" y=\"" << num(y0 + plot_h - bh) << "\" width=\""
        << num(bar_w) << "\" height=\"" << num(bh)
        << "\" fill=\"#4878a8\" stroke=\"#2b4a68\" stroke-width=\"1\"/>\n";
    const double ry = y0 + plot_h * (1.0 - r);
    out << "<line x1=\"" << num(bx - 4) << "\" y1=\"" << num(ry) << "\" x2=\""
        << num(bx + bar_w + 4) << "\" y2=\"" << num(ry)
        << "\" stroke=\"#c04040\" stroke-width=\"1.5\" stroke-dasharray=\"4 3\"/>\n";
    std::string label = escape(b.label) + (b.significant ? " *" : "");
    out << "<text x=\"" << num(bx + bar_w / 2) << "\" y=\"" << num(y0 + plot_h + 10)
        << "\" text-anchor=\"end\" font-size=\"9\" font-family=\"sans-serif\""
        << " transform=\"rotate(-45 " << num(bx + bar_w / 2) << " "
        << num(y0 + plot_h + 10) << ")\">" << label << "</text>\n";
  }
}

void write_document(const std::filesystem::path& path, double width, double height,
                    const std::string& body) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write file: " + path.string());
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(width)
      << "\" height=\"" << num(height) << "\" viewBox=\"0 0 " << num(width) << " "
      << num(height) << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n"
      << body << "</svg>\n";
}

}  // namespace

void write_bar_chart(const std::filesystem::path& path, const std::string& title,
                     const std::vector<Bar>& bars, double y_max) {
  if (y_max <= 0.0) throw Error("write_bar_chart: y_max must be positive");
  std::ostringstream body;
  render_panel(body, 0.0, 0.0, title, bars, y_max);
  write_document(path, kPanelWidth, kPanelHeight, body.str());
}

void write_panel_grid(const std::filesystem::path& path, const std::string& title,
                      const std::vector<Panel>& panels, int columns, double y_max) {
  if (columns < 1) throw Error("write_panel_grid: columns must be positive");
  if (y_max <= 0.0) throw Error("write_panel_grid: y_max must be positive");
  const int rows = (static_cast<int>(panels.size()) + columns - 1) / columns;
  const double header = 28.0;
  std::ostringstream body;
  body << "<text x=\"" << num(columns * kPanelWidth / 2) << "\" y=\"18\""
       << " text-anchor=\"middle\" font-size=\"15\" font-family=\"sans-serif\">"
       << escape(title) << "</text>\n";
  for (size_t i = 0; i < panels.size(); ++i) {
    const double ox = (i % columns) * kPanelWidth;
    const double oy = header + (i / columns) * kPanelHeight;
    render_panel(body, ox, oy, panels[i].title, panels[i].bars, y_max);
  }
  write_document(path, columns * kPanelWidth, header + rows * kPanelHeight, body.str());
}

}  // namespace coursegraph::svg
