#include "svg.h"

#include <fmt/format.h>

#include <algorithm>

#include "probe/csv.h"

namespace probe::svg {

namespace {

constexpr double kWidth = 760;
constexpr double kPanelHeight = 340;
constexpr double kLeft = 60, kRight = 200, kTop = 40, kBottom = 70;
constexpr const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#9467bd",
                                    "#8c564b", "#e377c2", "#7f7f7f", "#17becf"};
constexpr const char* kReferenceColor = "#d62728";

std::string escape(const std::string& s) {
  std::string out;
  for (char ch : s) {
    switch (ch) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += ch;
    }
  }
  return out;
}

const char* color(std::size_t i) { return kPalette[i % std::size(kPalette)]; }

struct Frame {
  double top;       // panel origin
  double y_min, y_max;

  double plot_h() const { return kPanelHeight - kTop - kBottom; }
  double plot_w() const { return kWidth - kLeft - kRight; }
  double y(double v) const { return top + kTop + plot_h() * (y_max - v) / (y_max - y_min); }
};

void axes(std::string& out, const Frame& f, const std::string& title) {
  out += fmt::format(R"(<text x="{}" y="{}" font-size="14" font-weight="bold">{}</text>)" "\n",
                     kLeft, f.top + 22, escape(title));
  for (double v = f.y_min; v <= f.y_max + 1e-9; v += 0.25) {
    out += fmt::format(
        R"(<line x1="{}" y1="{:.1f}" x2="{}" y2="{:.1f}" stroke="#ddd"/>)"
        R"(<text x="{}" y="{:.1f}" font-size="10" text-anchor="end">{}</text>)" "\n",
        kLeft, f.y(v), kLeft + f.plot_w(), f.y(v), kLeft - 6, f.y(v) + 3, csv::fixed(v, 2));
  }
  out += fmt::format(R"(<line x1="{}" y1="{:.1f}" x2="{}" y2="{:.1f}" stroke="#000"/>)" "\n",
                     kLeft, f.y(f.y_min), kLeft + f.plot_w(), f.y(f.y_min));
  out += fmt::format(R"(<line x1="{}" y1="{:.1f}" x2="{}" y2="{:.1f}" stroke="#000"/>)" "\n",
                     kLeft, f.y(f.y_min), kLeft, f.y(f.y_max));
}

void legend(std::string& out, const Frame& f, std::size_t i, const std::string& name,
            const char* stroke, bool dashed = false) {
  const double y = f.top + kTop + 14.0 * static_cast<double>(i);
  const double x = kLeft + f.plot_w() + 12;
  out += fmt::format(R"(<line x1="{}" y1="{:.1f}" x2="{}" y2="{:.1f}" stroke="{}" stroke-width="3"{}/>)"
                     R"(<text x="{}" y="{:.1f}" font-size="10">{}</text>)" "\n",
                     x, y, x + 16, y, stroke, dashed ? R"( stroke-dasharray="4 3")" : "", x + 20,
                     y + 3, escape(name));
}

std::pair<double, double> y_range(double lo, double hi) {
  return {lo < 0 ? -1.0 : 0.0, std::max(1.0, hi)};
}

std::string document(double height, const std::string& body) {
  return fmt::format(
      R"(<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" viewBox="0 0 {} {}" font-family="sans-serif">)"
      "\n<rect width=\"100%\" height=\"100%\" fill=\"#fff\"/>\n{}</svg>\n",
      kWidth, height, kWidth, height, body);
}

}  // namespace

std::string render(const std::vector<BarChart>& panels) {
  std::string body;
  for (std::size_t p = 0; p < panels.size(); ++p) {
    const auto& chart = panels[p];
    double lo = 0, hi = 0;
    for (const auto& s : chart.series) {
      for (const auto& v : s.values) {
        if (v) lo = std::min(lo, *v), hi = std::max(hi, *v);
      }
    }
    const auto [y_min, y_max] = y_range(lo, hi);
    Frame f{kPanelHeight * static_cast<double>(p), y_min, y_max};
    axes(body, f, chart.title);
    const auto n_cat = std::max<std::size_t>(1, chart.categories.size());
    const double slot = f.plot_w() / static_cast<double>(n_cat);
    const double bar = slot * 0.8 / static_cast<double>(std::max<std::size_t>(1, chart.series.size()));
    for (std::size_t c = 0; c < chart.categories.size(); ++c) {
      const double x0 = kLeft + slot * static_cast<double>(c) + slot * 0.1;
      for (std::size_t s = 0; s < chart.series.size(); ++s) {
        const auto& v = chart.series[s].values[c];
        const double x = x0 + bar * static_cast<double>(s);
        if (!v) {
          body += fmt::format(R"(<text x="{:.1f}" y="{:.1f}" font-size="8">n/a</text>)" "\n", x,
                              f.y(0) - 2);
          continue;
        }
        const double y_top = f.y(std::max(*v, 0.0));
        const double h = std::abs(f.y(*v) - f.y(0));
        body += fmt::format(
            R"(<rect x="{:.1f}" y="{:.1f}" width="{:.1f}" height="{:.1f}" fill="{}"><title>{}</title></rect>)" "\n",
            x, y_top, bar * 0.95, h, color(s), csv::fixed(*v, 3));
      }
      body += fmt::format(
          R"(<text x="{:.1f}" y="{:.1f}" font-size="9" text-anchor="middle">{}</text>)" "\n",
          x0 + slot * 0.4, f.y(f.y_min) + 14, escape(chart.categories[c]));
    }
    for (std::size_t s = 0; s < chart.series.size(); ++s) legend(body, f, s, chart.series[s].name, color(s));
  }
  return document(kPanelHeight * static_cast<double>(std::max<std::size_t>(1, panels.size())), body);
}

std::string render(const std::vector<LineChart>& panels) {
  std::string body;
  for (std::size_t p = 0; p < panels.size(); ++p) {
    const auto& chart = panels[p];
    double lo = 0, hi = 0;
    for (const auto& s : chart.series) {
      for (const auto& v : s.values) {
        if (v) lo = std::min(lo, *v), hi = std::max(hi, *v);
      }
    }
    for (const auto& r : chart.references) lo = std::min(lo, r.value), hi = std::max(hi, r.value);
    const auto [y_min, y_max] = y_range(lo, hi);
    Frame f{kPanelHeight * static_cast<double>(p), y_min, y_max};
    axes(body, f, chart.title);

    const double x_min = chart.x.empty() ? 0 : chart.x.front();
    const double x_max = chart.x.empty() ? 1 : chart.x.back();
    auto x_pos = [&](double x) {
      if (x_max == x_min) return kLeft + f.plot_w() / 2;
      return kLeft + f.plot_w() * (x - x_min) / (x_max - x_min);
    };
    for (double x : chart.x) {
      body += fmt::format(
          R"(<text x="{:.1f}" y="{:.1f}" font-size="8" text-anchor="middle">{}</text>)" "\n",
          x_pos(x), f.y(f.y_min) + 12, fmt::format("{:g}", x));
    }
    body += fmt::format(R"(<text x="{:.1f}" y="{:.1f}" font-size="10" text-anchor="middle">{}</text>)" "\n",
                        kLeft + f.plot_w() / 2, f.y(f.y_min) + 28, escape(chart.x_label));

    for (std::size_t s = 0; s < chart.series.size(); ++s) {
      const auto& series = chart.series[s];
      std::string path;
      bool pen_down = false;
      for (std::size_t i = 0; i < chart.x.size() && i < series.values.size(); ++i) {
        if (!series.values[i]) {
          pen_down = false;
          continue;
        }
        path += fmt::format("{}{:.1f},{:.1f} ", pen_down ? "L" : "M", x_pos(chart.x[i]),
                            f.y(*series.values[i]));
        pen_down = true;
        body += fmt::format(
            R"(<circle cx="{:.1f}" cy="{:.1f}" r="2.5" fill="{}"><title>{}</title></circle>)" "\n",
            x_pos(chart.x[i]), f.y(*series.values[i]), color(s), csv::fixed(*series.values[i], 3));
      }
      if (!path.empty()) {
        path.pop_back();
        body += fmt::format(R"(<path d="{}" fill="none" stroke="{}" stroke-width="1.5"/>)" "\n", path,
                            color(s));
      }
      legend(body, f, s, series.name, color(s));
    }
    for (std::size_t r = 0; r < chart.references.size(); ++r) {
      const auto& ref = chart.references[r];
      body += fmt::format(
          R"(<line x1="{}" y1="{:.1f}" x2="{}" y2="{:.1f}" stroke="{}" stroke-dasharray="4 3"><title>{} {}</title></line>)" "\n",
          kLeft, f.y(ref.value), kLeft + f.plot_w(), f.y(ref.value), kReferenceColor, escape(ref.name),
          csv::fixed(ref.value, 3));
      legend(body, f, chart.series.size() + r, ref.name + " (" + csv::fixed(ref.value, 3) + ")",
             kReferenceColor, true);
    }
  }
  return document(kPanelHeight * static_cast<double>(std::max<std::size_t>(1, panels.size())), body);
}

}  // namespace probe::svg
