#include "marl/cli/plot.hpp"

#include "marl/trainer/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>

namespace marl::cli {

namespace {

constexpr const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                    "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};
constexpr int kPaletteSize = 8;
constexpr int kSmoothingWindow = 5;

struct Series {
  std::string label;
  std::vector<Scalar> steps;
  std::vector<Scalar> values;
};

std::string escape_xml(const std::string& text) {
  std::string out;
  out.reserve(text.size());
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string num(Scalar v) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.2f", v);
  return buffer;
}

std::string tick_label(Scalar v) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.6g", v);
  return buffer;
}

std::string series_label(const std::filesystem::path& csv) {
  const std::filesystem::path parent = csv.parent_path().filename();
  if (!parent.empty() && parent != "." && parent != "..") return parent.string();
  return csv.stem().string();
}

}  // namespace

std::vector<Scalar> rolling_mean(const std::vector<Scalar>& values, int window) {
  if (window < 1 || window % 2 == 0) throw ConfigError("smoothing window must be odd and >= 1");
  const auto n = static_cast<std::ptrdiff_t>(values.size());
  const std::ptrdiff_t half = window / 2;
  std::vector<Scalar> out(values.size());
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, i - half);
    const std::ptrdiff_t hi = std::min(n - 1, i + half);
    Scalar sum = 0;
    for (std::ptrdiff_t j = lo; j <= hi; ++j) sum += values[j];
    out[i] = sum / static_cast<Scalar>(hi - lo + 1);
  }
  return out;
}

PlotPaths plot_metrics(const std::vector<std::filesystem::path>& csvs,
                       const std::filesystem::path& out_image) {
  if (csvs.empty()) throw ConfigError("plot needs at least one metrics file");

  std::vector<Series> series;
  std::vector<std::string> reference_columns;
  for (const auto& csv : csvs) {
    const trainer::CsvTable table = trainer::read_csv(csv);
    if (series.empty()) {
      reference_columns = table.columns;
    } else if (table.columns != reference_columns) {
      throw ConfigError("metrics files have different column layouts: " + csv.string());
    }
    if (table.rows.empty()) throw ConfigError("metrics file has no rows: " + csv.string());
    if (!table.column_index("step") || !table.column_index("mean_return")) {
      throw ConfigError("metrics file lacks step/mean_return columns: " + csv.string());
    }
    Series s;
    s.label = series_label(csv);
    s.steps = table.column("step");
    s.values = rolling_mean(table.column("mean_return"), kSmoothingWindow);
    series.push_back(std::move(s));
  }

  Scalar x_min = series[0].steps.front(), x_max = x_min;
  Scalar y_min = series[0].values.front(), y_max = y_min;
  for (const Series& s : series) {
    for (Scalar v : s.steps) {
      x_min = std::min(x_min, v);
      x_max = std::max(x_max, v);
    }
    for (Scalar v : s.values) {
      y_min = std::min(y_min, v);
      y_max = std::max(y_max, v);
    }
  }
  if (x_max == x_min) x_max = x_min + 1;
  const Scalar y_pad = (y_max == y_min) ? std::max<Scalar>(1, std::abs(y_min) * 0.1)
                                        : (y_max - y_min) * 0.05;
  y_min -= y_pad;
  y_max += y_pad;

  constexpr Scalar width = 960, height = 540;
  constexpr Scalar ml = 80, mr = 24, mt = 24, mb = 56;
  const Scalar plot_w = width - ml - mr;
  const Scalar plot_h = height - mt - mb;
  const auto to_x = [&](Scalar v) { return ml + (v - x_min) / (x_max - x_min) * plot_w; };
  const auto to_y = [&](Scalar v) { return mt + (y_max - v) / (y_max - y_min) * plot_h; };

  std::ofstream svg(out_image);
  if (!svg) throw std::runtime_error("cannot write image file: " + out_image.string());
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" viewBox=\"0 0 " << width << " " << height << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<g font-family=\"sans-serif\" font-size=\"13\">\n";

  for (int t = 0; t <= 4; ++t) {
    const Scalar fx = x_min + (x_max - x_min) * t / 4;
    const Scalar fy = y_min + (y_max - y_min) * t / 4;
    const Scalar px = to_x(fx);
    const Scalar py = to_y(fy);
    svg << "<line x1=\"" << num(px) << "\" y1=\"" << num(mt) << "\" x2=\"" << num(px) << "\" y2=\""
        << num(mt + plot_h) << "\" stroke=\"#dddddd\"/>\n";
    svg << "<line x1=\"" << num(ml) << "\" y1=\"" << num(py) << "\" x2=\"" << num(ml + plot_w)
        << "\" y2=\"" << num(py) << "\" stroke=\"#dddddd\"/>\n";
    svg << "<text x=\"" << num(px) << "\" y=\"" << num(mt + plot_h + 18)
        << "\" text-anchor=\"middle\">" << tick_label(fx) << "</text>\n";
    svg << "<text x=\"" << num(ml - 8) << "\" y=\"" << num(py + 4)
        << "\" text-anchor=\"end\">" << tick_label(fy) << "</text>\n";
  }
  svg << "<rect x=\"" << num(ml) << "\" y=\"" << num(mt) << "\" width=\"" << num(plot_w)
      << "\" height=\"" << num(plot_h) << "\" fill=\"none\" stroke=\"#444444\"/>\n";
  svg << "<text x=\"" << num(ml + plot_w / 2) << "\" y=\"" << num(height - 12)
      << "\" text-anchor=\"middle\">environment steps</text>\n";
  svg << "<text x=\"18\" y=\"" << num(mt + plot_h / 2)
      << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 " << num(mt + plot_h / 2)
      << ")\">mean evaluation return</text>\n";

  for (size_t i = 0; i < series.size(); ++i) {
    const Series& s = series[i];
    const char* color = kPalette[i % kPaletteSize];
    svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.8\" points=\"";
    for (size_t j = 0; j < s.steps.size(); ++j) {
      if (j > 0) svg << ' ';
      svg << num(to_x(s.steps[j])) << ',' << num(to_y(s.values[j]));
    }
    svg << "\"/>\n";
    if (s.steps.size() <= 50) {
      for (size_t j = 0; j < s.steps.size(); ++j) {
        svg << "<circle cx=\"" << num(to_x(s.steps[j])) << "\" cy=\"" << num(to_y(s.values[j]))
            << "\" r=\"2.5\" fill=\"" << color << "\"/>\n";
      }
    }
    const Scalar lx = ml + plot_w - 220;
    const Scalar ly = mt + 20 + 18 * static_cast<Scalar>(i);
    svg << "<line x1=\"" << num(lx) << "\" y1=\"" << num(ly - 4) << "\" x2=\"" << num(lx + 26)
        << "\" y2=\"" << num(ly - 4) << "\" stroke=\"" << color << "\" stroke-width=\"2.5\"/>\n";
    svg << "<text x=\"" << num(lx + 32) << "\" y=\"" << num(ly) << "\">" << escape_xml(s.label)
        << "</text>\n";
  }
  svg << "</g>\n</svg>\n";
  if (!svg) throw std::runtime_error("failed writing image file: " + out_image.string());
  svg.close();

  std::filesystem::path points_path = out_image;
  points_path.replace_extension(".points.csv");
  std::ofstream points(points_path);
  if (!points) throw std::runtime_error("cannot write points file: " + points_path.string());
  points << "series,step,value\n";
  for (const Series& s : series) {
    for (size_t j = 0; j < s.steps.size(); ++j) {
      points << s.label << ',' << trainer::format_scalar(s.steps[j]) << ','
             << trainer::format_scalar(s.values[j]) << '\n';
    }
  }
  points.close();

  return PlotPaths{out_image, points_path};
}

}  // namespace marl::cli
