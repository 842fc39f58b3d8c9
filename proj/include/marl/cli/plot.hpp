#pragma once

#include "marl/common.hpp"

#include <filesystem>
#include <vector>

namespace marl::cli {

// Centered rolling mean; the window shrinks at the edges so the output length
// matches the input. Window must be odd and >= 1.
std::vector<Scalar> rolling_mean(const std::vector<Scalar>& values, int window);

struct PlotPaths {
  std::filesystem::path image;
  std::filesystem::path points;
};

// Renders evaluation-return curves from one or more metrics_eval.csv files
// (smoothed, one labeled series per file) to an SVG image, and writes the
// exact plotted points to a sidecar CSV so nothing lives only in pixels.
PlotPaths plot_metrics(const std::vector<std::filesystem::path>& csvs,
                       const std::filesystem::path& out_image);

}  // namespace marl::cli
