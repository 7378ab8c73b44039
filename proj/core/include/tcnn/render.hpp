#pragma once

#include <array>
#include <string>
#include <vector>

#include "tcnn/image.hpp"

namespace tcnn {

struct CurveSeries {
  std::string name;
  std::vector<double> x, y;
  std::array<std::uint8_t, 3> color{0, 0, 0};
};

/// Line plot on a white canvas with axes; y is clamped to [y_min, y_max].
ImageU8 render_curves(const std::vector<CurveSeries>& series, double y_min, double y_max,
                      std::size_t width = 480, std::size_t height = 320);

/// Paired bars (e.g. per-cluster error, two models side by side).
ImageU8 render_paired_bars(const std::vector<double>& a, const std::vector<double>& b,
                           std::size_t width = 480, std::size_t height = 320);

}  // namespace tcnn
