#include "tcnn/render.hpp"

#include <algorithm>
#include <cmath>

namespace tcnn {

namespace {

void put_px(ImageU8& img, long x, long y, std::array<std::uint8_t, 3> c) {
  if (x < 0 || y < 0 || x >= static_cast<long>(img.width) || y >= static_cast<long>(img.height))
    return;
  for (std::size_t i = 0; i < 3; ++i)
    img.at(static_cast<std::size_t>(x), static_cast<std::size_t>(y), i) = c[i];
}

void draw_line(ImageU8& img, long x0, long y0, long x1, long y1,
               std::array<std::uint8_t, 3> c) {
  const long dx = std::labs(x1 - x0), dy = -std::labs(y1 - y0);
  const long sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
  long err = dx + dy;
  while (true) {
    put_px(img, x0, y0, c);
    if (x0 == x1 && y0 == y1) break;
    const long e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x0 += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y0 += sy;
    }
  }
}

}  // namespace

ImageU8 render_curves(const std::vector<CurveSeries>& series, double y_min, double y_max,
                      std::size_t width, std::size_t height) {
  ImageU8 img(width, height);
  std::fill(img.rgb.begin(), img.rgb.end(), 255);

  const long margin = 28;
  const long x0 = margin, y0 = static_cast<long>(height) - margin;
  const long x1 = static_cast<long>(width) - 8, y1 = 8;
  draw_line(img, x0, y0, x1, y0, {0, 0, 0});
  draw_line(img, x0, y0, x0, y1, {0, 0, 0});

  double xmin = 0, xmax = 1;
  bool first = true;
  for (const auto& s : series)
    for (double x : s.x) {
      if (first) {
        xmin = xmax = x;
        first = false;
      }
      xmin = std::min(xmin, x);
      xmax = std::max(xmax, x);
    }
  if (xmax <= xmin) xmax = xmin + 1;
  if (y_max <= y_min) y_max = y_min + 1;

  auto map_x = [&](double x) {
    return x0 + static_cast<long>((x - xmin) / (xmax - xmin) * static_cast<double>(x1 - x0));
  };
  auto map_y = [&](double y) {
    const double t = std::clamp((y - y_min) / (y_max - y_min), 0.0, 1.0);
    return y0 - static_cast<long>(t * static_cast<double>(y0 - y1));
  };

  for (const auto& s : series) {
    for (std::size_t i = 1; i < s.x.size(); ++i)
      draw_line(img, map_x(s.x[i - 1]), map_y(s.y[i - 1]), map_x(s.x[i]), map_y(s.y[i]),
                s.color);
  }
  return img;
}

ImageU8 render_paired_bars(const std::vector<double>& a, const std::vector<double>& b,
                           std::size_t width, std::size_t height) {
  ImageU8 img(width, height);
  std::fill(img.rgb.begin(), img.rgb.end(), 255);
  const std::size_t n = std::max(a.size(), b.size());
  if (n == 0) return img;
  double vmax = 1e-12;
  for (double v : a) vmax = std::max(vmax, v);
  for (double v : b) vmax = std::max(vmax, v);

  const long base = static_cast<long>(height) - 12;
  const double slot = static_cast<double>(width - 16) / static_cast<double>(n);
  const long bar = std::max(1L, static_cast<long>(slot / 2.5));
  for (std::size_t i = 0; i < n; ++i) {
    const long xa = 8 + static_cast<long>(slot * static_cast<double>(i));
    const long xb = xa + bar + 1;
    if (i < a.size()) {
      const long h = static_cast<long>(a[i] / vmax * static_cast<double>(height - 24));
      for (long x = xa; x < xa + bar; ++x) draw_line(img, x, base, x, base - h, {200, 40, 40});
    }
    if (i < b.size()) {
      const long h = static_cast<long>(b[i] / vmax * static_cast<double>(height - 24));
      for (long x = xb; x < xb + bar; ++x) draw_line(img, x, base, x, base - h, {40, 60, 200});
    }
  }
  draw_line(img, 8, base, static_cast<long>(width) - 8, base, {0, 0, 0});
  return img;
}

}  // namespace tcnn
