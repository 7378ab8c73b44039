#include "tcnn/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "tcnn/errors.hpp"

namespace tcnn {

void write_ppm(const std::string& path, const ImageU8& img) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw data_error("cannot open for writing: " + path);
  f << "P6\n" << img.width << " " << img.height << "\n255\n";
  f.write(reinterpret_cast<const char*>(img.rgb.data()),
          static_cast<std::streamsize>(img.rgb.size()));
  if (!f) throw data_error("write failed: " + path);
}

namespace {
// Reads one whitespace-delimited token, skipping '#' comments.
std::string next_token(std::istream& in) {
  std::string tok;
  int ch;
  while ((ch = in.get()) != EOF) {
    if (ch == '#') {
      while ((ch = in.get()) != EOF && ch != '\n') {
      }
      continue;
    }
    if (std::isspace(ch)) {
      if (!tok.empty()) return tok;
      continue;
    }
    tok.push_back(static_cast<char>(ch));
  }
  return tok;
}
}  // namespace

ImageU8 read_ppm(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw data_error("cannot open: " + path);
  if (next_token(f) != "P6") throw data_error("not a binary PPM (P6): " + path);
  std::size_t w, h, maxval;
  try {
    w = std::stoul(next_token(f));
    h = std::stoul(next_token(f));
    maxval = std::stoul(next_token(f));
  } catch (const std::exception&) {
    throw data_error("malformed PPM header: " + path);
  }
  if (maxval != 255) throw data_error("unsupported PPM maxval (want 255): " + path);
  ImageU8 img(w, h);
  f.read(reinterpret_cast<char*>(img.rgb.data()), static_cast<std::streamsize>(img.rgb.size()));
  if (f.gcount() != static_cast<std::streamsize>(img.rgb.size()))
    throw data_error("truncated PPM payload: " + path);
  return img;
}

namespace {
// Bilinear sample at continuous pixel coordinate (px, py); the center of
// pixel (i, j) sits at (i + 0.5, j + 0.5). Clamped at the borders.
double sample_bilinear(const ImageU8& img, double px, double py, std::size_t c) {
  const double u = px - 0.5, v = py - 0.5;
  const double fx = std::floor(u), fy = std::floor(v);
  const double ax = u - fx, ay = v - fy;
  auto clampi = [](double f, std::size_t hi) {
    if (f < 0) return std::size_t{0};
    if (f > static_cast<double>(hi)) return hi;
    return static_cast<std::size_t>(f);
  };
  const std::size_t x0 = clampi(fx, img.width - 1), x1 = clampi(fx + 1, img.width - 1);
  const std::size_t y0 = clampi(fy, img.height - 1), y1 = clampi(fy + 1, img.height - 1);
  const double v00 = img.at(x0, y0, c), v10 = img.at(x1, y0, c);
  const double v01 = img.at(x0, y1, c), v11 = img.at(x1, y1, c);
  return (1 - ay) * ((1 - ax) * v00 + ax * v10) + ay * ((1 - ax) * v01 + ax * v11);
}
}  // namespace

Tensor crop_resize(const ImageU8& img, double bx, double by, double bw, double bh,
                   std::size_t out_size) {
  if (bw <= 0 || bh <= 0) throw data_error("crop_resize: box extents must be positive");
  Tensor out({out_size, out_size, 3});
  for (std::size_t j = 0; j < out_size; ++j) {
    const double py = by + bh * (static_cast<double>(j) + 0.5) / static_cast<double>(out_size);
    for (std::size_t i = 0; i < out_size; ++i) {
      const double px = bx + bw * (static_cast<double>(i) + 0.5) / static_cast<double>(out_size);
      for (std::size_t c = 0; c < 3; ++c)
        out.at3(j, i, c) = sample_bilinear(img, px, py, c) / 255.0;
    }
  }
  return out;
}

ImageU8 tensor_to_image(const Tensor& t) {
  require_rank(t, 3, "tensor_to_image");
  if (t.shape[2] != 3) throw std::invalid_argument("tensor_to_image: need HxWx3");
  ImageU8 img(t.shape[1], t.shape[0]);
  for (std::size_t y = 0; y < t.shape[0]; ++y) {
    for (std::size_t x = 0; x < t.shape[1]; ++x) {
      for (std::size_t c = 0; c < 3; ++c) {
        double v = std::clamp(t.at3(y, x, c), 0.0, 1.0);
        img.at(x, y, c) = static_cast<std::uint8_t>(std::lround(v * 255.0));
      }
    }
  }
  return img;
}

}  // namespace tcnn
