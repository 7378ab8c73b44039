#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tcnn/tensor.hpp"

namespace tcnn {

/// 8-bit RGB raster, row-major, 3 bytes per pixel.
struct ImageU8 {
  std::size_t width = 0, height = 0;
  std::vector<std::uint8_t> rgb;

  ImageU8() = default;
  ImageU8(std::size_t w, std::size_t h) : width(w), height(h), rgb(w * h * 3, 0) {}

  std::uint8_t& at(std::size_t x, std::size_t y, std::size_t c) {
    return rgb[(y * width + x) * 3 + c];
  }
  std::uint8_t at(std::size_t x, std::size_t y, std::size_t c) const {
    return rgb[(y * width + x) * 3 + c];
  }
};

// Binary PPM (P6, maxval 255).
void write_ppm(const std::string& path, const ImageU8& img);
ImageU8 read_ppm(const std::string& path);

/// Crop the given pixel box out of an image and resample it to out_size x
/// out_size with bilinear interpolation. Values scaled to [0, 1]. Pixel (i, j)
/// of the output has its center at box position ((i+0.5)/out, (j+0.5)/out).
Tensor crop_resize(const ImageU8& img, double bx, double by, double bw, double bh,
                   std::size_t out_size);

/// [0,1] float image back to bytes with clamping.
ImageU8 tensor_to_image(const Tensor& t);

}  // namespace tcnn
