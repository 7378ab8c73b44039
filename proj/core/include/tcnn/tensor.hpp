#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace tcnn {

/// Dense n-dimensional array of 64-bit floats, row-major.
/// The sole numeric carrier for images, activations, weights and gradients.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> s);
  Tensor(std::vector<std::size_t> s, std::vector<double> d);

  static Tensor zeros(std::vector<std::size_t> s) { return Tensor(std::move(s)); }
  static Tensor full(std::vector<std::size_t> s, double v);

  std::size_t numel() const { return data.size(); }
  std::size_t rank() const { return shape.size(); }

  // Rank-specific accessors for the hot paths; no bounds checks in release.
  double& at3(std::size_t i, std::size_t j, std::size_t k) {
    return data[(i * shape[1] + j) * shape[2] + k];
  }
  double at3(std::size_t i, std::size_t j, std::size_t k) const {
    return data[(i * shape[1] + j) * shape[2] + k];
  }
  double& at2(std::size_t i, std::size_t j) { return data[i * shape[1] + j]; }
  double at2(std::size_t i, std::size_t j) const { return data[i * shape[1] + j]; }

  void fill(double v);
  bool same_shape(const Tensor& o) const { return shape == o.shape; }
};

std::size_t shape_numel(const std::vector<std::size_t>& shape);
std::string shape_str(const std::vector<std::size_t>& shape);

// Throws std::invalid_argument with a shape diagnostic on mismatch.
void require_shape(const Tensor& t, const std::vector<std::size_t>& want,
                   const char* what);
void require_rank(const Tensor& t, std::size_t rank, const char* what);

bool all_finite(const Tensor& t);

}  // namespace tcnn
