#pragma once

#include <array>
#include <cstddef>
#include <vector>

namespace tcnn {

/// Non-reflective similarity transform:
///   x' = a*x - b*y + tx
///   y' = b*x + a*y + ty
/// i.e. uniform scale s = sqrt(a^2 + b^2) and rotation theta = atan2(b, a)
/// followed by translation. Closed under composition and inversion.
struct SimilarityTransform {
  double a = 1.0, b = 0.0, tx = 0.0, ty = 0.0;

  static SimilarityTransform identity() { return {}; }
  static SimilarityTransform from_parts(double scale, double theta, double tx, double ty);

  std::array<double, 2> apply(const std::array<double, 2>& p) const;
  SimilarityTransform inverse() const;          // throws numeric_error if scale ~ 0
  SimilarityTransform then(const SimilarityTransform& next) const;

  double scale() const;
  double rotation() const;
};

struct SimilarityFit {
  SimilarityTransform transform;
  double residual = 0.0;  // minimized sum of squared point errors
};

/// Least-squares similarity mapping src points onto dst points.
/// Requires >= 2 points with at least two distinct src positions.
SimilarityFit estimate_similarity(const std::vector<std::array<double, 2>>& src,
                                  const std::vector<std::array<double, 2>>& dst);

}  // namespace tcnn
