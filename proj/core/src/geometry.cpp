#include "tcnn/geometry.hpp"

#include <cmath>
#include <stdexcept>

#include "tcnn/errors.hpp"

namespace tcnn {

SimilarityTransform SimilarityTransform::from_parts(double scale, double theta, double tx,
                                                    double ty) {
  SimilarityTransform t;
  t.a = scale * std::cos(theta);
  t.b = scale * std::sin(theta);
  t.tx = tx;
  t.ty = ty;
  return t;
}

std::array<double, 2> SimilarityTransform::apply(const std::array<double, 2>& p) const {
  return {a * p[0] - b * p[1] + tx, b * p[0] + a * p[1] + ty};
}

SimilarityTransform SimilarityTransform::inverse() const {
  const double s2 = a * a + b * b;
  if (s2 < 1e-18) throw numeric_error("similarity transform not invertible (scale ~ 0)");
  SimilarityTransform inv;
  inv.a = a / s2;
  inv.b = -b / s2;
  inv.tx = (-a * tx - b * ty) / s2;
  inv.ty = (b * tx - a * ty) / s2;
  return inv;
}

SimilarityTransform SimilarityTransform::then(const SimilarityTransform& next) const {
  // next(this(p))
  SimilarityTransform out;
  out.a = next.a * a - next.b * b;
  out.b = next.b * a + next.a * b;
  const auto t = next.apply({tx, ty});
  out.tx = t[0];
  out.ty = t[1];
  return out;
}

double SimilarityTransform::scale() const { return std::sqrt(a * a + b * b); }
double SimilarityTransform::rotation() const { return std::atan2(b, a); }

SimilarityFit estimate_similarity(const std::vector<std::array<double, 2>>& src,
                                  const std::vector<std::array<double, 2>>& dst) {
  if (src.size() != dst.size())
    throw std::invalid_argument("estimate_similarity: point count mismatch");
  if (src.size() < 2) throw std::invalid_argument("estimate_similarity: need >= 2 points");

  const double n = static_cast<double>(src.size());
  double msx = 0, msy = 0, mdx = 0, mdy = 0;
  for (std::size_t i = 0; i < src.size(); ++i) {
    msx += src[i][0];
    msy += src[i][1];
    mdx += dst[i][0];
    mdy += dst[i][1];
  }
  msx /= n;
  msy /= n;
  mdx /= n;
  mdy /= n;

  // Normal equations in centered coordinates; the model is linear in (a, b).
  double sxx = 0;   // sum |src - mean|^2
  double dot = 0;   // sum sx*dx + sy*dy
  double cross = 0; // sum sx*dy - sy*dx
  for (std::size_t i = 0; i < src.size(); ++i) {
    const double sx = src[i][0] - msx, sy = src[i][1] - msy;
    const double dx = dst[i][0] - mdx, dy = dst[i][1] - mdy;
    sxx += sx * sx + sy * sy;
    dot += sx * dx + sy * dy;
    cross += sx * dy - sy * dx;
  }
  if (sxx < 1e-18)
    throw numeric_error("estimate_similarity: degenerate configuration (all source points coincide)");

  SimilarityTransform t;
  t.a = dot / sxx;
  t.b = cross / sxx;
  t.tx = mdx - (t.a * msx - t.b * msy);
  t.ty = mdy - (t.b * msx + t.a * msy);

  double residual = 0;
  for (std::size_t i = 0; i < src.size(); ++i) {
    const auto p = t.apply(src[i]);
    const double ex = p[0] - dst[i][0], ey = p[1] - dst[i][1];
    residual += ex * ex + ey * ey;
  }
  return {t, residual};
}

}  // namespace tcnn
