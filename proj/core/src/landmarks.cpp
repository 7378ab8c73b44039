#include "tcnn/landmarks.hpp"

#include <cmath>
#include <stdexcept>

#include "tcnn/errors.hpp"

namespace tcnn {

const std::array<std::size_t, 5> kMirrorRolePerm = {1, 0, 2, 4, 3};

LandmarkSet LandmarkSet::from_flat(const std::vector<double>& xy) {
  if (xy.size() % 2 != 0)
    throw std::invalid_argument("landmarks: flat vector must have even length");
  LandmarkSet lm;
  lm.pts.resize(xy.size() / 2);
  for (std::size_t i = 0; i < lm.pts.size(); ++i) lm.pts[i] = {xy[2 * i], xy[2 * i + 1]};
  return lm;
}

std::vector<double> LandmarkSet::to_flat() const {
  std::vector<double> out;
  out.reserve(2 * pts.size());
  for (const auto& p : pts) {
    out.push_back(p[0]);
    out.push_back(p[1]);
  }
  return out;
}

double interocular(const LandmarkSet& truth) {
  if (truth.size() < 2) throw std::invalid_argument("landmarks: need at least two eye points");
  const double dx = truth.pts[0][0] - truth.pts[1][0];
  const double dy = truth.pts[0][1] - truth.pts[1][1];
  const double d = std::sqrt(dx * dx + dy * dy);
  if (d < 1e-9) throw numeric_error("degenerate ground truth: inter-ocular distance < 1e-9");
  return d;
}

double loss(const LandmarkSet& predicted, const LandmarkSet& truth) {
  if (predicted.size() != truth.size())
    throw std::invalid_argument("loss: landmark count mismatch");
  const double iod = interocular(truth);
  double sq = 0.0;
  for (std::size_t j = 0; j < truth.size(); ++j) {
    const double dx = predicted.pts[j][0] - truth.pts[j][0];
    const double dy = predicted.pts[j][1] - truth.pts[j][1];
    sq += dx * dx + dy * dy;
  }
  return sq / (iod * iod);
}

std::vector<double> loss_gradient(const LandmarkSet& predicted, const LandmarkSet& truth) {
  if (predicted.size() != truth.size())
    throw std::invalid_argument("loss: landmark count mismatch");
  const double iod = interocular(truth);
  const double scale = 2.0 / (iod * iod);
  std::vector<double> g(2 * truth.size());
  for (std::size_t j = 0; j < truth.size(); ++j) {
    g[2 * j] = scale * (predicted.pts[j][0] - truth.pts[j][0]);
    g[2 * j + 1] = scale * (predicted.pts[j][1] - truth.pts[j][1]);
  }
  return g;
}

LandmarkSet mirror_landmarks(const LandmarkSet& lm) {
  if (lm.size() != kMirrorRolePerm.size())
    throw std::invalid_argument("mirror: only the 5-point role layout is supported");
  LandmarkSet out;
  out.pts.resize(lm.size());
  for (std::size_t j = 0; j < lm.size(); ++j) {
    const auto& p = lm.pts[kMirrorRolePerm[j]];
    out.pts[j] = {1.0 - p[0], p[1]};
  }
  return out;
}

}  // namespace tcnn
