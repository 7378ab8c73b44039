#pragma once

#include <array>
#include <cstddef>
#include <vector>

namespace tcnn {

/// m landmark points in box-normalized coordinates. Index roles:
/// 0 left eye, 1 right eye, 2 nose, 3 left mouth corner, 4 right mouth corner.
/// Indices 0 and 1 are the eye references used for loss normalization.
struct LandmarkSet {
  std::vector<std::array<double, 2>> pts;

  std::size_t size() const { return pts.size(); }
  static LandmarkSet from_flat(const std::vector<double>& xy);
  std::vector<double> to_flat() const;
};

/// Swaps left/right roles when an image is mirrored: {1, 0, 2, 4, 3}.
extern const std::array<std::size_t, 5> kMirrorRolePerm;

/// Euclidean distance between the two ground-truth eye points.
/// Throws numeric_error when the eyes are closer than 1e-9.
double interocular(const LandmarkSet& truth);

/// Squared L2 over all 2m coordinates, normalized by the squared
/// inter-ocular distance of the ground truth.
double loss(const LandmarkSet& predicted, const LandmarkSet& truth);

/// d(loss)/d(predicted coordinates), flat layout (x1, y1, ..., xm, ym).
std::vector<double> loss_gradient(const LandmarkSet& predicted, const LandmarkSet& truth);

/// x -> 1 - x plus the left/right role permutation (m == 5 only).
LandmarkSet mirror_landmarks(const LandmarkSet& lm);

}  // namespace tcnn
