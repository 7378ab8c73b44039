#pragma once

#include <cstdint>
#include <vector>

#include "tcnn/dataio.hpp"
#include "tcnn/geometry.hpp"
#include "tcnn/gmm.hpp"
#include "tcnn/network.hpp"
#include "tcnn/rng.hpp"

namespace tcnn {

/// Backward warp with bilinear interpolation: output pixel x takes the value
/// of `image` at H^{-1}(x), in continuous pixel coordinates. Source positions
/// outside the image read as `fill` (0 == dataset mean in normalized space).
Tensor warp_image(const Tensor& image, const SimilarityTransform& h, double fill = 0.0);

struct AugmentStats {
  std::size_t attempted = 0;
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  bool shortfall = false;  // retry cap hit before reaching the target
  double rejection_rate() const {
    return attempted == 0 ? 0.0 : static_cast<double>(rejected) / static_cast<double>(attempted);
  }
};

struct AugmentResult {
  std::vector<Sample> generated;  // only the new samples; callers keep originals
  AugmentStats stats;
};

/// Inflates a cluster toward target_size by warping one member's image onto
/// another member's landmark geometry. A candidate pairs a source sample
/// (pixels) with a reference sample (geometry + labels); the least-squares
/// similarity maps the source landmarks onto the reference landmarks, the
/// image is backward-warped accordingly, and the candidate is kept only if
/// the trunk feature of the warped image still routes to `cluster_index`.
/// Accepted samples carry the reference sample's landmark labels.
AugmentResult augment_cluster(const std::vector<Sample>& members, const GmmModel& router,
                              const NetworkModel& trunk, std::size_t cluster_index,
                              std::size_t target_size, std::size_t retry_cap, StreamRng rng);

/// Same candidate construction, but sources are drawn from outside the
/// cluster; reports how often such candidates fail the routing test.
AugmentStats cross_cluster_rejection_probe(const std::vector<Sample>& members,
                                           const std::vector<Sample>& outsiders,
                                           const GmmModel& router, const NetworkModel& trunk,
                                           std::size_t cluster_index, std::size_t attempts,
                                           StreamRng rng);

}  // namespace tcnn
