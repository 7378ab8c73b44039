#include "tcnn/augment.hpp"

#include <cmath>

#include "tcnn/errors.hpp"

namespace tcnn {

namespace {

// Landmarks live in box-normalized coordinates; warping happens in the pixel
// frame of the 40x40 crop.
std::vector<std::array<double, 2>> to_px(const LandmarkSet& lm) {
  std::vector<std::array<double, 2>> out(lm.size());
  const double s = static_cast<double>(kPatchSize);
  for (std::size_t j = 0; j < lm.size(); ++j) out[j] = {lm.pts[j][0] * s, lm.pts[j][1] * s};
  return out;
}

// One candidate: warp src's pixels so that src's landmarks land on ref's
// landmark positions, label with ref's landmarks. warp_image samples the
// source at fit^{-1}(x), so the output pixel at a ref landmark reads from the
// matching src landmark.
Tensor make_candidate(const Sample& src, const Sample& ref) {
  const SimilarityFit fit = estimate_similarity(to_px(src.landmarks), to_px(ref.landmarks));
  return warp_image(src.image, fit.transform);
}

}  // namespace

Tensor warp_image(const Tensor& image, const SimilarityTransform& h, double fill) {
  require_rank(image, 3, "warp_image");
  const std::size_t H = image.shape[0], W = image.shape[1], C = image.shape[2];
  const SimilarityTransform inv = h.inverse();  // throws when scale ~ 0

  Tensor out({H, W, C});
  for (std::size_t y = 0; y < H; ++y) {
    for (std::size_t x = 0; x < W; ++x) {
      const std::array<double, 2> src =
          inv.apply({static_cast<double>(x) + 0.5, static_cast<double>(y) + 0.5});
      // Bilinear around pixel centers (i + 0.5, j + 0.5).
      const double u = src[0] - 0.5, v = src[1] - 0.5;
      const double fx = std::floor(u), fy = std::floor(v);
      const double ax = u - fx, ay = v - fy;
      const long x0 = static_cast<long>(fx), y0 = static_cast<long>(fy);

      for (std::size_t c = 0; c < C; ++c) {
        auto tap = [&](long xi, long yi) -> double {
          if (xi < 0 || yi < 0 || xi >= static_cast<long>(W) || yi >= static_cast<long>(H))
            return fill;
          return image.at3(static_cast<std::size_t>(yi), static_cast<std::size_t>(xi), c);
        };
        const double v00 = tap(x0, y0), v10 = tap(x0 + 1, y0);
        const double v01 = tap(x0, y0 + 1), v11 = tap(x0 + 1, y0 + 1);
        out.at3(y, x, c) =
            (1 - ay) * ((1 - ax) * v00 + ax * v10) + ay * ((1 - ax) * v01 + ax * v11);
      }
    }
  }
  return out;
}

AugmentResult augment_cluster(const std::vector<Sample>& members, const GmmModel& router,
                              const NetworkModel& trunk, std::size_t cluster_index,
                              std::size_t target_size, std::size_t retry_cap, StreamRng rng) {
  if (members.size() < 2)
    throw std::invalid_argument("augment_cluster: need at least 2 cluster members");

  AugmentResult res;
  if (members.size() >= target_size) return res;  // already large enough

  const std::size_t needed = target_size - members.size();
  while (res.generated.size() < needed && res.stats.attempted < retry_cap) {
    const std::size_t si = static_cast<std::size_t>(rng.below(members.size()));
    std::size_t ri = static_cast<std::size_t>(rng.below(members.size() - 1));
    if (ri >= si) ++ri;  // distinct pair

    res.stats.attempted += 1;
    Tensor warped = make_candidate(members[si], members[ri]);
    const auto feature = trunk.extract_features(warped, router.tap);
    if (gmm_assign(router, feature).index != cluster_index) {
      res.stats.rejected += 1;
      continue;
    }
    res.stats.accepted += 1;
    Sample s;
    s.image = std::move(warped);
    s.landmarks = members[ri].landmarks;
    s.attributes = members[ri].attributes;
    s.has_attributes = members[ri].has_attributes;
    s.source = members[si].source + "+warp";
    res.generated.push_back(std::move(s));
  }
  res.stats.shortfall = res.generated.size() < needed;
  return res;
}

AugmentStats cross_cluster_rejection_probe(const std::vector<Sample>& members,
                                           const std::vector<Sample>& outsiders,
                                           const GmmModel& router, const NetworkModel& trunk,
                                           std::size_t cluster_index, std::size_t attempts,
                                           StreamRng rng) {
  if (members.empty() || outsiders.empty())
    throw std::invalid_argument("cross_cluster_rejection_probe: empty sample pools");
  AugmentStats stats;
  for (std::size_t t = 0; t < attempts; ++t) {
    const Sample& src = outsiders[rng.below(outsiders.size())];
    const Sample& ref = members[rng.below(members.size())];
    stats.attempted += 1;
    Tensor warped = make_candidate(src, ref);
    const auto feature = trunk.extract_features(warped, router.tap);
    if (gmm_assign(router, feature).index != cluster_index)
      stats.rejected += 1;
    else
      stats.accepted += 1;
  }
  return stats;
}

}  // namespace tcnn
