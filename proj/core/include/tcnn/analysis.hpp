#pragma once

#include <array>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "tcnn/dataio.hpp"
#include "tcnn/image.hpp"

namespace tcnn {

/// Largest eigenvalue of the 2x2 population covariance of a 2D point set.
/// A single point (or identical points) gives 0.
double principal_axis_variance(const std::vector<std::array<double, 2>>& points);

/// Population variance of 0/1 labels: p * (1 - p).
double attribute_variance(const std::vector<int>& labels);

struct SizeStats {
  double median = 0.0;
  double sd = 0.0;  // population formula
};
SizeStats cluster_size_stats(const std::vector<std::size_t>& sizes);

/// Mean landmark distance as a percent of the ground-truth inter-ocular
/// distance.
double error_rate(const LandmarkSet& predicted, const LandmarkSet& truth);

/// Fraction of images with error below each threshold. Failures (error ==
/// +inf, e.g. detector misses) stay in the denominator and never fall below
/// any threshold. Thresholds must be given in ascending order.
std::vector<double> cumulative_error_curve(const std::vector<double>& errors,
                                           const std::vector<double>& thresholds);

constexpr double kFailureError = std::numeric_limits<double>::infinity();

/// Per-cluster, per-landmark principal-axis variances and their per-layer
/// averages with standard errors over clusters.
struct LandmarkVarianceReport {
  std::vector<std::vector<double>> per_cluster;  // k x m
  std::vector<double> mean_per_landmark;         // m
  std::vector<double> se_per_landmark;           // m
  double overall_mean = 0.0;
};
LandmarkVarianceReport landmark_variance_report(const std::vector<std::size_t>& assignments,
                                                std::size_t k,
                                                const std::vector<LandmarkSet>& truths);

struct AttributeVarianceReport {
  std::vector<std::array<double, 3>> per_cluster;  // k x 3
  std::array<double, 3> mean_per_attribute{};
  std::array<double, 3> se_per_attribute{};
};
AttributeVarianceReport attribute_variance_report(const std::vector<std::size_t>& assignments,
                                                  std::size_t k,
                                                  const std::vector<std::array<int, 3>>& attrs);

/// Per-cluster pixel means of de-normalized crops, tiled into one grid image
/// ordered by ascending sort key. Empty clusters render black.
ImageU8 mean_cluster_images(const std::vector<Sample>& samples,
                            const std::vector<std::size_t>& assignments, std::size_t k,
                            const NormalizationStats& stats,
                            const std::vector<double>& sort_keys);

}  // namespace tcnn
