#include "tcnn/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "tcnn/errors.hpp"

namespace tcnn {

double principal_axis_variance(const std::vector<std::array<double, 2>>& points) {
  if (points.empty()) throw std::invalid_argument("principal_axis_variance: empty point set");
  const double n = static_cast<double>(points.size());
  double mx = 0, my = 0;
  for (const auto& p : points) {
    mx += p[0];
    my += p[1];
  }
  mx /= n;
  my /= n;
  double sxx = 0, syy = 0, sxy = 0;
  for (const auto& p : points) {
    const double dx = p[0] - mx, dy = p[1] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  sxx /= n;
  syy /= n;
  sxy /= n;
  // Largest eigenvalue of [[sxx, sxy], [sxy, syy]].
  const double tr2 = (sxx + syy) / 2.0;
  const double det = std::sqrt(std::max(0.0, (sxx - syy) * (sxx - syy) / 4.0 + sxy * sxy));
  return tr2 + det;
}

double attribute_variance(const std::vector<int>& labels) {
  if (labels.empty()) throw std::invalid_argument("attribute_variance: empty label set");
  double p = 0;
  for (int v : labels) {
    if (v != 0 && v != 1) throw std::invalid_argument("attribute_variance: labels must be 0/1");
    p += v;
  }
  p /= static_cast<double>(labels.size());
  return p * (1.0 - p);
}

SizeStats cluster_size_stats(const std::vector<std::size_t>& sizes) {
  if (sizes.empty()) throw std::invalid_argument("cluster_size_stats: no clusters");
  std::vector<double> v(sizes.begin(), sizes.end());
  std::sort(v.begin(), v.end());
  SizeStats out;
  const std::size_t n = v.size();
  out.median = n % 2 == 1 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2.0;
  double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(n);
  double acc = 0;
  for (double x : v) acc += (x - mean) * (x - mean);
  out.sd = std::sqrt(acc / static_cast<double>(n));
  return out;
}

double error_rate(const LandmarkSet& predicted, const LandmarkSet& truth) {
  if (predicted.size() != truth.size())
    throw std::invalid_argument("error_rate: landmark count mismatch");
  const double iod = interocular(truth);
  double mean_dist = 0;
  for (std::size_t j = 0; j < truth.size(); ++j) {
    const double dx = predicted.pts[j][0] - truth.pts[j][0];
    const double dy = predicted.pts[j][1] - truth.pts[j][1];
    mean_dist += std::sqrt(dx * dx + dy * dy);
  }
  mean_dist /= static_cast<double>(truth.size());
  return 100.0 * mean_dist / iod;
}

std::vector<double> cumulative_error_curve(const std::vector<double>& errors,
                                           const std::vector<double>& thresholds) {
  if (errors.empty()) throw std::invalid_argument("cumulative_error_curve: empty error list");
  std::vector<double> curve;
  curve.reserve(thresholds.size());
  const double n = static_cast<double>(errors.size());
  for (double t : thresholds) {
    std::size_t below = 0;
    for (double e : errors)
      if (e <= t) ++below;
    curve.push_back(static_cast<double>(below) / n);
  }
  return curve;
}

LandmarkVarianceReport landmark_variance_report(const std::vector<std::size_t>& assignments,
                                                std::size_t k,
                                                const std::vector<LandmarkSet>& truths) {
  if (assignments.size() != truths.size())
    throw std::invalid_argument("landmark_variance_report: size mismatch");
  if (truths.empty()) throw std::invalid_argument("landmark_variance_report: empty input");
  const std::size_t m = truths[0].size();

  LandmarkVarianceReport rep;
  rep.per_cluster.assign(k, std::vector<double>(m, 0.0));
  std::vector<std::size_t> counted;
  for (std::size_t c = 0; c < k; ++c) {
    bool any = false;
    for (std::size_t j = 0; j < m; ++j) {
      std::vector<std::array<double, 2>> pts;
      for (std::size_t i = 0; i < truths.size(); ++i)
        if (assignments[i] == c) pts.push_back(truths[i].pts[j]);
      if (pts.empty()) {
        rep.per_cluster[c][j] = 0.0;
        continue;
      }
      any = true;
      rep.per_cluster[c][j] = principal_axis_variance(pts);
    }
    if (any) counted.push_back(c);
  }
  // Averages and standard errors over non-empty clusters.
  rep.mean_per_landmark.assign(m, 0.0);
  rep.se_per_landmark.assign(m, 0.0);
  const double kc = static_cast<double>(counted.size());
  if (counted.empty()) return rep;
  for (std::size_t j = 0; j < m; ++j) {
    double mean = 0;
    for (std::size_t c : counted) mean += rep.per_cluster[c][j];
    mean /= kc;
    double var = 0;
    for (std::size_t c : counted) {
      const double d = rep.per_cluster[c][j] - mean;
      var += d * d;
    }
    var /= kc;
    rep.mean_per_landmark[j] = mean;
    rep.se_per_landmark[j] = std::sqrt(var / kc);
    rep.overall_mean += mean;
  }
  rep.overall_mean /= static_cast<double>(m);
  return rep;
}

AttributeVarianceReport attribute_variance_report(const std::vector<std::size_t>& assignments,
                                                  std::size_t k,
                                                  const std::vector<std::array<int, 3>>& attrs) {
  if (assignments.size() != attrs.size())
    throw std::invalid_argument("attribute_variance_report: size mismatch");
  AttributeVarianceReport rep;
  rep.per_cluster.assign(k, {0.0, 0.0, 0.0});
  std::vector<std::size_t> counted;
  for (std::size_t c = 0; c < k; ++c) {
    std::vector<int> labels[3];
    for (std::size_t i = 0; i < attrs.size(); ++i) {
      if (assignments[i] != c) continue;
      for (std::size_t a = 0; a < 3; ++a) labels[a].push_back(attrs[i][a]);
    }
    if (labels[0].empty()) continue;
    counted.push_back(c);
    for (std::size_t a = 0; a < 3; ++a) rep.per_cluster[c][a] = attribute_variance(labels[a]);
  }
  if (counted.empty()) return rep;
  const double kc = static_cast<double>(counted.size());
  for (std::size_t a = 0; a < 3; ++a) {
    double mean = 0;
    for (std::size_t c : counted) mean += rep.per_cluster[c][a];
    mean /= kc;
    double var = 0;
    for (std::size_t c : counted) {
      const double d = rep.per_cluster[c][a] - mean;
      var += d * d;
    }
    var /= kc;
    rep.mean_per_attribute[a] = mean;
    rep.se_per_attribute[a] = std::sqrt(var / kc);
  }
  return rep;
}

ImageU8 mean_cluster_images(const std::vector<Sample>& samples,
                            const std::vector<std::size_t>& assignments, std::size_t k,
                            const NormalizationStats& stats,
                            const std::vector<double>& sort_keys) {
  if (samples.size() != assignments.size())
    throw std::invalid_argument("mean_cluster_images: size mismatch");
  if (sort_keys.size() != k)
    throw std::invalid_argument("mean_cluster_images: need one sort key per cluster");

  const std::size_t S = kPatchSize;
  std::vector<Tensor> sums(k, Tensor::zeros({S, S, 3}));
  std::vector<std::size_t> counts(k, 0);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const Tensor img = unapply_stats(samples[i].image, stats);
    Tensor& acc = sums[assignments[i]];
    for (std::size_t j = 0; j < img.data.size(); ++j) acc.data[j] += img.data[j];
    counts[assignments[i]] += 1;
  }

  std::vector<std::size_t> order(k);
  for (std::size_t c = 0; c < k; ++c) order[c] = c;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return sort_keys[a] < sort_keys[b]; });

  const std::size_t cols = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(k))));
  const std::size_t rows = (k + cols - 1) / cols;
  const std::size_t pad = 2;
  ImageU8 grid(cols * (S + pad) + pad, rows * (S + pad) + pad);

  for (std::size_t slot = 0; slot < k; ++slot) {
    const std::size_t c = order[slot];
    const std::size_t gx = (slot % cols) * (S + pad) + pad;
    const std::size_t gy = (slot / cols) * (S + pad) + pad;
    if (counts[c] == 0) continue;  // empty cluster stays black
    for (std::size_t y = 0; y < S; ++y)
      for (std::size_t x = 0; x < S; ++x)
        for (std::size_t ch = 0; ch < 3; ++ch) {
          double v = sums[c].at3(y, x, ch) / static_cast<double>(counts[c]);
          grid.at(gx + x, gy + y, ch) =
              static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
        }
  }
  return grid;
}

}  // namespace tcnn
