#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tcnn/rng.hpp"

namespace tcnn {

/// Row-major n x d feature matrix.
struct FeatureMatrix {
  std::size_t n = 0, d = 0;
  std::vector<double> data;

  FeatureMatrix() = default;
  FeatureMatrix(std::size_t n_, std::size_t d_) : n(n_), d(d_), data(n_ * d_, 0.0) {}

  std::span<const double> row(std::size_t i) const { return {data.data() + i * d, d}; }
  std::span<double> row(std::size_t i) { return {data.data() + i * d, d}; }
};

/// K-component Gaussian mixture with diagonal covariances.
struct GmmModel {
  std::size_t k = 0, dim = 0;
  std::vector<double> weights;                 // simplex, each > 0
  std::vector<std::vector<double>> means;      // k x d
  std::vector<std::vector<double>> variances;  // k x d, floored at 1e-6
  std::string tap;                             // feature tap it was fitted on

  void save(const std::string& path) const;
  static GmmModel load(const std::string& path);
  std::string to_bytes() const;
};

struct GmmInit {
  std::vector<double> weights;
  std::vector<std::vector<double>> means;
  std::vector<std::vector<double>> variances;
};

struct GmmFitOptions {
  std::size_t max_iters = 300;
  double rel_tol = 1e-7;       // relative log-likelihood change
  double var_floor = 1e-6;
  unsigned jobs = 1;
  std::optional<GmmInit> init;  // overrides the seeded initializer
};

struct GmmFitResult {
  GmmModel model;
  std::vector<double> loglik_trace;              // one entry per iteration
  std::vector<std::vector<double>> responsibilities;  // final E-step, n x k
  std::vector<std::string> events;               // collapse re-seeds etc.
};

/// k-means++-style seeding: means drawn from the data, uniform weights,
/// global per-dimension variance.
GmmInit gmm_seed_init(const FeatureMatrix& x, std::size_t k, StreamRng& rng,
                      double var_floor = 1e-6);

/// Diagonal-covariance EM to convergence. Requires n >= k. A component whose
/// weight collapses below 1e-6/k is re-seeded from the point the model
/// explains worst, and the event is logged.
GmmFitResult gmm_fit(const FeatureMatrix& x, std::size_t k, StreamRng rng,
                     const GmmFitOptions& opts = {});

struct GmmAssignment {
  std::size_t index = 0;
  std::vector<double> posterior;
};

/// Posterior-argmax cluster assignment, computed in log space.
/// Ties break toward the lowest component index.
GmmAssignment gmm_assign(const GmmModel& model, std::span<const double> x);

/// Log N(x; mean, diag var) -- exposed for tests.
double gmm_log_density(std::span<const double> x, std::span<const double> mean,
                       std::span<const double> var);

}  // namespace tcnn
