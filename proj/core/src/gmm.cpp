#include "tcnn/gmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "tcnn/errors.hpp"
#include "tcnn/parallel.hpp"
#include "tcnn/serialize.hpp"
#include "tcnn/tensor.hpp"

namespace tcnn {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;
constexpr std::size_t kReduceChunks = 32;

// Kahan-compensated accumulator; keeps parallel reductions stable enough to
// be order-independent to ~1e-9 relative.
struct Kahan {
  double sum = 0.0, c = 0.0;
  void add(double v) {
    const double y = v - c;
    const double t = sum + y;
    c = (t - sum) - y;
    sum = t;
  }
  void merge(const Kahan& o) {
    add(o.sum);
    add(-o.c);
  }
};

double logsumexp(std::span<const double> v) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double x : v) mx = std::max(mx, x);
  if (!std::isfinite(mx)) return mx;
  double s = 0.0;
  for (double x : v) s += std::exp(x - mx);
  return mx + std::log(s);
}

}  // namespace

double gmm_log_density(std::span<const double> x, std::span<const double> mean,
                       std::span<const double> var) {
  double acc = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double diff = x[j] - mean[j];
    acc += std::log(var[j]) + diff * diff / var[j];
  }
  return -0.5 * (acc + static_cast<double>(x.size()) * kLog2Pi);
}

GmmInit gmm_seed_init(const FeatureMatrix& x, std::size_t k, StreamRng& rng, double var_floor) {
  if (x.n < k) throw std::invalid_argument("gmm: need at least k samples");
  GmmInit init;
  init.weights.assign(k, 1.0 / static_cast<double>(k));

  // Global per-dimension population variance, floored.
  std::vector<double> gmean(x.d, 0.0), gvar(x.d, 0.0);
  for (std::size_t i = 0; i < x.n; ++i) {
    auto r = x.row(i);
    for (std::size_t j = 0; j < x.d; ++j) gmean[j] += r[j];
  }
  for (double& m : gmean) m /= static_cast<double>(x.n);
  for (std::size_t i = 0; i < x.n; ++i) {
    auto r = x.row(i);
    for (std::size_t j = 0; j < x.d; ++j) {
      const double diff = r[j] - gmean[j];
      gvar[j] += diff * diff;
    }
  }
  for (double& v : gvar) v = std::max(v / static_cast<double>(x.n), var_floor);

  // k-means++ seeding of the means.
  std::vector<std::size_t> chosen;
  chosen.push_back(static_cast<std::size_t>(rng.below(x.n)));
  std::vector<double> d2(x.n, 0.0);
  while (chosen.size() < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < x.n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      auto xi = x.row(i);
      for (std::size_t c : chosen) {
        auto xc = x.row(c);
        double dist = 0.0;
        for (std::size_t j = 0; j < x.d; ++j) {
          const double diff = xi[j] - xc[j];
          dist += diff * diff;
        }
        best = std::min(best, dist);
      }
      d2[i] = best;
      total += best;
    }
    std::size_t pick;
    if (total <= 0.0) {
      pick = static_cast<std::size_t>(rng.below(x.n));
    } else {
      double target = rng.uniform01() * total, acc = 0.0;
      pick = x.n - 1;
      for (std::size_t i = 0; i < x.n; ++i) {
        acc += d2[i];
        if (acc >= target) {
          pick = i;
          break;
        }
      }
    }
    chosen.push_back(pick);
  }

  for (std::size_t c = 0; c < k; ++c) {
    auto r = x.row(chosen[c]);
    init.means.emplace_back(r.begin(), r.end());
    init.variances.push_back(gvar);
  }
  return init;
}

GmmFitResult gmm_fit(const FeatureMatrix& x, std::size_t k, StreamRng rng,
                     const GmmFitOptions& opts) {
  if (k < 1) throw std::invalid_argument("gmm: k must be >= 1");
  if (x.n < k) throw std::invalid_argument("gmm: n=" + std::to_string(x.n) +
                                           " < k=" + std::to_string(k));
  if (x.d < 1) throw std::invalid_argument("gmm: feature dimension must be >= 1");

  GmmFitResult res;
  GmmModel& m = res.model;
  m.k = k;
  m.dim = x.d;

  GmmInit init = opts.init ? *opts.init : gmm_seed_init(x, k, rng, opts.var_floor);
  m.weights = init.weights;
  m.means = init.means;
  m.variances = init.variances;

  std::vector<std::vector<double>> resp(x.n, std::vector<double>(k, 0.0));
  const double collapse_floor = 1e-6 / static_cast<double>(k);

  // Per-component constants for the E-step, refreshed each iteration:
  // lp[c] = log_norm[c] - 0.5 * sum_j diff^2 / var[c][j].
  std::vector<double> log_norm(k);
  std::vector<std::vector<double>> inv_var(k, std::vector<double>(x.d));
  auto prepare = [&] {
    for (std::size_t c = 0; c < k; ++c) {
      double logdet = 0.0;
      for (std::size_t j = 0; j < x.d; ++j) {
        logdet += std::log(m.variances[c][j]);
        inv_var[c][j] = 1.0 / m.variances[c][j];
      }
      log_norm[c] = std::log(m.weights[c]) -
                    0.5 * (logdet + static_cast<double>(x.d) * kLog2Pi);
    }
  };
  auto e_step_into = [&](std::vector<Kahan>* ll_chunks) {
    parallel_chunks(x.n, kReduceChunks, opts.jobs,
                    [&](std::size_t chunk, std::size_t b, std::size_t e) {
      std::vector<double> lp(k);
      for (std::size_t i = b; i < e; ++i) {
        auto xi = x.row(i);
        for (std::size_t c = 0; c < k; ++c) {
          const double* iv = inv_var[c].data();
          const double* mu = m.means[c].data();
          double quad = 0.0;
          for (std::size_t j = 0; j < x.d; ++j) {
            const double diff = xi[j] - mu[j];
            quad += diff * diff * iv[j];
          }
          lp[c] = log_norm[c] - 0.5 * quad;
        }
        const double lse = logsumexp(lp);
        if (ll_chunks) (*ll_chunks)[chunk].add(lse);
        for (std::size_t c = 0; c < k; ++c) resp[i][c] = std::exp(lp[c] - lse);
      }
    });
  };

  double prev_ll = -std::numeric_limits<double>::infinity();
  for (std::size_t iter = 0; iter < opts.max_iters; ++iter) {
    // E-step: responsibilities in log space; chunked so the log-likelihood
    // reduction is order-independent.
    prepare();
    std::vector<Kahan> ll_chunks(kReduceChunks);
    e_step_into(&ll_chunks);
    Kahan ll;
    for (const Kahan& part : ll_chunks) ll.merge(part);
    res.loglik_trace.push_back(ll.sum);

    // M-step: weighted means, then weighted variances about the new means.
    std::vector<double> nk(k, 0.0);
    {
      std::vector<std::vector<Kahan>> parts(kReduceChunks, std::vector<Kahan>(k));
      parallel_chunks(x.n, kReduceChunks, opts.jobs, [&](std::size_t chunk, std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i)
          for (std::size_t c = 0; c < k; ++c) parts[chunk][c].add(resp[i][c]);
      });
      for (std::size_t c = 0; c < k; ++c) {
        Kahan acc;
        for (std::size_t ch = 0; ch < kReduceChunks; ++ch) acc.merge(parts[ch][c]);
        nk[c] = acc.sum;
      }
    }

    auto weighted_moment = [&](bool about_mean) {
      std::vector<std::vector<std::vector<double>>> parts(
          kReduceChunks, std::vector<std::vector<double>>(k, std::vector<double>(x.d, 0.0)));
      parallel_chunks(x.n, kReduceChunks, opts.jobs, [&](std::size_t chunk, std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) {
          auto xi = x.row(i);
          for (std::size_t c = 0; c < k; ++c) {
            const double r = resp[i][c];
            if (r == 0.0) continue;
            auto& acc = parts[chunk][c];
            if (about_mean) {
              const auto& mu = m.means[c];
              for (std::size_t j = 0; j < x.d; ++j) {
                const double diff = xi[j] - mu[j];
                acc[j] += r * diff * diff;
              }
            } else {
              for (std::size_t j = 0; j < x.d; ++j) acc[j] += r * xi[j];
            }
          }
        }
      });
      std::vector<std::vector<double>> out(k, std::vector<double>(x.d, 0.0));
      for (std::size_t ch = 0; ch < kReduceChunks; ++ch)
        for (std::size_t c = 0; c < k; ++c)
          for (std::size_t j = 0; j < x.d; ++j) out[c][j] += parts[ch][c][j];
      return out;
    };

    auto sums = weighted_moment(false);
    for (std::size_t c = 0; c < k; ++c) {
      if (nk[c] <= 0.0) continue;  // handled by collapse re-seed below
      for (std::size_t j = 0; j < x.d; ++j) m.means[c][j] = sums[c][j] / nk[c];
    }
    auto sqsums = weighted_moment(true);
    for (std::size_t c = 0; c < k; ++c) {
      if (nk[c] <= 0.0) continue;
      for (std::size_t j = 0; j < x.d; ++j)
        m.variances[c][j] = std::max(sqsums[c][j] / nk[c], opts.var_floor);
      m.weights[c] = nk[c] / static_cast<double>(x.n);
    }

    // Collapsed components: re-seed from the point with the worst likelihood.
    bool reseeded = false;
    for (std::size_t c = 0; c < k; ++c) {
      if (m.weights[c] >= collapse_floor && nk[c] > 0.0) continue;
      std::size_t worst = 0;
      double worst_ll = std::numeric_limits<double>::infinity();
      std::vector<double> lp(k);
      for (std::size_t i = 0; i < x.n; ++i) {
        auto xi = x.row(i);
        for (std::size_t cc = 0; cc < k; ++cc)
          lp[cc] = std::log(std::max(m.weights[cc], 1e-300)) +
                   gmm_log_density(xi, m.means[cc], m.variances[cc]);
        const double lse = logsumexp(lp);
        if (lse < worst_ll) {
          worst_ll = lse;
          worst = i;
        }
      }
      auto r = x.row(worst);
      m.means[c].assign(r.begin(), r.end());
      m.weights[c] = 1.0 / static_cast<double>(k);
      res.events.push_back("component " + std::to_string(c) + " collapsed at iteration " +
                           std::to_string(res.loglik_trace.size()) + "; re-seeded from sample " +
                           std::to_string(worst));
      reseeded = true;
    }
    if (reseeded) {
      double wsum = 0.0;
      for (double w : m.weights) wsum += w;
      for (double& w : m.weights) w /= wsum;
    }

    const double ll_now = ll.sum;
    if (!reseeded && iter > 0 &&
        std::fabs(ll_now - prev_ll) < opts.rel_tol * (1.0 + std::fabs(prev_ll))) {
      prev_ll = ll_now;
      break;
    }
    prev_ll = ll_now;
  }

  // Final responsibilities under the converged parameters.
  prepare();
  e_step_into(nullptr);
  res.responsibilities = std::move(resp);
  return res;
}

GmmAssignment gmm_assign(const GmmModel& model, std::span<const double> x) {
  if (x.size() != model.dim)
    throw std::invalid_argument("gmm_assign: feature dimension " + std::to_string(x.size()) +
                                " does not match model dimension " + std::to_string(model.dim));
  std::vector<double> lp(model.k);
  for (std::size_t c = 0; c < model.k; ++c)
    lp[c] = std::log(model.weights[c]) + gmm_log_density(x, model.means[c], model.variances[c]);
  const double lse = logsumexp(lp);
  GmmAssignment out;
  out.posterior.resize(model.k);
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < model.k; ++c) {
    out.posterior[c] = std::exp(lp[c] - lse);
    if (lp[c] > best) {  // strict: ties keep the lowest index
      best = lp[c];
      out.index = c;
    }
  }
  return out;
}

std::string GmmModel::to_bytes() const {
  Container c;
  c.put_string("kind", "gmm");
  c.put_i64("k", static_cast<std::int64_t>(k));
  c.put_i64("dim", static_cast<std::int64_t>(dim));
  c.put_string("tap", tap);
  c.put_tensor("weights", Tensor({k}, weights));
  Tensor mu({k, dim}), var({k, dim});
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < dim; ++j) {
      mu.at2(i, j) = means[i][j];
      var.at2(i, j) = variances[i][j];
    }
  c.put_tensor("means", std::move(mu));
  c.put_tensor("variances", std::move(var));
  return c.to_bytes();
}

void GmmModel::save(const std::string& path) const {
  Container::from_bytes(to_bytes()).save(path);
}

GmmModel GmmModel::load(const std::string& path) {
  Container c = Container::load(path);
  if (!c.has("kind") || c.get_string("kind") != "gmm")
    throw data_error("not a gmm container: " + path);
  GmmModel m;
  m.k = static_cast<std::size_t>(c.get_i64("k"));
  m.dim = static_cast<std::size_t>(c.get_i64("dim"));
  m.tap = c.get_string("tap");
  m.weights = c.get_tensor("weights").data;
  const Tensor& mu = c.get_tensor("means");
  const Tensor& var = c.get_tensor("variances");
  require_shape(mu, {m.k, m.dim}, "gmm means");
  require_shape(var, {m.k, m.dim}, "gmm variances");
  m.means.assign(m.k, std::vector<double>(m.dim));
  m.variances.assign(m.k, std::vector<double>(m.dim));
  for (std::size_t i = 0; i < m.k; ++i)
    for (std::size_t j = 0; j < m.dim; ++j) {
      m.means[i][j] = mu.at2(i, j);
      m.variances[i][j] = var.at2(i, j);
    }
  return m;
}

}  // namespace tcnn
