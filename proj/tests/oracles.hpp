// Independent reference implementations used only by tests. These stay
// deliberately naive (plain nested loops, direct formulas) so they cannot
// share bugs with the library code they check.
#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <vector>

#include "tcnn/rng.hpp"
#include "tcnn/tensor.hpp"

namespace oracle {

// Quadruple-nested-loop valid cross-correlation.
inline tcnn::Tensor conv_reference(const tcnn::Tensor& in, const tcnn::Tensor& k,
                                   const tcnn::Tensor& bias) {
  const std::size_t H = in.shape[0], W = in.shape[1], Cin = in.shape[2];
  const std::size_t Cout = k.shape[0], kh = k.shape[1], kw = k.shape[2];
  tcnn::Tensor out({H - kh + 1, W - kw + 1, Cout});
  for (std::size_t y = 0; y + kh <= H; ++y)
    for (std::size_t x = 0; x + kw <= W; ++x)
      for (std::size_t oc = 0; oc < Cout; ++oc) {
        double acc = bias.data[oc];
        for (std::size_t i = 0; i < kh; ++i)
          for (std::size_t j = 0; j < kw; ++j)
            for (std::size_t c = 0; c < Cin; ++c)
              acc += in.data[((y + i) * W + (x + j)) * Cin + c] *
                     k.data[((oc * kh + i) * kw + j) * Cin + c];
        out.data[(y * (W - kw + 1) + x) * Cout + oc] = acc;
      }
  return out;
}

// Nested-loop max pooling with truncated border windows.
inline tcnn::Tensor maxpool_reference(const tcnn::Tensor& in, std::size_t window,
                                      std::size_t stride) {
  const std::size_t H = in.shape[0], W = in.shape[1], C = in.shape[2];
  const std::size_t OH = (H + stride - 1) / stride, OW = (W + stride - 1) / stride;
  tcnn::Tensor out({OH, OW, C});
  for (std::size_t y = 0; y < OH; ++y)
    for (std::size_t x = 0; x < OW; ++x)
      for (std::size_t c = 0; c < C; ++c) {
        double best = -1e300;
        for (std::size_t iy = y * stride; iy < std::min(y * stride + window, H); ++iy)
          for (std::size_t ix = x * stride; ix < std::min(x * stride + window, W); ++ix)
            best = std::max(best, in.data[(iy * W + ix) * C + c]);
        out.data[(y * OW + x) * C + c] = best;
      }
  return out;
}

// Direct matrix multiply.
inline std::vector<double> dense_reference(const std::vector<double>& x,
                                           const tcnn::Tensor& w, const tcnn::Tensor& b) {
  const std::size_t m = w.shape[0], n = w.shape[1];
  std::vector<double> out(m, 0.0);
  for (std::size_t r = 0; r < m; ++r) {
    out[r] = b.data[r];
    for (std::size_t c = 0; c < n; ++c) out[r] += w.data[r * n + c] * x[c];
  }
  return out;
}

// Scalar Adam with explicit bias correction.
struct ScalarAdam {
  double lr, b1, b2, eps;
  double m = 0, v = 0;
  std::size_t t = 0;
  double step(double x, double g) {
    ++t;
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    const double mh = m / (1 - std::pow(b1, static_cast<double>(t)));
    const double vh = v / (1 - std::pow(b2, static_cast<double>(t)));
    return x - lr * mh / (std::sqrt(vh) + eps);
  }
};

// Direct-arithmetic squared-L2 loss normalized by squared inter-ocular.
inline double loss_reference(const std::vector<std::array<double, 2>>& pred,
                             const std::vector<std::array<double, 2>>& truth) {
  double num = 0.0;
  for (std::size_t j = 0; j < truth.size(); ++j) {
    num += (pred[j][0] - truth[j][0]) * (pred[j][0] - truth[j][0]);
    num += (pred[j][1] - truth[j][1]) * (pred[j][1] - truth[j][1]);
  }
  const double ex = truth[0][0] - truth[1][0], ey = truth[0][1] - truth[1][1];
  return num / (ex * ex + ey * ey);
}

// Mean point distance as percent of inter-ocular.
inline double error_rate_reference(const std::vector<std::array<double, 2>>& pred,
                                   const std::vector<std::array<double, 2>>& truth) {
  double mean = 0.0;
  for (std::size_t j = 0; j < truth.size(); ++j)
    mean += std::hypot(pred[j][0] - truth[j][0], pred[j][1] - truth[j][1]);
  mean /= static_cast<double>(truth.size());
  const double iod = std::hypot(truth[0][0] - truth[1][0], truth[0][1] - truth[1][1]);
  return 100.0 * mean / iod;
}

inline tcnn::Tensor random_tensor(std::vector<std::size_t> shape, tcnn::StreamRng& rng,
                                  double lo = -1.0, double hi = 1.0) {
  tcnn::Tensor t(std::move(shape));
  for (double& v : t.data) v = rng.uniform(lo, hi);
  return t;
}

}  // namespace oracle
