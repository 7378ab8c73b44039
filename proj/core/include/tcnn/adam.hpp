#pragma once

#include <cstddef>
#include <vector>

#include "tcnn/tensor.hpp"

namespace tcnn {

struct AdamParams {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Per-parameter first/second moment accumulators plus the shared step count.
struct AdamState {
  std::size_t step = 0;
  std::vector<Tensor> m, v;
  AdamParams hp;

  static AdamState init(const std::vector<const Tensor*>& params, AdamParams hp);
};

/// One Adam update with bias correction. params, grads and state accumulators
/// must agree elementwise in shape.
void adam_step(const std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads,
               AdamState& state);

}  // namespace tcnn
