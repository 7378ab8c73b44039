#include "tcnn/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace tcnn {

AdamState AdamState::init(const std::vector<const Tensor*>& params, AdamParams hp) {
  AdamState s;
  s.hp = hp;
  s.m.reserve(params.size());
  s.v.reserve(params.size());
  for (const Tensor* p : params) {
    s.m.push_back(Tensor::zeros(p->shape));
    s.v.push_back(Tensor::zeros(p->shape));
  }
  return s;
}

void adam_step(const std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads,
               AdamState& state) {
  if (params.size() != grads.size() || params.size() != state.m.size())
    throw std::invalid_argument("adam_step: parameter/gradient/state count mismatch");

  state.step += 1;
  const AdamParams& hp = state.hp;
  const double bc1 = 1.0 - std::pow(hp.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(hp.beta2, static_cast<double>(state.step));

  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i];
    const Tensor& g = *grads[i];
    if (!p.same_shape(g) || !p.same_shape(state.m[i]))
      throw std::invalid_argument("adam_step: shape mismatch at parameter " + std::to_string(i));
    double* m = state.m[i].data.data();
    double* v = state.v[i].data.data();
    double* pd = p.data.data();
    const double* gd = g.data.data();
    for (std::size_t j = 0; j < p.data.size(); ++j) {
      m[j] = hp.beta1 * m[j] + (1.0 - hp.beta1) * gd[j];
      v[j] = hp.beta2 * v[j] + (1.0 - hp.beta2) * gd[j] * gd[j];
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      pd[j] -= hp.lr * mhat / (std::sqrt(vhat) + hp.eps);
    }
  }
}

}  // namespace tcnn
