#include <doctest.h>

#include <cmath>
#include <cstring>
#include <stdexcept>

#include "oracles.hpp"
#include "tcnn/adam.hpp"
#include "tcnn/layers.hpp"
#include "tcnn/network.hpp"

using namespace tcnn;

namespace {

double rel_err(double a, double b) {
  return std::fabs(a - b) / std::max({std::fabs(a), std::fabs(b), 1e-6});
}

// Central finite differences of L = sum(w .* output) against the analytic
// backward pass. A coordinate is skipped when its +-h passes straddle a
// nondifferentiable point: an abstanh pre-activation below the floor whose
// sign flips, or a pooling argmax that switches winners.
struct FdReport {
  std::size_t checked = 0, skipped = 0;
  double worst = 0.0;
};

struct FdProbe {
  double loss = 0.0;
  ForwardCache cache;
};

FdReport check_gradients(NetworkModel& net, const Tensor& input, StreamRng& rng,
                         std::size_t max_coords_per_tensor = 0, double h = 1e-5,
                         double preact_floor = 1e-3) {
  ForwardCache cache = net.forward_cache(input);
  Tensor w({cache.output.numel()});
  for (double& v : w.data) v = rng.uniform(-1.0, 1.0);

  Tensor dinput;
  Gradients grads = net.backward(cache, w, &dinput);

  auto probe = [&](const Tensor& x) {
    FdProbe p;
    p.cache = net.forward_cache(x);
    for (std::size_t i = 0; i < w.data.size(); ++i) p.loss += w.data[i] * p.cache.output.data[i];
    return p;
  };
  auto crosses_kink = [&](const FdProbe& a, const FdProbe& b) {
    if (a.cache.pool_args != b.cache.pool_args) return true;
    for (std::size_t li = 0; li < net.layers.size(); ++li) {
      if (net.layers[li].kind != LayerKind::abstanh) continue;
      const auto& za = a.cache.inputs[li].data;
      const auto& zb = b.cache.inputs[li].data;
      for (std::size_t i = 0; i < za.size(); ++i) {
        if ((za[i] > 0) != (zb[i] > 0) &&
            std::min(std::fabs(za[i]), std::fabs(zb[i])) < preact_floor)
          return true;
      }
    }
    return false;
  };

  FdReport rep;
  auto check_coord = [&](double* slot, double analytic) {
    const double saved = *slot;
    *slot = saved + h;
    FdProbe plus = probe(input);
    *slot = saved - h;
    FdProbe minus = probe(input);
    *slot = saved;
    if (crosses_kink(plus, minus)) {
      ++rep.skipped;
      return;
    }
    const double fd = (plus.loss - minus.loss) / (2 * h);
    rep.worst = std::max(rep.worst, rel_err(fd, analytic));
    ++rep.checked;
  };

  auto check_tensor = [&](Tensor& param, const Tensor& analytic) {
    if (max_coords_per_tensor == 0 || param.data.size() <= max_coords_per_tensor) {
      for (std::size_t i = 0; i < param.data.size(); ++i)
        check_coord(&param.data[i], analytic.data[i]);
    } else {
      for (std::size_t t = 0; t < max_coords_per_tensor; ++t) {
        const std::size_t i = rng.below(param.data.size());
        check_coord(&param.data[i], analytic.data[i]);
      }
    }
  };

  for (std::size_t li = 0; li < net.layers.size(); ++li) {
    if (!net.layers[li].has_params()) continue;
    check_tensor(net.weights[li], grads.weights[li]);
    check_tensor(net.biases[li], grads.biases[li]);
  }

  // A few input coordinates too. The probe reads `input` through the model,
  // so perturb a mutable copy and probe that.
  Tensor input_copy = input;
  auto probe_input = [&](const Tensor& x) { return probe(x); };
  for (std::size_t t = 0; t < std::min<std::size_t>(16, input_copy.data.size()); ++t) {
    const std::size_t i = rng.below(input_copy.data.size());
    const double saved = input_copy.data[i];
    input_copy.data[i] = saved + h;
    FdProbe plus = probe_input(input_copy);
    input_copy.data[i] = saved - h;
    FdProbe minus = probe_input(input_copy);
    input_copy.data[i] = saved;
    if (crosses_kink(plus, minus)) {
      ++rep.skipped;
      continue;
    }
    rep.worst = std::max(rep.worst, rel_err((plus.loss - minus.loss) / (2 * h), dinput.data[i]));
    ++rep.checked;
  }
  return rep;
}

}  // namespace

TEST_CASE("conv identity kernel") {
  StreamRng rng(1, "t");
  Tensor in = oracle::random_tensor({5, 6, 1}, rng);
  Tensor k({1, 1, 1, 1});
  k.data[0] = 1.0;
  Tensor bias({1});
  Tensor out = conv_forward(in, k, bias);
  REQUIRE(out.shape == in.shape);
  for (std::size_t i = 0; i < in.data.size(); ++i) CHECK(out.data[i] == doctest::Approx(in.data[i]));
}

TEST_CASE("conv constant input, all-ones 3x3 kernel") {
  Tensor in = Tensor::full({6, 6, 1}, 2.0);
  Tensor k = Tensor::full({1, 3, 3, 1}, 1.0);
  Tensor bias({1});
  Tensor out = conv_forward(in, k, bias);
  REQUIRE(out.shape == std::vector<std::size_t>{4, 4, 1});
  for (double v : out.data) CHECK(v == doctest::Approx(18.0).epsilon(1e-12));
}

TEST_CASE("conv matches nested-loop reference") {
  StreamRng rng(2, "t");
  Tensor in = oracle::random_tensor({6, 6, 2}, rng);
  Tensor k = oracle::random_tensor({3, 3, 3, 2}, rng);
  Tensor bias = oracle::random_tensor({3}, rng);
  Tensor out = conv_forward(in, k, bias);
  Tensor ref = oracle::conv_reference(in, k, bias);
  REQUIRE(out.shape == ref.shape);
  for (std::size_t i = 0; i < out.data.size(); ++i)
    CHECK(std::fabs(out.data[i] - ref.data[i]) < 1e-12);
}

TEST_CASE("conv rejects mismatched shapes") {
  Tensor in({4, 4, 2});
  Tensor k({1, 3, 3, 3});  // wrong Cin
  Tensor bias({1});
  CHECK_THROWS_AS(conv_forward(in, k, bias), std::invalid_argument);
  Tensor small({2, 2, 3});
  Tensor k2({1, 3, 3, 3});
  CHECK_THROWS_AS(conv_forward(small, k2, bias), std::invalid_argument);
}

TEST_CASE("maxpool constant input") {
  Tensor in = Tensor::full({4, 4, 2}, 3.5);
  PoolResult res = maxpool_forward(in, 2, 2);
  for (double v : res.output.data) CHECK(v == 3.5);
}

TEST_CASE("maxpool 2x2 basic") {
  Tensor in({2, 2, 1}, {1, 2, 3, 4});
  PoolResult res = maxpool_forward(in, 2, 2);
  REQUIRE(res.output.numel() == 1);
  CHECK(res.output.data[0] == 4);
  CHECK(res.argmax[0] == 3);  // bottom-right
}

TEST_CASE("maxpool matches nested-loop reference") {
  StreamRng rng(3, "t");
  Tensor in = oracle::random_tensor({8, 8, 3}, rng);
  PoolResult res = maxpool_forward(in, 2, 2);
  Tensor ref = oracle::maxpool_reference(in, 2, 2);
  REQUIRE(res.output.shape == ref.shape);
  for (std::size_t i = 0; i < ref.data.size(); ++i) CHECK(res.output.data[i] == ref.data[i]);
}

TEST_CASE("maxpool odd extents truncate the last window") {
  StreamRng rng(4, "t");
  Tensor in = oracle::random_tensor({5, 7, 2}, rng);
  PoolResult res = maxpool_forward(in, 2, 2);
  CHECK(res.output.shape == std::vector<std::size_t>{3, 4, 2});
  Tensor ref = oracle::maxpool_reference(in, 2, 2);
  for (std::size_t i = 0; i < ref.data.size(); ++i) CHECK(res.output.data[i] == ref.data[i]);
}

TEST_CASE("maxpool backward routes gradient only to winners") {
  StreamRng rng(5, "t");
  Tensor in = oracle::random_tensor({6, 6, 2}, rng);
  PoolResult res = maxpool_forward(in, 2, 2);
  Tensor up = oracle::random_tensor(res.output.shape, rng);
  Tensor din = maxpool_backward(in.shape, res.argmax, up);
  double up_sum = 0, din_sum = 0;
  for (double v : up.data) up_sum += v;
  for (double v : din.data) din_sum += v;
  CHECK(din_sum == doctest::Approx(up_sum).epsilon(1e-12));
  std::size_t nonzero = 0;
  for (double v : din.data) nonzero += v != 0.0;
  CHECK(nonzero <= res.argmax.size());
}

TEST_CASE("abstanh values") {
  Tensor in({3}, {0.0, 1.0, -1.0});
  Tensor out = abstanh_forward(in);
  CHECK(out.data[0] == 0.0);
  CHECK(out.data[1] == doctest::Approx(0.7615941559557649).epsilon(1e-12));
  CHECK(out.data[2] == doctest::Approx(0.7615941559557649).epsilon(1e-12));  // even
}

TEST_CASE("abstanh is even and its subgradient at zero is zero") {
  StreamRng rng(6, "t");
  for (int i = 0; i < 50; ++i) {
    const double x = rng.uniform(-3.0, 3.0);
    Tensor a({1}, {x}), b({1}, {-x});
    CHECK(abstanh_forward(a).data[0] == doctest::Approx(abstanh_forward(b).data[0]));
  }
  Tensor zero({1}, {0.0});
  Tensor up({1}, {1.0});
  CHECK(abstanh_backward(zero, up).data[0] == 0.0);
}

TEST_CASE("dense identity and bias") {
  Tensor x({3}, {1.0, 2.0, 3.0});
  Tensor eye({3, 3});
  for (std::size_t i = 0; i < 3; ++i) eye.at2(i, i) = 1.0;
  Tensor zero_b({3});
  Tensor out = dense_forward(x, eye, zero_b);
  for (std::size_t i = 0; i < 3; ++i) CHECK(out.data[i] == x.data[i]);

  Tensor zero_w({2, 3});
  Tensor b({2}, {5.0, -1.0});
  Tensor out2 = dense_forward(x, zero_w, b);
  CHECK(out2.data[0] == 5.0);
  CHECK(out2.data[1] == -1.0);
}

TEST_CASE("dense matches direct multiply") {
  StreamRng rng(7, "t");
  Tensor x = oracle::random_tensor({4}, rng);
  Tensor w = oracle::random_tensor({3, 4}, rng);
  Tensor b = oracle::random_tensor({3}, rng);
  Tensor out = dense_forward(x, w, b);
  auto ref = oracle::dense_reference(x.data, w, b);
  for (std::size_t i = 0; i < 3; ++i) CHECK(std::fabs(out.data[i] - ref[i]) < 1e-12);
}

TEST_CASE("dense shape mismatch is rejected") {
  Tensor x({4});
  Tensor w({3, 5});
  Tensor b({3});
  CHECK_THROWS_AS(dense_forward(x, w, b), std::invalid_argument);
}

TEST_CASE("backward: zero upstream gradient gives zero gradients") {
  StreamRng rng(8, "t");
  NetworkModel net = NetworkModel::make({8, 8, 2},
                                        {LayerSpec::conv(3, 3, 3), LayerSpec::abstanh(),
                                         LayerSpec::maxpool(), LayerSpec::dense(4)});
  net.init_weights(rng);
  Tensor in = oracle::random_tensor({8, 8, 2}, rng);
  ForwardCache cache = net.forward_cache(in);
  Tensor dout = Tensor::zeros({cache.output.numel()});
  Gradients g = net.backward(cache, dout);
  for (std::size_t li = 0; li < net.layers.size(); ++li) {
    for (double v : g.weights[li].data) CHECK(v == 0.0);
    for (double v : g.biases[li].data) CHECK(v == 0.0);
  }
}

TEST_CASE("backward: single dense layer, L = sum(output)") {
  StreamRng rng(9, "t");
  NetworkModel net = NetworkModel::make({4}, {LayerSpec::dense(3)});
  net.init_weights(rng);
  Tensor in = oracle::random_tensor({4}, rng);
  ForwardCache cache = net.forward_cache(in);
  Tensor ones = Tensor::full({3}, 1.0);
  Gradients g = net.backward(cache, ones);
  // dL/dW = outer(1, input)
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t c = 0; c < 4; ++c)
      CHECK(g.weights[0].at2(r, c) == doctest::Approx(in.data[c]).epsilon(1e-12));
  for (double v : g.biases[0].data) CHECK(v == doctest::Approx(1.0));
}

TEST_CASE("backward requires a matching forward cache") {
  StreamRng rng(10, "t");
  NetworkModel net = NetworkModel::make({4}, {LayerSpec::dense(3)});
  net.init_weights(rng);
  ForwardCache empty;
  Tensor dout({3});
  CHECK_THROWS_AS(net.backward(empty, dout), std::invalid_argument);
}

TEST_CASE("gradient check: every layer kind on small random instances") {
  StreamRng rng(11, "t");
  FdReport total;
  for (int rep = 0; rep < 8; ++rep) {
    NetworkModel conv_net = NetworkModel::make(
        {6, 6, 2}, {LayerSpec::conv(3, 3, 3), LayerSpec::abstanh(), LayerSpec::dense(4)});
    conv_net.init_weights(rng);
    Tensor in = oracle::random_tensor({6, 6, 2}, rng);
    FdReport r = check_gradients(conv_net, in, rng);
    CHECK(r.worst < 1e-4);
    total.checked += r.checked;

    NetworkModel pool_net = NetworkModel::make(
        {6, 6, 2}, {LayerSpec::conv(2, 3, 3), LayerSpec::maxpool(), LayerSpec::abstanh(),
                    LayerSpec::dense(3)});
    pool_net.init_weights(rng);
    Tensor in2 = oracle::random_tensor({6, 6, 2}, rng);
    FdReport r2 = check_gradients(pool_net, in2, rng);
    CHECK(r2.worst < 1e-4);
    total.checked += r2.checked;
  }
  CHECK(total.checked > 500);
}

TEST_CASE("gradient check: full default stack, sampled coordinates") {
  StreamRng rng(12, "t");
  NetworkModel net = NetworkModel::make_default(5);
  net.init_weights(rng);
  Tensor in = oracle::random_tensor({40, 40, 3}, rng);
  FdReport r = check_gradients(net, in, rng, /*max_coords_per_tensor=*/8);
  CHECK(r.checked > 50);
  CHECK(r.worst < 1e-4);
}

TEST_CASE("adam: zero gradient leaves parameters unchanged") {
  Tensor p({3}, {1.0, -2.0, 3.0});
  Tensor g = Tensor::zeros({3});
  std::vector<Tensor*> params{&p};
  std::vector<const Tensor*> grads{&g};
  AdamState st = AdamState::init({&p}, {});
  adam_step(params, grads, st);
  CHECK(p.data[0] == 1.0);
  CHECK(p.data[1] == -2.0);
  CHECK(p.data[2] == 3.0);
  CHECK(st.step == 1);
}

TEST_CASE("adam: one step with constant gradient") {
  AdamParams hp;
  Tensor p({1}, {0.5});
  const double g = 0.3;
  Tensor gt({1}, {g});
  std::vector<Tensor*> params{&p};
  std::vector<const Tensor*> grads{&gt};
  AdamState st = AdamState::init({&p}, hp);
  adam_step(params, grads, st);
  // bias-corrected moments reduce to mhat = g, vhat = g^2
  const double expected = 0.5 - hp.lr * g / (std::fabs(g) + hp.eps);
  CHECK(p.data[0] == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("adam: three scalar steps match the scalar oracle") {
  AdamParams hp;
  oracle::ScalarAdam ref{hp.lr, hp.beta1, hp.beta2, hp.eps};
  Tensor p({1}, {1.0});
  double x = 1.0;
  std::vector<Tensor*> params{&p};
  AdamState st = AdamState::init({&p}, hp);
  for (double g : {1.0, -1.0, 1.0}) {
    Tensor gt({1}, {g});
    std::vector<const Tensor*> grads{&gt};
    adam_step(params, grads, st);
    x = ref.step(x, g);
    CHECK(std::fabs(p.data[0] - x) < 1e-12);
  }
}

TEST_CASE("forward determinism is bit-exact") {
  StreamRng rng(13, "t");
  NetworkModel net = NetworkModel::make_default(5);
  net.init_weights(rng);
  Tensor in = oracle::random_tensor({40, 40, 3}, rng);
  Tensor a = net.forward(in);
  Tensor b = net.forward(in);
  REQUIRE(a.numel() == b.numel());
  CHECK(std::memcmp(a.data.data(), b.data.data(), a.numel() * sizeof(double)) == 0);
}

TEST_CASE("default stack shape chain ends in a 256-wide dense input") {
  NetworkModel net = NetworkModel::make_default(5);
  CHECK(net.tap_dim("FC5") == 256);
  CHECK(net.tap_dim("input") == 40 * 40 * 3);
  CHECK(net.tap_dim("CL1") == 40 * 40 * 3);
  CHECK(net.tap_dim("CL2") == 18 * 18 * 16);
  CHECK(net.tap_dim("CL3") == 8 * 8 * 48);
  CHECK(net.tap_dim("CL4") == 3 * 3 * 64);
  CHECK(net.forward(Tensor::zeros({40, 40, 3})).numel() == 10);
  CHECK_THROWS_AS(net.tap_dim("FC9"), std::invalid_argument);
}

TEST_CASE("layer spec round-trips through strings") {
  NetworkModel net = NetworkModel::make_default(5);
  const std::string s = stack_to_string(net.layers);
  auto back = stack_from_string(s);
  REQUIRE(back.size() == net.layers.size());
  CHECK(stack_to_string(back) == s);
}
