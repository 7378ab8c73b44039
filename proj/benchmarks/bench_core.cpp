#include <benchmark/benchmark.h>

#include "tcnn/augment.hpp"
#include "tcnn/gmm.hpp"
#include "tcnn/landmarks.hpp"
#include "tcnn/network.hpp"
#include "tcnn/rng.hpp"

namespace {

tcnn::Tensor random_patch(tcnn::StreamRng& rng) {
  tcnn::Tensor t({40, 40, 3});
  for (double& v : t.data) v = rng.uniform(-1.0, 1.0);
  return t;
}

void BM_forward_default(benchmark::State& state) {
  tcnn::StreamRng rng(1, "bench");
  tcnn::NetworkModel net = tcnn::NetworkModel::make_default(5);
  net.init_weights(rng);
  tcnn::Tensor in = random_patch(rng);
  for (auto _ : state) benchmark::DoNotOptimize(net.forward(in));
}
BENCHMARK(BM_forward_default);

void BM_forward_backward_default(benchmark::State& state) {
  tcnn::StreamRng rng(2, "bench");
  tcnn::NetworkModel net = tcnn::NetworkModel::make_default(5);
  net.init_weights(rng);
  tcnn::Tensor in = random_patch(rng);
  tcnn::Tensor dout = tcnn::Tensor::full({10}, 0.1);
  for (auto _ : state) {
    tcnn::ForwardCache cache = net.forward_cache(in);
    benchmark::DoNotOptimize(net.backward(cache, dout));
  }
}
BENCHMARK(BM_forward_backward_default);

void BM_gmm_estep_fc5_scale(benchmark::State& state) {
  tcnn::StreamRng rng(3, "bench");
  const std::size_t n = 512, d = 256, k = 8;
  tcnn::FeatureMatrix x(n, d);
  for (double& v : x.data) v = rng.normal();
  for (auto _ : state) {
    tcnn::GmmFitOptions opts;
    opts.max_iters = 2;
    benchmark::DoNotOptimize(tcnn::gmm_fit(x, k, tcnn::StreamRng(1, "bench-fit"), opts));
  }
}
BENCHMARK(BM_gmm_estep_fc5_scale);

void BM_warp_image(benchmark::State& state) {
  tcnn::StreamRng rng(4, "bench");
  tcnn::Tensor img = random_patch(rng);
  tcnn::SimilarityTransform h = tcnn::SimilarityTransform::from_parts(1.05, 0.1, 1.5, -0.5);
  for (auto _ : state) benchmark::DoNotOptimize(tcnn::warp_image(img, h));
}
BENCHMARK(BM_warp_image);

}  // namespace

BENCHMARK_MAIN();
