#include <doctest.h>

#include <cmath>
#include <cstring>
#include <stdexcept>

#include "oracles.hpp"
#include "tcnn/analysis.hpp"
#include "tcnn/errors.hpp"
#include "tcnn/landmarks.hpp"
#include "tcnn/synth.hpp"
#include "tcnn/trainer.hpp"

using namespace tcnn;

namespace {

LandmarkSet lm5(std::initializer_list<std::array<double, 2>> pts) {
  LandmarkSet lm;
  lm.pts = pts;
  return lm;
}

const LandmarkSet kTruth = lm5({{0.3, 0.3}, {0.7, 0.3}, {0.5, 0.55}, {0.35, 0.75}, {0.65, 0.75}});

// Small, fast synthetic dataset for trainer tests.
std::vector<Sample> tiny_dataset(std::size_t n, std::uint64_t seed, bool constant_targets) {
  SynthConfig cfg;
  cfg.count = n;
  cfg.modes = constant_targets ? 1 : 2;
  cfg.seed = seed;
  if (constant_targets) {
    cfg.roll_sigma = cfg.scale_sigma = cfg.shift_sigma = cfg.point_jitter_sigma = 0.0;
  }
  SynthResult synth = synth_generate(cfg);

  std::vector<Tensor> crops;
  std::vector<Sample> samples;
  for (std::size_t i = 0; i < synth.images.size(); ++i) {
    const AnnotationRecord& rec = synth.records[i];
    crops.push_back(
        crop_resize(synth.images[i], rec.box_x, rec.box_y, rec.box_w, rec.box_h, kPatchSize));
    Sample s;
    s.landmarks.pts.resize(rec.landmarks_px.size());
    for (std::size_t j = 0; j < rec.landmarks_px.size(); ++j)
      s.landmarks.pts[j] = {rec.landmarks_px[j][0] / rec.box_w,
                            rec.landmarks_px[j][1] / rec.box_h};
    samples.push_back(std::move(s));
  }
  std::vector<std::size_t> all(samples.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  NormalizationStats stats = compute_stats(crops, all);
  for (std::size_t i = 0; i < samples.size(); ++i) samples[i].image = apply_stats(crops[i], stats);
  return samples;
}

NetworkModel tiny_net() {
  // Much smaller than the default stack; trainer behavior is the same.
  return NetworkModel::make({40, 40, 3},
                            {LayerSpec::conv(4, 5, 5), LayerSpec::abstanh(), LayerSpec::maxpool(),
                             LayerSpec::maxpool(), LayerSpec::conv(8, 3, 3), LayerSpec::abstanh(),
                             LayerSpec::maxpool(), LayerSpec::dense(24), LayerSpec::abstanh(),
                             LayerSpec::dense(10)});
}

}  // namespace

TEST_CASE("loss: zero iff exact match") {
  CHECK(loss(kTruth, kTruth) == 0.0);
  LandmarkSet off = kTruth;
  off.pts[2][0] += 1e-6;
  CHECK(loss(off, kTruth) > 0.0);
}

TEST_CASE("loss: nose shifted by 0.2 on 0.4 inter-ocular") {
  LandmarkSet pred = kTruth;
  pred.pts[2][0] += 0.2;
  CHECK(loss(pred, kTruth) == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("loss: all five points offset by one inter-ocular distance") {
  LandmarkSet pred = kTruth;
  for (auto& p : pred.pts) p[0] += 0.4;
  CHECK(loss(pred, kTruth) == doctest::Approx(5.0).epsilon(1e-12));
}

TEST_CASE("loss: degenerate inter-ocular distance is an error") {
  LandmarkSet truth = kTruth;
  truth.pts[1] = truth.pts[0];
  CHECK_THROWS_AS(loss(kTruth, truth), numeric_error);
}

TEST_CASE("loss matches the direct-arithmetic oracle on random pairs") {
  StreamRng rng(21, "t");
  for (int rep = 0; rep < 1000; ++rep) {
    std::vector<std::array<double, 2>> p(5), q(5);
    for (auto& v : p) v = {rng.uniform(0, 1), rng.uniform(0, 1)};
    for (auto& v : q) v = {rng.uniform(0, 1), rng.uniform(0, 1)};
    if (std::hypot(q[0][0] - q[1][0], q[0][1] - q[1][1]) < 1e-3) continue;
    LandmarkSet pred, truth;
    pred.pts = p;
    truth.pts = q;
    CHECK(std::fabs(loss(pred, truth) - oracle::loss_reference(p, q)) < 1e-12);
  }
}

TEST_CASE("loss invariances: shared translation and shared scale") {
  StreamRng rng(22, "t");
  for (int rep = 0; rep < 200; ++rep) {
    LandmarkSet pred, truth;
    pred.pts.resize(5);
    truth.pts.resize(5);
    for (std::size_t j = 0; j < 5; ++j) {
      pred.pts[j] = {rng.uniform(0, 1), rng.uniform(0, 1)};
      truth.pts[j] = {rng.uniform(0, 1), rng.uniform(0, 1)};
    }
    const double base = loss(pred, truth);

    const double tx = rng.uniform(-2, 2), ty = rng.uniform(-2, 2);
    LandmarkSet pred_t = pred, truth_t = truth;
    for (std::size_t j = 0; j < 5; ++j) {
      pred_t.pts[j][0] += tx;
      pred_t.pts[j][1] += ty;
      truth_t.pts[j][0] += tx;
      truth_t.pts[j][1] += ty;
    }
    CHECK(loss(pred_t, truth_t) == doctest::Approx(base).epsilon(1e-9));

    const double s = rng.uniform(0.1, 3.0);
    LandmarkSet pred_s = pred, truth_s = truth;
    for (std::size_t j = 0; j < 5; ++j) {
      pred_s.pts[j] = {pred.pts[j][0] * s, pred.pts[j][1] * s};
      truth_s.pts[j] = {truth.pts[j][0] * s, truth.pts[j][1] * s};
    }
    CHECK(loss(pred_s, truth_s) == doctest::Approx(base).epsilon(1e-9));
  }
}

TEST_CASE("predict: zero weights give the output bias") {
  NetworkModel net = tiny_net();
  Sample s;
  s.image = Tensor::zeros({40, 40, 3});
  s.landmarks = kTruth;
  LandmarkSet pred = predict(net, s);
  for (const auto& p : pred.pts) {
    CHECK(p[0] == 0.0);
    CHECK(p[1] == 0.0);
  }

  // Output bias set to the truth coordinates, all weights zero.
  auto flat = kTruth.to_flat();
  net.biases.back() = Tensor({flat.size()}, flat);
  LandmarkSet pred2 = predict(net, s);
  for (std::size_t j = 0; j < 5; ++j) {
    CHECK(pred2.pts[j][0] == doctest::Approx(kTruth.pts[j][0]));
    CHECK(pred2.pts[j][1] == doctest::Approx(kTruth.pts[j][1]));
  }
}

TEST_CASE("train_vanilla learns a constant-target dataset") {
  auto samples = tiny_dataset(256, 77, /*constant_targets=*/true);
  NetworkModel net = tiny_net();
  TrainConfig cfg;
  cfg.epochs_cap = 50;
  cfg.batch_size = 16;
  cfg.seed = 5;
  cfg.patience = 50;
  SplitIndices split = split_indices(samples.size(), 0.1, StreamRng(cfg.seed, "split"));
  TrainResult res = train_vanilla(net, samples, split, cfg);

  // Best snapshot never exceeds the initial validation loss.
  REQUIRE(!res.log.empty());
  CHECK(res.best_val_loss <= res.log.front().val_loss);

  double err = 0.0;
  for (std::size_t i : split.val) err += error_rate(predict(net, samples[i]), samples[i].landmarks);
  err /= static_cast<double>(split.val.size());
  CHECK(err < 1.0);  // below 1% inter-ocular
}

TEST_CASE("training with equal seeds produces identical logs") {
  auto samples = tiny_dataset(64, 99, false);
  TrainConfig cfg;
  cfg.epochs_cap = 3;
  cfg.batch_size = 16;
  cfg.seed = 11;
  SplitIndices split = split_indices(samples.size(), 0.2, StreamRng(cfg.seed, "split"));

  NetworkModel a = tiny_net(), b = tiny_net();
  TrainResult ra = train_vanilla(a, samples, split, cfg);
  TrainResult rb = train_vanilla(b, samples, split, cfg);
  REQUIRE(ra.log.size() == rb.log.size());
  for (std::size_t i = 0; i < ra.log.size(); ++i) {
    CHECK(ra.log[i].train_loss == rb.log[i].train_loss);
    CHECK(ra.log[i].val_loss == rb.log[i].val_loss);
  }
  CHECK(std::memcmp(a.weights[0].data.data(), b.weights[0].data.data(),
                    a.weights[0].numel() * sizeof(double)) == 0);
}

TEST_CASE("batch gradients and mean_loss are independent of the worker count") {
  auto samples = tiny_dataset(40, 3, false);
  TrainConfig cfg;
  cfg.epochs_cap = 2;
  cfg.batch_size = 8;
  cfg.seed = 21;
  SplitIndices split = split_indices(samples.size(), 0.2, StreamRng(cfg.seed, "split"));

  NetworkModel a = tiny_net(), b = tiny_net();
  TrainConfig cfg1 = cfg, cfg3 = cfg;
  cfg1.jobs = 1;
  cfg3.jobs = 3;
  TrainResult ra = train_vanilla(a, samples, split, cfg1);
  TrainResult rb = train_vanilla(b, samples, split, cfg3);
  REQUIRE(ra.log.size() == rb.log.size());
  for (std::size_t i = 0; i < ra.log.size(); ++i) {
    CHECK(ra.log[i].train_loss == rb.log[i].train_loss);
    CHECK(ra.log[i].val_loss == rb.log[i].val_loss);
  }

  StreamRng rng(1, "init");
  NetworkModel net = tiny_net();
  net.init_weights(rng);
  CHECK(mean_loss(net, samples, 1) == mean_loss(net, samples, 3));
}

TEST_CASE("early stopping: best snapshot minimizes validation loss over history") {
  auto samples = tiny_dataset(96, 13, false);
  NetworkModel net = tiny_net();
  TrainConfig cfg;
  cfg.epochs_cap = 12;
  cfg.batch_size = 16;
  cfg.seed = 4;
  cfg.patience = 5;
  SplitIndices split = split_indices(samples.size(), 0.2, StreamRng(cfg.seed, "split"));
  TrainResult res = train_vanilla(net, samples, split, cfg);
  for (const EpochLog& e : res.log) CHECK(res.best_val_loss <= e.val_loss);
  CHECK(res.log.back().epoch <= res.best_epoch + cfg.patience);
}

TEST_CASE("extract_features: tap dimensions and determinism") {
  NetworkModel net = NetworkModel::make_default(5);
  StreamRng rng(8, "init");
  net.init_weights(rng);
  Tensor img = oracle::random_tensor({40, 40, 3}, rng);

  auto input_feat = net.extract_features(img, "input");
  CHECK(input_feat.size() == 4800);
  for (std::size_t i = 0; i < input_feat.size(); ++i) CHECK(input_feat[i] == img.data[i]);

  auto fc5 = net.extract_features(img, "FC5");
  CHECK(fc5.size() == 256);

  // Same vector whether tapped standalone or harvested from a full pass.
  ForwardCache cache = net.forward_cache(img);
  auto from_cache = net.feature_at(cache, "FC5");
  REQUIRE(from_cache.size() == fc5.size());
  for (std::size_t i = 0; i < fc5.size(); ++i) CHECK(fc5[i] == from_cache[i]);

  CHECK_THROWS_AS(net.extract_features(img, "banana"), std::invalid_argument);
}

TEST_CASE("divergence guard aborts with a diagnostic") {
  auto samples = tiny_dataset(32, 15, false);
  NetworkModel net = tiny_net();
  TrainConfig cfg;
  cfg.epochs_cap = 2;
  cfg.batch_size = 8;
  cfg.seed = 2;
  cfg.divergence_guard = 1e-12;  // everything counts as divergence
  SplitIndices split = split_indices(samples.size(), 0.2, StreamRng(cfg.seed, "split"));
  CHECK_THROWS_AS(train_vanilla(net, samples, split, cfg), numeric_error);
}

TEST_CASE("train config validation") {
  TrainConfig cfg;
  cfg.patience = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.patience = 1;
  cfg.validation_fraction = 1.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}
