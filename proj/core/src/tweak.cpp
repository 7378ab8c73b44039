#include "tcnn/tweak.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "tcnn/errors.hpp"
#include "tcnn/landmarks.hpp"
#include "tcnn/layers.hpp"
#include "tcnn/parallel.hpp"
#include "tcnn/serialize.hpp"

namespace tcnn {

namespace {

constexpr const char* kTap = "FC5";

// Indices of the two dense layers in the trunk stack.
std::pair<std::size_t, std::size_t> dense_indices(const NetworkModel& net) {
  std::vector<std::size_t> dense;
  for (std::size_t i = 0; i < net.layers.size(); ++i)
    if (net.layers[i].kind == LayerKind::dense) dense.push_back(i);
  if (dense.size() != 2)
    throw std::invalid_argument("tweak: expected exactly two dense layers in the trunk");
  return {dense[0], dense[1]};
}

TweakHead head_from_network(const NetworkModel& net) {
  auto [d1, d2] = dense_indices(net);
  TweakHead h;
  h.fc5_w = net.weights[d1];
  h.fc5_b = net.biases[d1];
  h.fc6_w = net.weights[d2];
  h.fc6_b = net.biases[d2];
  return h;
}

Tensor head_forward(const TweakHead& h, const std::vector<double>& feature) {
  Tensor x({feature.size()}, feature);
  Tensor hid = abstanh_forward(dense_forward(x, h.fc5_w, h.fc5_b));
  return dense_forward(hid, h.fc6_w, h.fc6_b);
}

double head_loss(const TweakHead& h, const std::vector<double>& feature,
                 const LandmarkSet& truth) {
  return loss(LandmarkSet::from_flat(head_forward(h, feature).data), truth);
}

double head_mean_loss(const TweakHead& h, const FeatureMatrix& features,
                      const std::vector<LandmarkSet>& truths) {
  double acc = 0.0;
  std::vector<double> row(features.d);
  for (std::size_t i = 0; i < features.n; ++i) {
    auto r = features.row(i);
    row.assign(r.begin(), r.end());
    acc += head_loss(h, row, truths[i]);
  }
  return acc / static_cast<double>(features.n);
}

}  // namespace

FeatureMatrix extract_feature_matrix(const NetworkModel& model,
                                     const std::vector<Sample>& samples, const std::string& tap,
                                     unsigned jobs) {
  FeatureMatrix out(samples.size(), model.tap_dim(tap));
  parallel_chunks(samples.size(), 32, jobs, [&](std::size_t, std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      const auto f = model.extract_features(samples[i].image, tap);
      std::copy(f.begin(), f.end(), out.row(i).begin());
    }
  });
  return out;
}

TweakHead train_single_head(const TweakHead& init, const FeatureMatrix& train_features,
                            const std::vector<LandmarkSet>& train_truths,
                            const FeatureMatrix& val_features,
                            const std::vector<LandmarkSet>& val_truths, const TweakConfig& cfg,
                            std::uint64_t shuffle_seed) {
  TweakHead head = init;
  TweakHead best = init;

  AdamParams hp = cfg.adam;
  hp.lr *= cfg.lr_scale;
  std::vector<Tensor*> params{&head.fc5_w, &head.fc5_b, &head.fc6_w, &head.fc6_b};
  std::vector<const Tensor*> cparams{&head.fc5_w, &head.fc5_b, &head.fc6_w, &head.fc6_b};
  AdamState adam = AdamState::init(cparams, hp);

  StreamRng shuffle_rng(shuffle_seed, "head-batches");
  std::vector<std::size_t> order(train_features.n);
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  TrainResult log;
  log.best_val_loss = head_mean_loss(head, val_features, val_truths);
  log.best_epoch = 0;

  Tensor g5w, g5b, g6w, g6b;                    // per-sample scratch
  Tensor a5w, a5b, a6w, a6b, dhid, dfeat;       // batch accumulators
  std::vector<double> row(train_features.d);

  for (std::size_t epoch = 1; epoch <= cfg.epochs_cap; ++epoch) {
    if (epoch - log.best_epoch > cfg.patience) break;

    shuffle_rng.shuffle(order);
    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t off = 0; off < order.size(); off += cfg.batch_size) {
      const std::size_t end = std::min(off + cfg.batch_size, order.size());
      a5w = Tensor::zeros(head.fc5_w.shape);
      a5b = Tensor::zeros(head.fc5_b.shape);
      a6w = Tensor::zeros(head.fc6_w.shape);
      a6b = Tensor::zeros(head.fc6_b.shape);
      double batch_loss = 0.0;
      for (std::size_t bi = off; bi < end; ++bi) {
        const std::size_t i = order[bi];
        auto r = train_features.row(i);
        row.assign(r.begin(), r.end());
        Tensor x({row.size()}, row);
        Tensor pre = dense_forward(x, head.fc5_w, head.fc5_b);
        Tensor hid = abstanh_forward(pre);
        Tensor out = dense_forward(hid, head.fc6_w, head.fc6_b);
        LandmarkSet pred = LandmarkSet::from_flat(out.data);
        batch_loss += loss(pred, train_truths[i]);

        Tensor dout({out.numel()}, loss_gradient(pred, train_truths[i]));
        dense_backward(hid, head.fc6_w, dout, dhid, g6w, g6b);
        Tensor dpre = abstanh_backward(pre, dhid);
        dense_backward(x, head.fc5_w, dpre, dfeat, g5w, g5b);
        for (std::size_t j = 0; j < a5w.data.size(); ++j) a5w.data[j] += g5w.data[j];
        for (std::size_t j = 0; j < a5b.data.size(); ++j) a5b.data[j] += g5b.data[j];
        for (std::size_t j = 0; j < a6w.data.size(); ++j) a6w.data[j] += g6w.data[j];
        for (std::size_t j = 0; j < a6b.data.size(); ++j) a6b.data[j] += g6b.data[j];
      }
      const double inv = 1.0 / static_cast<double>(end - off);
      for (Tensor* t : {&a5w, &a5b, &a6w, &a6b})
        for (double& v : t->data) v *= inv;
      batch_loss *= inv;
      if (!std::isfinite(batch_loss) || batch_loss > cfg.divergence_guard)
        throw numeric_error("head fine-tuning diverged: batch loss " + std::to_string(batch_loss));
      epoch_loss += batch_loss;
      ++batches;

      std::vector<const Tensor*> grads{&a5w, &a5b, &a6w, &a6b};
      adam_step(params, grads, adam);
    }

    const double val_loss = head_mean_loss(head, val_features, val_truths);
    log.log.push_back({epoch, epoch_loss / static_cast<double>(batches), val_loss, 0.0});
    if (val_loss < log.best_val_loss) {
      log.best_val_loss = val_loss;
      log.best_epoch = epoch;
      best.fc5_w = head.fc5_w;
      best.fc5_b = head.fc5_b;
      best.fc6_w = head.fc6_w;
      best.fc6_b = head.fc6_b;
    }
  }

  best.log = std::move(log);
  return best;
}

TweakedModel build_tweaked(const NetworkModel& vanilla, const std::vector<Sample>& train_set,
                           std::size_t k, const TweakConfig& cfg, const GmmModel* router,
                           BuildReport* report, const FeatureMatrix* cached_features) {
  if (k < 1) throw std::invalid_argument("tweak: k must be >= 1");
  if (train_set.empty()) throw data_error("tweak: empty training set");

  TweakedModel model;
  model.trunk = vanilla;

  StreamRng root(cfg.seed, "tweak");

  FeatureMatrix features;
  const FeatureMatrix* feat = cached_features;
  if (!feat) {
    features = extract_feature_matrix(vanilla, train_set, kTap, cfg.jobs);
    feat = &features;
  }

  if (router) {
    model.router = *router;
  } else {
    GmmFitOptions fit_opts;
    fit_opts.jobs = cfg.jobs;
    model.router = gmm_fit(*feat, k, StreamRng(cfg.seed, "cluster"), fit_opts).model;
    model.router.tap = kTap;
  }
  if (model.router.k != k) throw data_error("tweak: router component count does not match k");

  // Assign every training sample with the frozen router.
  std::vector<std::size_t> assignment(train_set.size());
  for (std::size_t i = 0; i < train_set.size(); ++i)
    assignment[i] = gmm_assign(model.router, feat->row(i)).index;

  if (report) report->clusters.assign(k, {});
  model.heads.reserve(k);

  const TweakHead vanilla_head = head_from_network(vanilla);

  for (std::size_t c = 0; c < k; ++c) {
    StreamRng crng = root.substream(c);
    std::vector<std::size_t> member_idx;
    for (std::size_t i = 0; i < train_set.size(); ++i)
      if (assignment[i] == c) member_idx.push_back(i);

    ClusterBuildInfo info;
    info.members = member_idx.size();

    // Per-cluster 90/10 split for early stopping.
    std::size_t val_count = static_cast<std::size_t>(
        std::floor(cfg.validation_fraction * static_cast<double>(member_idx.size())));
    if (member_idx.size() < 2 || val_count < 2) {
      TweakHead h = vanilla_head;
      h.fallback = true;
      h.member_count = member_idx.size();
      info.fallback = true;
      model.heads.push_back(std::move(h));
      if (report) (*report).clusters[c] = info;
      continue;
    }

    std::vector<std::size_t> shuffled = member_idx;
    crng.substream("split").shuffle(shuffled);
    std::vector<std::size_t> val_idx(shuffled.begin(),
                                     shuffled.begin() + static_cast<std::ptrdiff_t>(val_count));
    std::vector<std::size_t> train_idx(shuffled.begin() + static_cast<std::ptrdiff_t>(val_count),
                                       shuffled.end());
    info.train_count = train_idx.size();
    info.val_count = val_idx.size();

    // Optional alignment-sensitive augmentation of the training portion.
    std::vector<Sample> head_train;
    head_train.reserve(train_idx.size());
    for (std::size_t i : train_idx) head_train.push_back(train_set[i]);
    std::size_t augmented = 0;
    if (cfg.augment && head_train.size() >= 2 && head_train.size() < cfg.augment_target) {
      AugmentResult aug = augment_cluster(head_train, model.router, model.trunk, c,
                                          cfg.augment_target,
                                          cfg.retry_factor * cfg.augment_target,
                                          crng.substream("augment"));
      info.augment_stats = aug.stats;
      augmented = aug.generated.size();
      for (auto& s : aug.generated) head_train.push_back(std::move(s));
    }

    // Features for the head's training data; originals come from the cache.
    FeatureMatrix tf(head_train.size(), feat->d);
    std::vector<LandmarkSet> tt(head_train.size());
    for (std::size_t i = 0; i < train_idx.size(); ++i) {
      auto src = feat->row(train_idx[i]);
      std::copy(src.begin(), src.end(), tf.row(i).begin());
      tt[i] = head_train[i].landmarks;
    }
    if (augmented > 0) {
      std::vector<Sample> aug_samples(head_train.begin() + static_cast<std::ptrdiff_t>(train_idx.size()),
                                      head_train.end());
      FeatureMatrix af = extract_feature_matrix(model.trunk, aug_samples, kTap, cfg.jobs);
      for (std::size_t i = 0; i < aug_samples.size(); ++i) {
        auto src = af.row(i);
        std::copy(src.begin(), src.end(), tf.row(train_idx.size() + i).begin());
        tt[train_idx.size() + i] = aug_samples[i].landmarks;
      }
    }

    FeatureMatrix vf(val_idx.size(), feat->d);
    std::vector<LandmarkSet> vt(val_idx.size());
    for (std::size_t i = 0; i < val_idx.size(); ++i) {
      auto src = feat->row(val_idx[i]);
      std::copy(src.begin(), src.end(), vf.row(i).begin());
      vt[i] = train_set[val_idx[i]].landmarks;
    }

    info.vanilla_val_loss = head_mean_loss(vanilla_head, vf, vt);
    TweakHead head = train_single_head(vanilla_head, tf, tt, vf, vt, cfg,
                                       crng.substream("batches").next_u64());
    head.member_count = member_idx.size();
    head.augmented_count = augmented;
    info.tweaked_val_loss = head.log.best_val_loss;
    info.best_epoch = head.log.best_epoch;
    info.epochs_trained = head.log.log.size();

    // Cross-cluster probe: how often candidates built from other clusters'
    // images pass this cluster's routing test.
    if (cfg.cross_probe_attempts > 0 && cfg.augment) {
      std::vector<Sample> outsiders;
      for (std::size_t i = 0; i < train_set.size(); ++i)
        if (assignment[i] != c) outsiders.push_back(train_set[i]);
      if (!outsiders.empty() && !head_train.empty()) {
        std::vector<Sample> members_only;
        for (std::size_t i : train_idx) members_only.push_back(train_set[i]);
        info.cross_stats = cross_cluster_rejection_probe(
            members_only, outsiders, model.router, model.trunk, c, cfg.cross_probe_attempts,
            crng.substream("cross"));
      }
    }

    model.heads.push_back(std::move(head));
    if (report) (*report).clusters[c] = info;
  }
  return model;
}

std::size_t route(const TweakedModel& model, const Sample& sample) {
  const auto feature = model.trunk.extract_features(sample.image, model.router.tap);
  return gmm_assign(model.router, feature).index;
}

LandmarkSet head_predict(const TweakedModel& model, std::size_t head,
                         const std::vector<double>& feature) {
  return LandmarkSet::from_flat(head_forward(model.heads[head], feature).data);
}

namespace {
LandmarkSet predict_routed(const TweakedModel& model, const Sample& sample) {
  const auto feature = model.trunk.extract_features(sample.image, model.router.tap);
  const std::size_t c = gmm_assign(model.router, feature).index;
  return head_predict(model, c, feature);
}
}  // namespace

LandmarkSet predict_tweaked(const TweakedModel& model, const Sample& sample,
                            bool mirror_average) {
  LandmarkSet direct = predict_routed(model, sample);
  if (!mirror_average) return direct;

  const Sample mirrored = mirror_sample(sample);
  const LandmarkSet back = mirror_landmarks(predict_routed(model, mirrored));
  LandmarkSet out;
  out.pts.resize(direct.size());
  for (std::size_t j = 0; j < direct.size(); ++j)
    out.pts[j] = {(direct.pts[j][0] + back.pts[j][0]) / 2.0,
                  (direct.pts[j][1] + back.pts[j][1]) / 2.0};
  return out;
}

void TweakedModel::save(const std::string& dir) const {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  trunk.save((fs::path(dir) / "trunk.tcnn").string());
  router.save((fs::path(dir) / "router.tcnn").string());
  for (std::size_t c = 0; c < heads.size(); ++c) {
    Container box;
    box.put_string("kind", "tweak-head");
    box.put_i64("cluster", static_cast<std::int64_t>(c));
    box.put_i64("fallback", heads[c].fallback ? 1 : 0);
    box.put_i64("member_count", static_cast<std::int64_t>(heads[c].member_count));
    box.put_i64("augmented_count", static_cast<std::int64_t>(heads[c].augmented_count));
    box.put_tensor("fc5_w", heads[c].fc5_w);
    box.put_tensor("fc5_b", heads[c].fc5_b);
    box.put_tensor("fc6_w", heads[c].fc6_w);
    box.put_tensor("fc6_b", heads[c].fc6_b);
    char name[32];
    std::snprintf(name, sizeof(name), "head_%03zu.tcnn", c);
    box.save((fs::path(dir) / name).string());
  }
  std::ofstream mf(fs::path(dir) / "manifest.json");
  if (!mf) throw data_error("cannot write tweaked manifest in " + dir);
  mf << "{\n  \"kind\": \"tweaked-model\",\n  \"k\": " << heads.size()
     << ",\n  \"tap\": \"" << router.tap << "\"\n}\n";
}

TweakedModel TweakedModel::load(const std::string& dir) {
  namespace fs = std::filesystem;
  if (!fs::exists(fs::path(dir) / "manifest.json"))
    throw data_error("not a tweaked model directory: " + dir);
  TweakedModel model;
  model.trunk = NetworkModel::load((fs::path(dir) / "trunk.tcnn").string());
  model.router = GmmModel::load((fs::path(dir) / "router.tcnn").string());
  for (std::size_t c = 0;; ++c) {
    char name[32];
    std::snprintf(name, sizeof(name), "head_%03zu.tcnn", c);
    fs::path p = fs::path(dir) / name;
    if (!fs::exists(p)) break;
    Container box = Container::load(p.string());
    if (box.get_string("kind") != "tweak-head") throw data_error("bad head container: " + p.string());
    TweakHead h;
    h.fc5_w = box.get_tensor("fc5_w");
    h.fc5_b = box.get_tensor("fc5_b");
    h.fc6_w = box.get_tensor("fc6_w");
    h.fc6_b = box.get_tensor("fc6_b");
    h.fallback = box.get_i64("fallback") != 0;
    h.member_count = static_cast<std::size_t>(box.get_i64("member_count"));
    h.augmented_count = static_cast<std::size_t>(box.get_i64("augmented_count"));
    model.heads.push_back(std::move(h));
  }
  if (model.heads.size() != model.router.k)
    throw data_error("tweaked model: head count does not match router components");
  return model;
}

}  // namespace tcnn
