#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tcnn/augment.hpp"
#include "tcnn/dataio.hpp"
#include "tcnn/gmm.hpp"
#include "tcnn/network.hpp"
#include "tcnn/trainer.hpp"

namespace tcnn {

/// One cluster's fine-tuned copy of the final layers (hidden dense +
/// activation + output dense), in the trunk's original dimensions.
struct TweakHead {
  Tensor fc5_w, fc5_b, fc6_w, fc6_b;
  bool fallback = false;  // too few members; kept at the trunk's weights
  TrainResult log;
  std::size_t member_count = 0;
  std::size_t augmented_count = 0;
};

/// Frozen trunk + posterior-argmax router + K tweaked heads.
struct TweakedModel {
  NetworkModel trunk;  // weights bit-identical to the vanilla model
  GmmModel router;     // fitted on the tap features (default FC5 input)
  std::vector<TweakHead> heads;

  std::size_t k() const { return heads.size(); }
  void save(const std::string& dir) const;
  static TweakedModel load(const std::string& dir);
};

struct TweakConfig {
  std::size_t patience = 50;  // 0 = keep the vanilla head untouched
  std::size_t epochs_cap = 500;
  std::size_t batch_size = 64;
  double lr_scale = 0.1;  // fine-tuning rate = vanilla rate * lr_scale
  AdamParams adam;        // vanilla optimizer settings, before lr_scale
  double validation_fraction = 0.1;
  bool augment = true;
  std::size_t augment_target = 600;
  std::size_t retry_factor = 20;  // retry cap = retry_factor * augment_target
  std::size_t cross_probe_attempts = 200;
  std::uint64_t seed = 0;
  unsigned jobs = 1;
  double divergence_guard = 1e6;
};

struct ClusterBuildInfo {
  std::size_t members = 0, train_count = 0, val_count = 0;
  AugmentStats augment_stats;
  AugmentStats cross_stats;
  bool fallback = false;
  std::size_t best_epoch = 0, epochs_trained = 0;
  double vanilla_val_loss = 0.0, tweaked_val_loss = 0.0;
};

struct BuildReport {
  std::vector<ClusterBuildInfo> clusters;
};

/// Features of every sample at the router's tap, one row per sample.
FeatureMatrix extract_feature_matrix(const NetworkModel& model,
                                     const std::vector<Sample>& samples,
                                     const std::string& tap, unsigned jobs);

/// Fine-tunes the final layers per cluster over the frozen vanilla trunk.
/// When `router` is null a GMM with `k` components is fitted on the tap
/// features first. Each cluster's members split 90/10 for early stopping;
/// clusters with fewer than 2 validation samples keep the vanilla head.
TweakedModel build_tweaked(const NetworkModel& vanilla, const std::vector<Sample>& train_set,
                           std::size_t k, const TweakConfig& cfg,
                           const GmmModel* router = nullptr, BuildReport* report = nullptr,
                           const FeatureMatrix* cached_features = nullptr);

std::size_t route(const TweakedModel& model, const Sample& sample);

/// Head output from a precomputed tap feature.
LandmarkSet head_predict(const TweakedModel& model, std::size_t head,
                         const std::vector<double>& feature);

/// Routed prediction; with mirror_average the sample and its mirror are each
/// routed and predicted independently, the mirrored prediction is mapped
/// back (x -> 1-x plus role swap) and the two are averaged.
LandmarkSet predict_tweaked(const TweakedModel& model, const Sample& sample,
                            bool mirror_average);

/// Exposed for tests: trains one head on explicit feature/landmark splits,
/// starting from the given initial head weights.
TweakHead train_single_head(const TweakHead& init, const FeatureMatrix& train_features,
                            const std::vector<LandmarkSet>& train_truths,
                            const FeatureMatrix& val_features,
                            const std::vector<LandmarkSet>& val_truths, const TweakConfig& cfg,
                            std::uint64_t shuffle_seed);

}  // namespace tcnn
