#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "tcnn/adam.hpp"
#include "tcnn/dataio.hpp"
#include "tcnn/network.hpp"

namespace tcnn {

struct TrainConfig {
  std::size_t epochs_cap = 500;
  std::size_t batch_size = 64;
  std::uint64_t seed = 0;
  double validation_fraction = 0.1;
  std::size_t patience = 50;
  AdamParams adam;
  unsigned jobs = 1;
  double divergence_guard = 1e6;  // abort when a batch loss exceeds this

  void validate() const;  // patience >= 1, 0 < validation_fraction < 1
};

struct EpochLog {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double wall_ms = 0.0;  // informational; excluded from reproducibility checks
};

struct TrainResult {
  std::vector<EpochLog> log;
  std::size_t best_epoch = 0;
  double best_val_loss = std::numeric_limits<double>::infinity();
};

/// Epoch-0 snapshot included: the returned best weights are never worse on
/// validation than the initial ones. Stops `patience` epochs after the best
/// validation epoch or at the cap, then restores the best snapshot.
/// Throws numeric_error on divergence (non-finite or huge batch loss).
TrainResult train_network(NetworkModel& model, const std::vector<Sample>& train,
                          const std::vector<Sample>& val, const TrainConfig& cfg);

/// Splits the dataset with cfg.seed, initializes weights and trains.
/// The caller provides samples that are already normalized.
TrainResult train_vanilla(NetworkModel& model, const std::vector<Sample>& samples,
                          const SplitIndices& split, const TrainConfig& cfg);

LandmarkSet predict(const NetworkModel& model, const Sample& sample);

/// Eq-style squared-normalized loss of one sample under the current weights.
double sample_loss(const NetworkModel& model, const Sample& sample);

/// Mean loss over a set; deterministic for any job count.
double mean_loss(const NetworkModel& model, const std::vector<Sample>& samples, unsigned jobs);

std::string train_log_tsv(const TrainResult& result);

}  // namespace tcnn
