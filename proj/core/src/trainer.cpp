#include "tcnn/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

#include "tcnn/errors.hpp"
#include "tcnn/landmarks.hpp"
#include "tcnn/parallel.hpp"

namespace tcnn {

void TrainConfig::validate() const {
  if (patience < 1) throw std::invalid_argument("train: patience must be >= 1");
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0))
    throw std::invalid_argument("train: validation fraction must be in (0, 1)");
  if (batch_size < 1) throw std::invalid_argument("train: batch size must be >= 1");
}

LandmarkSet predict(const NetworkModel& model, const Sample& sample) {
  return LandmarkSet::from_flat(model.forward(sample.image).data);
}

double sample_loss(const NetworkModel& model, const Sample& sample) {
  return loss(predict(model, sample), sample.landmarks);
}

double mean_loss(const NetworkModel& model, const std::vector<Sample>& samples, unsigned jobs) {
  if (samples.empty()) throw std::invalid_argument("mean_loss: empty sample set");
  std::vector<double> losses(samples.size());
  parallel_chunks(samples.size(), 32, jobs, [&](std::size_t, std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) losses[i] = sample_loss(model, samples[i]);
  });
  double total = 0.0;
  for (double v : losses) total += v;  // fixed order
  return total / static_cast<double>(samples.size());
}

namespace {

// Accumulates one batch: per-sample gradients land in fixed slots, then are
// summed in sample order, so the result is independent of the worker count.
double batch_gradients(const NetworkModel& model, const std::vector<Sample>& train,
                       const std::vector<std::size_t>& batch, unsigned jobs,
                       std::vector<Gradients>& slots, Gradients& total) {
  std::vector<double> losses(batch.size());
  parallel_chunks(batch.size(), batch.size(), jobs, [&](std::size_t s, std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      const Sample& sample = train[batch[i]];
      ForwardCache cache = model.forward_cache(sample.image);
      LandmarkSet pred = LandmarkSet::from_flat(cache.output.data);
      losses[i] = loss(pred, sample.landmarks);
      Tensor dout({cache.output.numel()}, loss_gradient(pred, sample.landmarks));
      slots[s] = model.backward(cache, dout);
    }
  });

  const double inv = 1.0 / static_cast<double>(batch.size());
  for (std::size_t li = 0; li < total.weights.size(); ++li) {
    if (total.weights[li].numel() == 0) continue;
    total.weights[li].fill(0.0);
    total.biases[li].fill(0.0);
  }
  for (std::size_t s = 0; s < batch.size(); ++s) {
    for (std::size_t li = 0; li < total.weights.size(); ++li) {
      if (total.weights[li].numel() == 0) continue;
      const auto& sw = slots[s].weights[li].data;
      const auto& sb = slots[s].biases[li].data;
      auto& tw = total.weights[li].data;
      auto& tb = total.biases[li].data;
      for (std::size_t j = 0; j < tw.size(); ++j) tw[j] += sw[j] * inv;
      for (std::size_t j = 0; j < tb.size(); ++j) tb[j] += sb[j] * inv;
    }
  }
  double batch_loss = 0.0;
  for (double v : losses) batch_loss += v;
  return batch_loss * inv;
}

struct Snapshot {
  std::vector<Tensor> weights, biases;
};

Snapshot take_snapshot(const NetworkModel& m) { return {m.weights, m.biases}; }
void restore_snapshot(NetworkModel& m, const Snapshot& s) {
  m.weights = s.weights;
  m.biases = s.biases;
}

}  // namespace

TrainResult train_network(NetworkModel& model, const std::vector<Sample>& train,
                          const std::vector<Sample>& val, const TrainConfig& cfg) {
  cfg.validate();
  if (train.empty()) throw data_error("train: empty training set");
  if (val.empty()) throw data_error("train: empty validation set");

  StreamRng shuffle_rng = StreamRng(cfg.seed, "batches");
  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  std::vector<Tensor*> params = model.param_ptrs();
  const NetworkModel& cmodel = model;
  AdamState adam = AdamState::init(cmodel.param_ptrs(), cfg.adam);

  std::vector<Gradients> slots(std::min<std::size_t>(cfg.batch_size, train.size()),
                               model.zero_gradients());
  Gradients total = model.zero_gradients();

  TrainResult result;
  Snapshot best = take_snapshot(model);
  result.best_val_loss = mean_loss(model, val, cfg.jobs);
  result.best_epoch = 0;

  const auto t0 = std::chrono::steady_clock::now();
  for (std::size_t epoch = 1; epoch <= cfg.epochs_cap; ++epoch) {
    if (epoch - result.best_epoch > cfg.patience) break;

    shuffle_rng.shuffle(order);
    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t off = 0; off < order.size(); off += cfg.batch_size) {
      std::vector<std::size_t> batch(
          order.begin() + static_cast<std::ptrdiff_t>(off),
          order.begin() + static_cast<std::ptrdiff_t>(std::min(off + cfg.batch_size, order.size())));
      const double batch_loss = batch_gradients(model, train, batch, cfg.jobs, slots, total);
      if (!std::isfinite(batch_loss) || batch_loss > cfg.divergence_guard)
        throw numeric_error("training diverged: batch loss " + std::to_string(batch_loss) +
                            " at epoch " + std::to_string(epoch));
      epoch_loss += batch_loss;
      ++batches;

      std::vector<const Tensor*> grad_ptrs;
      grad_ptrs.reserve(params.size());
      for (std::size_t li = 0; li < total.weights.size(); ++li) {
        if (total.weights[li].numel() == 0) continue;
        grad_ptrs.push_back(&total.weights[li]);
        grad_ptrs.push_back(&total.biases[li]);
      }
      adam_step(params, grad_ptrs, adam);
    }

    const double val_loss = mean_loss(model, val, cfg.jobs);
    if (!std::isfinite(val_loss)) throw numeric_error("training diverged: non-finite validation loss");
    const double wall_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    result.log.push_back({epoch, epoch_loss / static_cast<double>(batches), val_loss, wall_ms});

    if (val_loss < result.best_val_loss) {
      result.best_val_loss = val_loss;
      result.best_epoch = epoch;
      best = take_snapshot(model);
    }
  }

  restore_snapshot(model, best);
  return result;
}

TrainResult train_vanilla(NetworkModel& model, const std::vector<Sample>& samples,
                          const SplitIndices& split, const TrainConfig& cfg) {
  cfg.validate();
  if (samples.empty()) throw data_error("train: empty dataset");
  std::vector<Sample> train, val;
  train.reserve(split.train.size());
  val.reserve(split.val.size());
  for (std::size_t i : split.train) train.push_back(samples[i]);
  for (std::size_t i : split.val) val.push_back(samples[i]);

  StreamRng init_rng(cfg.seed, "init");
  model.init_weights(init_rng);
  return train_network(model, train, val, cfg);
}

std::string train_log_tsv(const TrainResult& result) {
  std::ostringstream os;
  os << "epoch\ttrain_loss\tval_loss\twall_ms\n";
  os.precision(12);
  for (const EpochLog& e : result.log)
    os << e.epoch << "\t" << e.train_loss << "\t" << e.val_loss << "\t" << e.wall_ms << "\n";
  return os.str();
}

}  // namespace tcnn
