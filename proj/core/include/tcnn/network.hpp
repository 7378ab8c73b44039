#pragma once

#include <string>
#include <vector>

#include "tcnn/layers.hpp"
#include "tcnn/rng.hpp"
#include "tcnn/tensor.hpp"

namespace tcnn {

/// Retained intermediates from one forward pass, consumed by backward().
struct ForwardCache {
  std::vector<Tensor> inputs;                       // input to each layer
  std::vector<std::vector<std::size_t>> pool_args;  // argmax maps, pool layers only
  Tensor output;
};

struct Gradients {
  std::vector<Tensor> weights, biases;  // zero-sized for parameterless layers
};

/// Feed-forward conv/dense stack with explicit forward and backward passes.
/// Weights are mutated only by a trainer; inference over a const model is
/// safe from any number of threads.
struct NetworkModel {
  std::vector<std::size_t> input_shape;  // {40, 40, 3}
  std::vector<LayerSpec> layers;
  std::vector<Tensor> weights, biases;   // parallel to layers
  Tensor norm_mean, norm_std;            // preprocessing stats, carried with the model

  /// Stack used throughout: four conv blocks with pooling, then a hidden
  /// dense layer and a linear output of 2*m coordinates. The flattened input
  /// to the first dense layer has length 256.
  static NetworkModel make_default(std::size_t num_landmarks = 5);
  static NetworkModel make(std::vector<std::size_t> input_shape, std::vector<LayerSpec> stack);

  std::size_t num_landmarks() const;
  std::vector<std::vector<std::size_t>> shape_chain() const;

  /// Glorot-uniform weights, zero biases.
  void init_weights(StreamRng& rng);

  Tensor forward(const Tensor& input) const;
  ForwardCache forward_cache(const Tensor& input) const;

  /// Gradients of a scalar loss given d(loss)/d(output). Requires the cache
  /// of the matching forward pass. Optionally also yields d(loss)/d(input).
  Gradients backward(const ForwardCache& cache, const Tensor& dout,
                     Tensor* dinput = nullptr) const;

  Gradients zero_gradients() const;

  /// Feature tap names: "input" plus one per conv/dense layer ("CL1".."CL4",
  /// "FC5", ...) naming the flattened vector entering that layer.
  std::vector<std::string> tap_names() const;
  bool has_tap(const std::string& tap) const;
  std::size_t tap_dim(const std::string& tap) const;
  /// Flattened activation entering the named layer, from a finished pass.
  std::vector<double> feature_at(const ForwardCache& cache, const std::string& tap) const;
  std::vector<double> extract_features(const Tensor& input, const std::string& tap) const;

  std::vector<Tensor*> param_ptrs();
  std::vector<const Tensor*> param_ptrs() const;

  void save(const std::string& path) const;
  static NetworkModel load(const std::string& path);
  std::string to_bytes() const;

 private:
  std::size_t tap_layer_index(const std::string& tap) const;  // layers.size() == input
};

}  // namespace tcnn
