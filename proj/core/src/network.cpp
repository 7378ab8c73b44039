#include "tcnn/network.hpp"

#include <cmath>
#include <stdexcept>

#include "tcnn/errors.hpp"
#include "tcnn/serialize.hpp"

namespace tcnn {

NetworkModel NetworkModel::make_default(std::size_t num_landmarks) {
  std::vector<LayerSpec> stack = {
      LayerSpec::conv(16, 5, 5), LayerSpec::abstanh(), LayerSpec::maxpool(),
      LayerSpec::conv(48, 3, 3), LayerSpec::abstanh(), LayerSpec::maxpool(),
      LayerSpec::conv(64, 3, 3), LayerSpec::abstanh(), LayerSpec::maxpool(),
      LayerSpec::conv(64, 2, 2), LayerSpec::abstanh(),
      LayerSpec::dense(100),     LayerSpec::abstanh(),
      LayerSpec::dense(2 * num_landmarks),
  };
  return make({40, 40, 3}, std::move(stack));
}

NetworkModel NetworkModel::make(std::vector<std::size_t> input_shape,
                                std::vector<LayerSpec> stack) {
  NetworkModel net;
  net.input_shape = std::move(input_shape);
  net.layers = std::move(stack);
  net.weights.resize(net.layers.size());
  net.biases.resize(net.layers.size());

  std::vector<std::size_t> shape = net.input_shape;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const LayerSpec& spec = net.layers[i];
    if (spec.kind == LayerKind::dense && shape.size() != 1) shape = {shape_numel(shape)};
    if (spec.kind == LayerKind::conv) {
      std::vector<std::size_t> after = layer_output_shape(spec, shape);
      net.weights[i] = Tensor::zeros({spec.out_channels, spec.kh, spec.kw, shape[2]});
      net.biases[i] = Tensor::zeros({spec.out_channels});
      shape = after;
    } else if (spec.kind == LayerKind::dense) {
      net.weights[i] = Tensor::zeros({spec.out_width, shape[0]});
      net.biases[i] = Tensor::zeros({spec.out_width});
      shape = {spec.out_width};
    } else {
      shape = layer_output_shape(spec, shape);
    }
  }
  return net;
}

std::size_t NetworkModel::num_landmarks() const {
  const LayerSpec& last = layers.back();
  if (last.kind != LayerKind::dense || last.out_width % 2 != 0)
    throw std::invalid_argument(
        "network: landmark models need a dense output of 2*m coordinates");
  return last.out_width / 2;
}

std::vector<std::vector<std::size_t>> NetworkModel::shape_chain() const {
  std::vector<std::vector<std::size_t>> chain;
  std::vector<std::size_t> shape = input_shape;
  chain.push_back(shape);
  for (const LayerSpec& spec : layers) {
    if (spec.kind == LayerKind::dense && shape.size() != 1) shape = {shape_numel(shape)};
    shape = layer_output_shape(spec, shape);
    chain.push_back(shape);
  }
  return chain;
}

void NetworkModel::init_weights(StreamRng& rng) {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (!layers[i].has_params()) continue;
    std::size_t fan_in, fan_out;
    if (layers[i].kind == LayerKind::conv) {
      const auto& ks = weights[i].shape;  // Cout x kh x kw x Cin
      fan_in = ks[1] * ks[2] * ks[3];
      fan_out = ks[1] * ks[2] * ks[0];
    } else {
      fan_in = weights[i].shape[1];
      fan_out = weights[i].shape[0];
    }
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (double& w : weights[i].data) w = rng.uniform(-bound, bound);
    biases[i].fill(0.0);
  }
}

Tensor NetworkModel::forward(const Tensor& input) const {
  require_shape(input, input_shape, "network input");
  Tensor cur = input;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const LayerSpec& spec = layers[i];
    switch (spec.kind) {
      case LayerKind::conv:
        cur = conv_forward(cur, weights[i], biases[i]);
        break;
      case LayerKind::maxpool:
        cur = maxpool_forward(cur, spec.window, spec.stride).output;
        break;
      case LayerKind::abstanh:
        cur = abstanh_forward(cur);
        break;
      case LayerKind::dense: {
        if (cur.rank() != 1) {
          std::size_t n = cur.numel();
          cur = Tensor({n}, std::move(cur.data));
        }
        cur = dense_forward(cur, weights[i], biases[i]);
        break;
      }
    }
  }
  return cur;
}

ForwardCache NetworkModel::forward_cache(const Tensor& input) const {
  require_shape(input, input_shape, "network input");
  ForwardCache cache;
  cache.inputs.reserve(layers.size());
  Tensor cur = input;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const LayerSpec& spec = layers[i];
    if (spec.kind == LayerKind::dense && cur.rank() != 1) {
      std::size_t n = cur.numel();
      cur = Tensor({n}, std::move(cur.data));
    }
    cache.inputs.push_back(cur);
    switch (spec.kind) {
      case LayerKind::conv:
        cur = conv_forward(cur, weights[i], biases[i]);
        break;
      case LayerKind::maxpool: {
        PoolResult res = maxpool_forward(cur, spec.window, spec.stride);
        cache.pool_args.push_back(std::move(res.argmax));
        cur = std::move(res.output);
        break;
      }
      case LayerKind::abstanh:
        cur = abstanh_forward(cur);
        break;
      case LayerKind::dense:
        cur = dense_forward(cur, weights[i], biases[i]);
        break;
    }
  }
  cache.output = std::move(cur);
  return cache;
}

Gradients NetworkModel::zero_gradients() const {
  Gradients g;
  g.weights.resize(layers.size());
  g.biases.resize(layers.size());
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (layers[i].has_params()) {
      g.weights[i] = Tensor::zeros(weights[i].shape);
      g.biases[i] = Tensor::zeros(biases[i].shape);
    }
  }
  return g;
}

Gradients NetworkModel::backward(const ForwardCache& cache, const Tensor& dout,
                                 Tensor* dinput) const {
  if (cache.inputs.size() != layers.size())
    throw std::invalid_argument("backward: cache does not match this network (run forward_cache first)");

  Gradients grads;
  grads.weights.resize(layers.size());
  grads.biases.resize(layers.size());

  Tensor up = dout;
  std::size_t pool_cursor = cache.pool_args.size();
  for (std::size_t ri = layers.size(); ri-- > 0;) {
    const LayerSpec& spec = layers[ri];
    const Tensor& in = cache.inputs[ri];
    // Crossing the flatten boundary in reverse: restore the rank-3 shape.
    std::vector<std::size_t> out_shape = layer_output_shape(spec, in.shape);
    if (up.shape != out_shape) {
      if (up.numel() != shape_numel(out_shape))
        throw std::invalid_argument("backward: upstream gradient size does not match layer output");
      up = Tensor(out_shape, std::move(up.data));
    }
    switch (spec.kind) {
      case LayerKind::conv: {
        Tensor din;
        conv_backward(in, weights[ri], up, din, grads.weights[ri], grads.biases[ri]);
        up = std::move(din);
        break;
      }
      case LayerKind::maxpool: {
        --pool_cursor;
        up = maxpool_backward(in.shape, cache.pool_args[pool_cursor], up);
        break;
      }
      case LayerKind::abstanh:
        up = abstanh_backward(in, up);
        break;
      case LayerKind::dense: {
        Tensor din;
        dense_backward(in, weights[ri], up, din, grads.weights[ri], grads.biases[ri]);
        up = std::move(din);
        break;
      }
    }
  }
  if (dinput) {
    // The first layer may have consumed a flattened view; report the gradient
    // in the original input shape.
    *dinput = Tensor(input_shape, std::move(up.data));
  }
  return grads;
}

std::vector<std::string> NetworkModel::tap_names() const {
  std::vector<std::string> names{"input"};
  std::size_t counted = 0;
  for (const LayerSpec& spec : layers) {
    if (spec.kind == LayerKind::conv) names.push_back("CL" + std::to_string(++counted));
    if (spec.kind == LayerKind::dense) names.push_back("FC" + std::to_string(++counted));
  }
  return names;
}

std::size_t NetworkModel::tap_layer_index(const std::string& tap) const {
  if (tap == "input") return 0;
  std::size_t counted = 0;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const LayerSpec& spec = layers[i];
    if (spec.kind == LayerKind::conv || spec.kind == LayerKind::dense) {
      ++counted;
      std::string name = (spec.kind == LayerKind::conv ? "CL" : "FC") + std::to_string(counted);
      if (name == tap) return i;
    }
  }
  throw std::invalid_argument("unknown feature tap '" + tap + "'");
}

bool NetworkModel::has_tap(const std::string& tap) const {
  try {
    tap_layer_index(tap);
    return true;
  } catch (const std::invalid_argument&) {
    return false;
  }
}

std::size_t NetworkModel::tap_dim(const std::string& tap) const {
  std::size_t idx = tap_layer_index(tap);
  auto chain = shape_chain();
  return shape_numel(chain[idx]);
}

std::vector<double> NetworkModel::feature_at(const ForwardCache& cache,
                                             const std::string& tap) const {
  std::size_t idx = tap_layer_index(tap);
  return cache.inputs[idx].data;
}

std::vector<double> NetworkModel::extract_features(const Tensor& input,
                                                   const std::string& tap) const {
  std::size_t idx = tap_layer_index(tap);
  require_shape(input, input_shape, "network input");
  Tensor cur = input;
  for (std::size_t i = 0; i < idx; ++i) {
    const LayerSpec& spec = layers[i];
    switch (spec.kind) {
      case LayerKind::conv:
        cur = conv_forward(cur, weights[i], biases[i]);
        break;
      case LayerKind::maxpool:
        cur = maxpool_forward(cur, spec.window, spec.stride).output;
        break;
      case LayerKind::abstanh:
        cur = abstanh_forward(cur);
        break;
      case LayerKind::dense: {
        if (cur.rank() != 1) {
          std::size_t n = cur.numel();
          cur = Tensor({n}, std::move(cur.data));
        }
        cur = dense_forward(cur, weights[i], biases[i]);
        break;
      }
    }
  }
  return std::move(cur.data);
}

std::vector<Tensor*> NetworkModel::param_ptrs() {
  std::vector<Tensor*> out;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (layers[i].has_params()) {
      out.push_back(&weights[i]);
      out.push_back(&biases[i]);
    }
  }
  return out;
}

std::vector<const Tensor*> NetworkModel::param_ptrs() const {
  std::vector<const Tensor*> out;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (layers[i].has_params()) {
      out.push_back(&weights[i]);
      out.push_back(&biases[i]);
    }
  }
  return out;
}

std::string NetworkModel::to_bytes() const {
  Container c;
  c.put_string("kind", "network");
  c.put_string("arch", stack_to_string(layers));
  c.put_tensor("input_shape", Tensor({input_shape.size()},
                                     std::vector<double>(input_shape.begin(), input_shape.end())));
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (!layers[i].has_params()) continue;
    c.put_tensor("w" + std::to_string(i), weights[i]);
    c.put_tensor("b" + std::to_string(i), biases[i]);
  }
  if (norm_mean.numel() > 0) {
    c.put_tensor("norm_mean", norm_mean);
    c.put_tensor("norm_std", norm_std);
  }
  return c.to_bytes();
}

void NetworkModel::save(const std::string& path) const {
  Container c = Container::from_bytes(to_bytes());
  c.save(path);
}

NetworkModel NetworkModel::load(const std::string& path) {
  Container c = Container::load(path);
  if (!c.has("kind") || c.get_string("kind") != "network")
    throw data_error("not a network container: " + path);
  std::vector<LayerSpec> stack = stack_from_string(c.get_string("arch"));
  const Tensor& ishape = c.get_tensor("input_shape");
  std::vector<std::size_t> in_shape;
  for (double d : ishape.data) in_shape.push_back(static_cast<std::size_t>(d));

  NetworkModel net = make(std::move(in_shape), std::move(stack));
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    if (!net.layers[i].has_params()) continue;
    const Tensor& w = c.get_tensor("w" + std::to_string(i));
    const Tensor& b = c.get_tensor("b" + std::to_string(i));
    require_shape(w, net.weights[i].shape, "loaded weights");
    require_shape(b, net.biases[i].shape, "loaded biases");
    net.weights[i] = w;
    net.biases[i] = b;
  }
  if (c.has("norm_mean")) {
    net.norm_mean = c.get_tensor("norm_mean");
    net.norm_std = c.get_tensor("norm_std");
  }
  return net;
}

}  // namespace tcnn
