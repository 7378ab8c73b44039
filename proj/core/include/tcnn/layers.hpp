#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "tcnn/tensor.hpp"

namespace tcnn {

enum class LayerKind { conv, maxpool, abstanh, dense };

/// One layer of a feed-forward stack. Images flow as HxWxC tensors; the
/// first dense layer flattens implicitly.
struct LayerSpec {
  LayerKind kind = LayerKind::abstanh;
  std::size_t out_channels = 0, kh = 0, kw = 0;  // conv
  std::size_t window = 2, stride = 2;            // maxpool
  std::size_t out_width = 0;                     // dense

  static LayerSpec conv(std::size_t out_channels, std::size_t kh, std::size_t kw);
  static LayerSpec maxpool(std::size_t window = 2, std::size_t stride = 2);
  static LayerSpec abstanh();
  static LayerSpec dense(std::size_t out_width);

  bool has_params() const { return kind == LayerKind::conv || kind == LayerKind::dense; }
};

/// Output shape of one layer; throws std::invalid_argument with a shape
/// diagnostic when the layer cannot consume the input.
std::vector<std::size_t> layer_output_shape(const LayerSpec& spec,
                                            const std::vector<std::size_t>& in);

std::string layer_to_string(const LayerSpec& spec);
LayerSpec layer_from_string(const std::string& s);
std::string stack_to_string(const std::vector<LayerSpec>& stack);
std::vector<LayerSpec> stack_from_string(const std::string& s);

// ---- Layer kernels -------------------------------------------------------
// Valid-padding cross-correlation. input: HxWxCin, kernels: Cout x kh x kw x
// Cin, bias: Cout. Output (H-kh+1) x (W-kw+1) x Cout.
Tensor conv_forward(const Tensor& input, const Tensor& kernels, const Tensor& bias);
void conv_backward(const Tensor& input, const Tensor& kernels, const Tensor& upstream,
                   Tensor& dinput, Tensor& dkernels, Tensor& dbias);

struct PoolResult {
  Tensor output;
  std::vector<std::size_t> argmax;  // flat input index of each output cell's winner
};
// Max pooling; windows at the bottom/right borders are truncated, so the
// output is ceil(H/stride) x ceil(W/stride) x C.
PoolResult maxpool_forward(const Tensor& input, std::size_t window, std::size_t stride);
Tensor maxpool_backward(const std::vector<std::size_t>& input_shape,
                        const std::vector<std::size_t>& argmax, const Tensor& upstream);

// Elementwise |tanh(x)|. The backward subgradient at x == 0 is 0.
Tensor abstanh_forward(const Tensor& input);
Tensor abstanh_backward(const Tensor& input, const Tensor& upstream);

// output = weights * input + bias. weights: m x n, input: n, bias: m.
Tensor dense_forward(const Tensor& input, const Tensor& weights, const Tensor& bias);
void dense_backward(const Tensor& input, const Tensor& weights, const Tensor& upstream,
                    Tensor& dinput, Tensor& dweights, Tensor& dbias);

}  // namespace tcnn
