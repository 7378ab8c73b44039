#include "tcnn/layers.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace tcnn {

LayerSpec LayerSpec::conv(std::size_t out_channels, std::size_t kh, std::size_t kw) {
  if (out_channels < 1 || kh < 1 || kw < 1)
    throw std::invalid_argument("conv: out_channels and kernel extents must be >= 1");
  LayerSpec s;
  s.kind = LayerKind::conv;
  s.out_channels = out_channels;
  s.kh = kh;
  s.kw = kw;
  return s;
}

LayerSpec LayerSpec::maxpool(std::size_t window, std::size_t stride) {
  if (window < 1 || stride < 1)
    throw std::invalid_argument("maxpool: window and stride must be >= 1");
  LayerSpec s;
  s.kind = LayerKind::maxpool;
  s.window = window;
  s.stride = stride;
  return s;
}

LayerSpec LayerSpec::abstanh() {
  LayerSpec s;
  s.kind = LayerKind::abstanh;
  return s;
}

LayerSpec LayerSpec::dense(std::size_t out_width) {
  if (out_width < 1) throw std::invalid_argument("dense: out_width must be >= 1");
  LayerSpec s;
  s.kind = LayerKind::dense;
  s.out_width = out_width;
  return s;
}

std::vector<std::size_t> layer_output_shape(const LayerSpec& spec,
                                            const std::vector<std::size_t>& in) {
  switch (spec.kind) {
    case LayerKind::conv: {
      if (in.size() != 3)
        throw std::invalid_argument("conv: expected HxWxC input, got " + shape_str(in));
      if (in[0] < spec.kh || in[1] < spec.kw)
        throw std::invalid_argument("conv: input " + shape_str(in) + " smaller than kernel " +
                                    std::to_string(spec.kh) + "x" + std::to_string(spec.kw));
      return {in[0] - spec.kh + 1, in[1] - spec.kw + 1, spec.out_channels};
    }
    case LayerKind::maxpool: {
      if (in.size() != 3)
        throw std::invalid_argument("maxpool: expected HxWxC input, got " + shape_str(in));
      if (in[0] < spec.window || in[1] < spec.window)
        throw std::invalid_argument("maxpool: input " + shape_str(in) + " smaller than window");
      auto up = [&](std::size_t n) { return (n + spec.stride - 1) / spec.stride; };
      return {up(in[0]), up(in[1]), in[2]};
    }
    case LayerKind::abstanh:
      return in;
    case LayerKind::dense:
      return {spec.out_width};
  }
  throw std::invalid_argument("unknown layer kind");
}

std::string layer_to_string(const LayerSpec& spec) {
  std::ostringstream os;
  switch (spec.kind) {
    case LayerKind::conv:
      os << "conv:" << spec.out_channels << ":" << spec.kh << ":" << spec.kw;
      break;
    case LayerKind::maxpool:
      os << "maxpool:" << spec.window << ":" << spec.stride;
      break;
    case LayerKind::abstanh:
      os << "abstanh";
      break;
    case LayerKind::dense:
      os << "dense:" << spec.out_width;
      break;
  }
  return os.str();
}

LayerSpec layer_from_string(const std::string& s) {
  std::vector<std::string> parts;
  std::string cur;
  for (char ch : s) {
    if (ch == ':') {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  parts.push_back(cur);
  auto num = [&](std::size_t i) -> std::size_t {
    if (i >= parts.size()) throw std::invalid_argument("layer spec '" + s + "': missing field");
    return static_cast<std::size_t>(std::stoull(parts[i]));
  };
  if (parts[0] == "conv") return LayerSpec::conv(num(1), num(2), num(3));
  if (parts[0] == "maxpool") return LayerSpec::maxpool(num(1), num(2));
  if (parts[0] == "abstanh") return LayerSpec::abstanh();
  if (parts[0] == "dense") return LayerSpec::dense(num(1));
  throw std::invalid_argument("unknown layer spec '" + s + "'");
}

std::string stack_to_string(const std::vector<LayerSpec>& stack) {
  std::string out;
  for (std::size_t i = 0; i < stack.size(); ++i) {
    if (i) out += ",";
    out += layer_to_string(stack[i]);
  }
  return out;
}

std::vector<LayerSpec> stack_from_string(const std::string& s) {
  std::vector<LayerSpec> out;
  std::string cur;
  for (char ch : s) {
    if (ch == ',') {
      out.push_back(layer_from_string(cur));
      cur.clear();
    } else if (!std::isspace(static_cast<unsigned char>(ch))) {
      cur.push_back(ch);
    }
  }
  if (!cur.empty()) out.push_back(layer_from_string(cur));
  return out;
}

// ---- conv ------------------------------------------------------------------

Tensor conv_forward(const Tensor& input, const Tensor& kernels, const Tensor& bias) {
  require_rank(input, 3, "conv input");
  require_rank(kernels, 4, "conv kernels");
  const std::size_t H = input.shape[0], W = input.shape[1], Cin = input.shape[2];
  const std::size_t Cout = kernels.shape[0], kh = kernels.shape[1], kw = kernels.shape[2];
  if (kernels.shape[3] != Cin)
    throw std::invalid_argument("conv: kernels " + shape_str(kernels.shape) +
                                " do not match input channels " + shape_str(input.shape));
  require_shape(bias, {Cout}, "conv bias");
  if (H < kh || W < kw)
    throw std::invalid_argument("conv: input " + shape_str(input.shape) + " smaller than kernel");

  const std::size_t OH = H - kh + 1, OW = W - kw + 1;
  Tensor out({OH, OW, Cout});
  const double* in = input.data.data();
  const double* k = kernels.data.data();
  double* o = out.data.data();

  // Scalar-input x contiguous-Cout form: the inner loop runs over output
  // channels, which are wide on every layer, so it vectorizes uniformly.
  // Kernels are transposed once per call into [i][j][c][oc] order.
  const std::size_t len = kw * Cin;
  std::vector<double> kt(kh * len * Cout);
  for (std::size_t oc = 0; oc < Cout; ++oc)
    for (std::size_t t = 0; t < kh * len; ++t) kt[t * Cout + oc] = k[oc * kh * len + t];

  std::vector<double> acc(Cout);
  for (std::size_t y = 0; y < OH; ++y) {
    for (std::size_t x = 0; x < OW; ++x) {
      for (std::size_t oc = 0; oc < Cout; ++oc) acc[oc] = bias.data[oc];
      for (std::size_t i = 0; i < kh; ++i) {
        const double* row = in + ((y + i) * W + x) * Cin;
        const double* krow = kt.data() + i * len * Cout;
        for (std::size_t t = 0; t < len; ++t) {
          const double v = row[t];
          const double* kv = krow + t * Cout;
          for (std::size_t oc = 0; oc < Cout; ++oc) acc[oc] += v * kv[oc];
        }
      }
      double* ocell = o + (y * OW + x) * Cout;
      for (std::size_t oc = 0; oc < Cout; ++oc) ocell[oc] = acc[oc];
    }
  }
  return out;
}

void conv_backward(const Tensor& input, const Tensor& kernels, const Tensor& upstream,
                   Tensor& dinput, Tensor& dkernels, Tensor& dbias) {
  const std::size_t H = input.shape[0], W = input.shape[1], Cin = input.shape[2];
  const std::size_t Cout = kernels.shape[0], kh = kernels.shape[1], kw = kernels.shape[2];
  const std::size_t OH = H - kh + 1, OW = W - kw + 1;
  require_shape(upstream, {OH, OW, Cout}, "conv upstream gradient");

  dinput = Tensor::zeros(input.shape);
  dkernels = Tensor::zeros(kernels.shape);
  dbias = Tensor::zeros({Cout});

  const double* in = input.data.data();
  const double* k = kernels.data.data();
  const double* g = upstream.data.data();
  double* din = dinput.data.data();
  double* dk = dkernels.data.data();

  for (std::size_t y = 0; y < OH; ++y) {
    for (std::size_t x = 0; x < OW; ++x) {
      const double* gcell = g + (y * OW + x) * Cout;
      for (std::size_t oc = 0; oc < Cout; ++oc) {
        const double gv = gcell[oc];
        if (gv == 0.0) continue;
        dbias.data[oc] += gv;
        const double* kc = k + oc * kh * kw * Cin;
        double* dkc = dk + oc * kh * kw * Cin;
        for (std::size_t i = 0; i < kh; ++i) {
          const double* row = in + ((y + i) * W + x) * Cin;
          double* drow = din + ((y + i) * W + x) * Cin;
          const double* krow = kc + i * kw * Cin;
          double* dkrow = dkc + i * kw * Cin;
          for (std::size_t t = 0; t < kw * Cin; ++t) {
            dkrow[t] += gv * row[t];
            drow[t] += gv * krow[t];
          }
        }
      }
    }
  }
}

// ---- maxpool ---------------------------------------------------------------

PoolResult maxpool_forward(const Tensor& input, std::size_t window, std::size_t stride) {
  require_rank(input, 3, "maxpool input");
  const std::size_t H = input.shape[0], W = input.shape[1], C = input.shape[2];
  if (H < window || W < window)
    throw std::invalid_argument("maxpool: input " + shape_str(input.shape) +
                                " smaller than window " + std::to_string(window));
  const std::size_t OH = (H + stride - 1) / stride, OW = (W + stride - 1) / stride;

  PoolResult res{Tensor({OH, OW, C}), {}};
  res.argmax.assign(OH * OW * C, 0);

  for (std::size_t y = 0; y < OH; ++y) {
    const std::size_t y0 = y * stride, y1 = std::min(y0 + window, H);
    for (std::size_t x = 0; x < OW; ++x) {
      const std::size_t x0 = x * stride, x1 = std::min(x0 + window, W);
      for (std::size_t c = 0; c < C; ++c) {
        double best = input.at3(y0, x0, c);
        std::size_t best_idx = (y0 * W + x0) * C + c;
        for (std::size_t iy = y0; iy < y1; ++iy) {
          for (std::size_t ix = x0; ix < x1; ++ix) {
            double v = input.at3(iy, ix, c);
            if (v > best) {
              best = v;
              best_idx = (iy * W + ix) * C + c;
            }
          }
        }
        res.output.at3(y, x, c) = best;
        res.argmax[(y * OW + x) * C + c] = best_idx;
      }
    }
  }
  return res;
}

Tensor maxpool_backward(const std::vector<std::size_t>& input_shape,
                        const std::vector<std::size_t>& argmax, const Tensor& upstream) {
  if (argmax.size() != upstream.numel())
    throw std::invalid_argument("maxpool backward: argmax map does not match upstream shape " +
                                shape_str(upstream.shape));
  Tensor din = Tensor::zeros(input_shape);
  for (std::size_t i = 0; i < argmax.size(); ++i) din.data[argmax[i]] += upstream.data[i];
  return din;
}

// ---- abstanh ---------------------------------------------------------------

Tensor abstanh_forward(const Tensor& input) {
  Tensor out(input.shape);
  for (std::size_t i = 0; i < input.data.size(); ++i) out.data[i] = std::fabs(std::tanh(input.data[i]));
  return out;
}

Tensor abstanh_backward(const Tensor& input, const Tensor& upstream) {
  require_shape(upstream, input.shape, "abstanh upstream gradient");
  Tensor din(input.shape);
  for (std::size_t i = 0; i < input.data.size(); ++i) {
    const double t = std::tanh(input.data[i]);
    const double sign = t > 0.0 ? 1.0 : (t < 0.0 ? -1.0 : 0.0);
    din.data[i] = upstream.data[i] * sign * (1.0 - t * t);
  }
  return din;
}

// ---- dense -----------------------------------------------------------------

Tensor dense_forward(const Tensor& input, const Tensor& weights, const Tensor& bias) {
  require_rank(weights, 2, "dense weights");
  const std::size_t m = weights.shape[0], n = weights.shape[1];
  if (input.numel() != n)
    throw std::invalid_argument("dense: input " + shape_str(input.shape) +
                                " does not match weights " + shape_str(weights.shape));
  require_shape(bias, {m}, "dense bias");

  Tensor out({m});
  const double* x = input.data.data();
  const std::size_t n4 = n & ~static_cast<std::size_t>(3);
  for (std::size_t r = 0; r < m; ++r) {
    const double* wrow = weights.data.data() + r * n;
    double a0 = 0, a1 = 0, a2 = 0, a3 = 0, acc = bias.data[r];
    std::size_t c = 0;
    for (; c < n4; c += 4) {
      a0 += wrow[c] * x[c];
      a1 += wrow[c + 1] * x[c + 1];
      a2 += wrow[c + 2] * x[c + 2];
      a3 += wrow[c + 3] * x[c + 3];
    }
    for (; c < n; ++c) acc += wrow[c] * x[c];
    out.data[r] = (a0 + a2) + (a1 + a3) + acc;
  }
  return out;
}

void dense_backward(const Tensor& input, const Tensor& weights, const Tensor& upstream,
                    Tensor& dinput, Tensor& dweights, Tensor& dbias) {
  const std::size_t m = weights.shape[0], n = weights.shape[1];
  require_shape(upstream, {m}, "dense upstream gradient");

  dinput = Tensor::zeros(input.shape);
  dweights = Tensor::zeros(weights.shape);
  dbias = upstream;

  const double* x = input.data.data();
  const double* g = upstream.data.data();
  double* dx = dinput.data.data();
  for (std::size_t r = 0; r < m; ++r) {
    const double gv = g[r];
    const double* wrow = weights.data.data() + r * n;
    double* dwrow = dweights.data.data() + r * n;
    for (std::size_t c = 0; c < n; ++c) {
      dwrow[c] = gv * x[c];
      dx[c] += gv * wrow[c];
    }
  }
}

}  // namespace tcnn
