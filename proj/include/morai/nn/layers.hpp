#pragma once

#include <cmath>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "morai/nn/tensor.hpp"
#include "morai/rng.hpp"

namespace morai::nn {

// ---------------------------------------------------------------------------
// 2-D convolution, stride 1, "same" padding. Activations are [width][height][channels];
// weights are [k][k][in][out]. For even k the extra padding goes after (pad before = (k-1)/2).

struct ConvGrads {
  Tensor input;
  Tensor weights;
  Tensor bias;
};

namespace detail {

struct ConvDims {
  std::size_t w, h, cin, cout, k, pad;
};

inline ConvDims conv_dims(const Tensor& input, const Tensor& weights, const Tensor& bias, const std::string& layer) {
  if (input.shape.size() != 3) throw ShapeError(layer + ": conv input must be [w][h][c], got " + input.shape_string());
  if (weights.shape.size() != 4 || weights.shape[0] != weights.shape[1])
    throw ShapeError(layer + ": conv weights must be [k][k][in][out], got " + weights.shape_string());
  if (weights.shape[2] != input.shape[2])
    throw ShapeError(layer + ": conv expects " + std::to_string(weights.shape[2]) + " input channels, got " +
                     std::to_string(input.shape[2]));
  if (bias.shape.size() != 1 || bias.shape[0] != weights.shape[3])
    throw ShapeError(layer + ": conv bias must have one entry per filter");
  const std::size_t k = weights.shape[0];
  return {input.shape[0], input.shape[1], input.shape[2], weights.shape[3], k, (k - 1) / 2};
}

}  // namespace detail

inline Tensor conv2d_forward(const Tensor& input, const Tensor& weights, const Tensor& bias,
                             const std::string& layer = "conv2d") {
  const auto d = detail::conv_dims(input, weights, bias, layer);
  Tensor out({d.w, d.h, d.cout});
  const double* in = input.data();
  const double* wt = weights.data();
  double* o = out.data();
  for (std::size_t x = 0; x < d.w; ++x) {
    for (std::size_t y = 0; y < d.h; ++y) {
      double* op = o + (x * d.h + y) * d.cout;
      for (std::size_t co = 0; co < d.cout; ++co) op[co] = bias[co];
      for (std::size_t i = 0; i < d.k; ++i) {
        const std::ptrdiff_t xi = static_cast<std::ptrdiff_t>(x + i) - static_cast<std::ptrdiff_t>(d.pad);
        if (xi < 0 || xi >= static_cast<std::ptrdiff_t>(d.w)) continue;
        for (std::size_t j = 0; j < d.k; ++j) {
          const std::ptrdiff_t yj = static_cast<std::ptrdiff_t>(y + j) - static_cast<std::ptrdiff_t>(d.pad);
          if (yj < 0 || yj >= static_cast<std::ptrdiff_t>(d.h)) continue;
          const double* ip = in + (static_cast<std::size_t>(xi) * d.h + static_cast<std::size_t>(yj)) * d.cin;
          const double* wp = wt + (i * d.k + j) * d.cin * d.cout;
          for (std::size_t ci = 0; ci < d.cin; ++ci) {
            const double v = ip[ci];
            if (v == 0.0) continue;
            const double* wr = wp + ci * d.cout;
#pragma omp simd
            for (std::size_t co = 0; co < d.cout; ++co) op[co] += v * wr[co];
          }
        }
      }
    }
  }
  return out;
}

/// Accumulates d(loss)/d(weights, bias) into `weight_grad`/`bias_grad`; returns d(loss)/d(input)
/// when `need_input_grad`, otherwise an empty tensor.
inline Tensor conv2d_backward_accumulate(const Tensor& input, const Tensor& weights, const Tensor& bias,
                                         const Tensor& dout, Tensor& weight_grad, Tensor& bias_grad,
                                         bool need_input_grad, const std::string& layer = "conv2d") {
  const auto d = detail::conv_dims(input, weights, bias, layer);
  if (dout.size() != d.w * d.h * d.cout) throw ShapeError(layer + ": output gradient has the wrong size");
  const double* in = input.data();
  const double* g = dout.data();
  double* dw = weight_grad.data();
  for (std::size_t x = 0; x < d.w; ++x)
    for (std::size_t y = 0; y < d.h; ++y) {
      const double* gp = g + (x * d.h + y) * d.cout;
      for (std::size_t co = 0; co < d.cout; ++co) bias_grad[co] += gp[co];
    }

  // Transposed copy [k][k][out][in] so the input-gradient inner loop is contiguous.
  std::vector<double> wt_t;
  Tensor din;
  if (need_input_grad) {
    din = Tensor({d.w, d.h, d.cin});
    wt_t.resize(weights.size());
    for (std::size_t ij = 0; ij < d.k * d.k; ++ij)
      for (std::size_t ci = 0; ci < d.cin; ++ci)
        for (std::size_t co = 0; co < d.cout; ++co)
          wt_t[(ij * d.cout + co) * d.cin + ci] = weights[(ij * d.cin + ci) * d.cout + co];
  }

  for (std::size_t x = 0; x < d.w; ++x) {
    for (std::size_t y = 0; y < d.h; ++y) {
      const double* gp = g + (x * d.h + y) * d.cout;
      for (std::size_t i = 0; i < d.k; ++i) {
        const std::ptrdiff_t xi = static_cast<std::ptrdiff_t>(x + i) - static_cast<std::ptrdiff_t>(d.pad);
        if (xi < 0 || xi >= static_cast<std::ptrdiff_t>(d.w)) continue;
        for (std::size_t j = 0; j < d.k; ++j) {
          const std::ptrdiff_t yj = static_cast<std::ptrdiff_t>(y + j) - static_cast<std::ptrdiff_t>(d.pad);
          if (yj < 0 || yj >= static_cast<std::ptrdiff_t>(d.h)) continue;
          const std::size_t cell = static_cast<std::size_t>(xi) * d.h + static_cast<std::size_t>(yj);
          const double* ip = in + cell * d.cin;
          double* dwp = dw + (i * d.k + j) * d.cin * d.cout;
          for (std::size_t ci = 0; ci < d.cin; ++ci) {
            const double v = ip[ci];
            if (v == 0.0) continue;
            double* dwr = dwp + ci * d.cout;
#pragma omp simd
            for (std::size_t co = 0; co < d.cout; ++co) dwr[co] += v * gp[co];
          }
          if (need_input_grad) {
            double* dip = din.data() + cell * d.cin;
            const double* wtp = wt_t.data() + (i * d.k + j) * d.cout * d.cin;
            for (std::size_t co = 0; co < d.cout; ++co) {
              const double gv = gp[co];
              if (gv == 0.0) continue;
              const double* wr = wtp + co * d.cin;
#pragma omp simd
              for (std::size_t ci = 0; ci < d.cin; ++ci) dip[ci] += gv * wr[ci];
            }
          }
        }
      }
    }
  }
  return din;
}

inline ConvGrads conv2d_backward(const Tensor& input, const Tensor& weights, const Tensor& bias, const Tensor& dout,
                                 const std::string& layer = "conv2d") {
  ConvGrads g{Tensor(), zeros_like(weights), zeros_like(bias)};
  g.input = conv2d_backward_accumulate(input, weights, bias, dout, g.weights, g.bias, true, layer);
  return g;
}

// ---------------------------------------------------------------------------
// Fully connected: input is flattened, weights are [in][out].

struct DenseGrads {
  Tensor input;
  Tensor weights;
  Tensor bias;
};

inline Tensor dense_forward(const Tensor& input, const Tensor& weights, const Tensor& bias,
                            const std::string& layer = "dense") {
  if (weights.shape.size() != 2 || weights.shape[0] != input.size())
    throw ShapeError(layer + ": dense expects " + (weights.shape.empty() ? std::string("?") : std::to_string(weights.shape[0])) +
                     " inputs, got " + std::to_string(input.size()));
  const std::size_t n_in = weights.shape[0], n_out = weights.shape[1];
  if (bias.size() != n_out) throw ShapeError(layer + ": dense bias size mismatch");
  Tensor out({n_out}, bias.values);
  double* o = out.data();
  const double* w = weights.data();
  for (std::size_t i = 0; i < n_in; ++i) {
    const double v = input[i];
    if (v == 0.0) continue;
    const double* wr = w + i * n_out;
#pragma omp simd
    for (std::size_t j = 0; j < n_out; ++j) o[j] += v * wr[j];
  }
  return out;
}

inline Tensor dense_backward_accumulate(const Tensor& input, const Tensor& weights, const Tensor& dout,
                                        Tensor& weight_grad, Tensor& bias_grad, bool need_input_grad,
                                        const std::string& layer = "dense") {
  if (weights.shape.size() != 2 || weights.shape[0] != input.size() || weights.shape[1] != dout.size())
    throw ShapeError(layer + ": dense backward shape mismatch");
  const std::size_t n_in = weights.shape[0], n_out = weights.shape[1];
  const double* g = dout.data();
  for (std::size_t j = 0; j < n_out; ++j) bias_grad[j] += g[j];
  Tensor din;
  if (need_input_grad) din = Tensor(input.shape);
  const double* w = weights.data();
  double* dw = weight_grad.data();
  for (std::size_t i = 0; i < n_in; ++i) {
    const double v = input[i];
    if (v != 0.0) {
      double* dwr = dw + i * n_out;
#pragma omp simd
      for (std::size_t j = 0; j < n_out; ++j) dwr[j] += v * g[j];
    }
    if (need_input_grad) {
      const double* wr = w + i * n_out;
      double acc = 0.0;
#pragma omp simd reduction(+ : acc)
      for (std::size_t j = 0; j < n_out; ++j) acc += wr[j] * g[j];
      din[i] = acc;
    }
  }
  return din;
}

inline DenseGrads dense_backward(const Tensor& input, const Tensor& weights, const Tensor& dout) {
  DenseGrads g{Tensor(), zeros_like(weights), Tensor({weights.shape[1]})};
  g.input = dense_backward_accumulate(input, weights, dout, g.weights, g.bias, true);
  return g;
}

// ---------------------------------------------------------------------------
// Leaky ReLU and mean-square loss.

inline double leaky_relu(double x, double slope) { return x >= 0.0 ? x : slope * x; }

inline Tensor leaky_relu_forward(const Tensor& input, double slope) {
  Tensor out = input;
  for (double& v : out.values) v = leaky_relu(v, slope);
  return out;
}

inline Tensor leaky_relu_backward(const Tensor& input, const Tensor& dout, double slope) {
  if (input.size() != dout.size()) throw ShapeError("leaky_relu: gradient size mismatch");
  Tensor din(input.shape);
  for (std::size_t i = 0; i < input.size(); ++i) din[i] = input[i] >= 0.0 ? dout[i] : slope * dout[i];
  return din;
}

struct LossAndGrad {
  double loss = 0.0;
  Tensor grad;
};

/// mean((pred - target)^2) over all entries, with its gradient w.r.t. pred.
inline LossAndGrad mse_loss(const Tensor& pred, const Tensor& target) {
  if (pred.size() != target.size())
    throw ShapeError("mse: prediction " + pred.shape_string() + " vs target " + target.shape_string());
  LossAndGrad r{0.0, Tensor(pred.shape)};
  const double n = static_cast<double>(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - target[i];
    r.loss += d * d;
    r.grad[i] = 2.0 * d / n;
  }
  r.loss /= n;
  return r;
}

// ---------------------------------------------------------------------------
// Layers with owned parameters, chained by Sequential.

inline void glorot_uniform(Tensor& t, double fan_in, double fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / (fan_in + fan_out));
  for (double& v : t.values) v = uniform_real(rng, -limit, limit);
}

struct Conv2d {
  int in_channels = 0, filters = 0, kernel = 0;
  Tensor weight, bias, weight_grad, bias_grad;

  Conv2d() = default;
  Conv2d(int in_ch, int n_filters, int k, Rng& rng) : in_channels(in_ch), filters(n_filters), kernel(k) {
    const auto uk = static_cast<std::size_t>(k);
    weight = Tensor({uk, uk, static_cast<std::size_t>(in_ch), static_cast<std::size_t>(n_filters)});
    bias = Tensor({static_cast<std::size_t>(n_filters)});
    glorot_uniform(weight, k * k * in_ch, k * k * n_filters, rng);
    weight_grad = zeros_like(weight);
    bias_grad = zeros_like(bias);
  }
};

struct Dense {
  int in_units = 0, out_units = 0;
  Tensor weight, bias, weight_grad, bias_grad;

  Dense() = default;
  Dense(int n_in, int n_out, Rng& rng) : in_units(n_in), out_units(n_out) {
    weight = Tensor({static_cast<std::size_t>(n_in), static_cast<std::size_t>(n_out)});
    bias = Tensor({static_cast<std::size_t>(n_out)});
    glorot_uniform(weight, n_in, n_out, rng);
    weight_grad = zeros_like(weight);
    bias_grad = zeros_like(bias);
  }
};

struct LeakyRelu {
  double slope = 0.01;
};

struct Reshape {
  std::vector<std::size_t> shape;
};

using Layer = std::variant<Conv2d, Dense, LeakyRelu, Reshape>;

inline nlohmann::json layer_spec(const Layer& layer) {
  return std::visit(
      [](const auto& l) -> nlohmann::json {
        using T = std::decay_t<decltype(l)>;
        if constexpr (std::is_same_v<T, Conv2d>)
          return {{"kind", "conv2d"}, {"in", l.in_channels}, {"filters", l.filters}, {"size", l.kernel}};
        else if constexpr (std::is_same_v<T, Dense>)
          return {{"kind", "dense"}, {"in", l.in_units}, {"out", l.out_units}};
        else if constexpr (std::is_same_v<T, LeakyRelu>)
          return {{"kind", "leaky_relu"}, {"slope", l.slope}};
        else
          return {{"kind", "reshape"}, {"shape", l.shape}};
      },
      layer);
}

/// Activations recorded by a forward pass: activations[i] is the input of layer i,
/// activations.back() the network output.
struct ForwardCache {
  std::vector<Tensor> activations;
  const Tensor& output() const { return activations.back(); }
};

class Sequential {
 public:
  std::vector<Layer> layers;

  ForwardCache forward(const Tensor& input) const {
    ForwardCache cache;
    cache.activations.reserve(layers.size() + 1);
    cache.activations.push_back(input);
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const Tensor& in = cache.activations.back();
      const std::string name = "layer " + std::to_string(i);
      Tensor out = std::visit(
          [&](const auto& l) -> Tensor {
            using T = std::decay_t<decltype(l)>;
            if constexpr (std::is_same_v<T, Conv2d>)
              return conv2d_forward(in, l.weight, l.bias, name);
            else if constexpr (std::is_same_v<T, Dense>)
              return dense_forward(in, l.weight, l.bias, name);
            else if constexpr (std::is_same_v<T, LeakyRelu>)
              return leaky_relu_forward(in, l.slope);
            else {
              if (Tensor::count(l.shape) != in.size()) throw ShapeError(name + ": reshape size mismatch");
              return Tensor(l.shape, in.values);
            }
          },
          layers[i]);
      cache.activations.push_back(std::move(out));
    }
    return cache;
  }

  Tensor predict(const Tensor& input) const { return forward(input).activations.back(); }

  /// Accumulates parameter gradients for d(loss)/d(output) = `dout`.
  void backward(const ForwardCache& cache, Tensor dout, bool need_input_grad = false) {
    for (std::size_t n = layers.size(); n-- > 0;) {
      const Tensor& in = cache.activations[n];
      const bool want_din = n > 0 || need_input_grad;
      const std::string name = "layer " + std::to_string(n);
      dout = std::visit(
          [&](auto& l) -> Tensor {
            using T = std::decay_t<decltype(l)>;
            if constexpr (std::is_same_v<T, Conv2d>)
              return conv2d_backward_accumulate(in, l.weight, l.bias, dout, l.weight_grad, l.bias_grad, want_din, name);
            else if constexpr (std::is_same_v<T, Dense>) {
              Tensor d = dense_backward_accumulate(in, l.weight, dout, l.weight_grad, l.bias_grad, want_din, name);
              return d;
            } else if constexpr (std::is_same_v<T, LeakyRelu>)
              return leaky_relu_backward(in, dout, l.slope);
            else
              return Tensor(in.shape, std::move(dout.values));
          },
          layers[n]);
      if (!want_din) break;
    }
    last_input_grad_ = need_input_grad ? std::move(dout) : Tensor();
  }

  const Tensor& input_grad() const { return last_input_grad_; }

  std::vector<Tensor*> params() {
    std::vector<Tensor*> out;
    for (auto& layer : layers)
      std::visit(
          [&](auto& l) {
            using T = std::decay_t<decltype(l)>;
            if constexpr (std::is_same_v<T, Conv2d> || std::is_same_v<T, Dense>) {
              out.push_back(&l.weight);
              out.push_back(&l.bias);
            }
          },
          layer);
    return out;
  }

  std::vector<Tensor*> grads() {
    std::vector<Tensor*> out;
    for (auto& layer : layers)
      std::visit(
          [&](auto& l) {
            using T = std::decay_t<decltype(l)>;
            if constexpr (std::is_same_v<T, Conv2d> || std::is_same_v<T, Dense>) {
              out.push_back(&l.weight_grad);
              out.push_back(&l.bias_grad);
            }
          },
          layer);
    return out;
  }

  void zero_grad() {
    for (Tensor* g : grads()) g->fill(0.0);
  }

  nlohmann::json spec() const {
    auto arr = nlohmann::json::array();
    for (const auto& l : layers) arr.push_back(layer_spec(l));
    return arr;
  }

 private:
  Tensor last_input_grad_;
};

}  // namespace morai::nn
