#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "morai/nn/layers.hpp"
#include "morai/nn/tensor.hpp"
#include "morai/rng.hpp"

namespace morai::nn {

namespace detail {
inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
}  // namespace detail

/// Single-direction LSTM over one-hot inputs. Gate rows are ordered input, forget, cell, output;
/// weights are [4H][V + H] with the one-hot input columns first.
struct LstmDirection {
  int vocab = 0;
  int hidden = 0;
  Tensor weight, bias, weight_grad, bias_grad;

  LstmDirection() = default;
  LstmDirection(int v, int h, Rng& rng) : vocab(v), hidden(h) {
    const auto rows = static_cast<std::size_t>(4 * h), cols = static_cast<std::size_t>(v + h);
    weight = Tensor({rows, cols});
    bias = Tensor({rows});
    glorot_uniform(weight, v + h, 4 * h, rng);
    weight_grad = zeros_like(weight);
    bias_grad = zeros_like(bias);
  }
  std::size_t cols() const { return static_cast<std::size_t>(vocab + hidden); }
};

/// Per-step activations of one direction, in processing order.
struct LstmTrace {
  // Each entry is H wide.
  std::vector<std::vector<double>> gate_i, gate_f, gate_g, gate_o, cell, cell_tanh, hidden;
};

namespace detail {

inline LstmTrace lstm_run(const LstmDirection& d, std::span<const int> tokens) {
  const auto H = static_cast<std::size_t>(d.hidden);
  const std::size_t cols = d.cols();
  LstmTrace tr;
  const std::size_t n = tokens.size();
  for (auto* v : {&tr.gate_i, &tr.gate_f, &tr.gate_g, &tr.gate_o, &tr.cell, &tr.cell_tanh, &tr.hidden})
    v->assign(n, std::vector<double>(H));
  std::vector<double> h_prev(H, 0.0), c_prev(H, 0.0), z(4 * H);
  for (std::size_t t = 0; t < n; ++t) {
    const auto tok = static_cast<std::size_t>(tokens[t]);
    for (std::size_t r = 0; r < 4 * H; ++r) {
      const double* w = d.weight.data() + r * cols;
      double acc = d.bias[r] + w[tok];
      const double* wh = w + d.vocab;
#pragma omp simd reduction(+ : acc)
      for (std::size_t j = 0; j < H; ++j) acc += wh[j] * h_prev[j];
      z[r] = acc;
    }
    for (std::size_t j = 0; j < H; ++j) {
      const double i = sigmoid(z[j]), f = sigmoid(z[H + j]), g = std::tanh(z[2 * H + j]), o = sigmoid(z[3 * H + j]);
      const double c = f * c_prev[j] + i * g;
      const double tc = std::tanh(c);
      tr.gate_i[t][j] = i;
      tr.gate_f[t][j] = f;
      tr.gate_g[t][j] = g;
      tr.gate_o[t][j] = o;
      tr.cell[t][j] = c;
      tr.cell_tanh[t][j] = tc;
      tr.hidden[t][j] = o * tc;
    }
    h_prev = tr.hidden[t];
    c_prev = tr.cell[t];
  }
  return tr;
}

// BPTT for one direction. dh[t] is the loss gradient arriving at hidden[t] from outside.
inline void lstm_backprop(LstmDirection& d, std::span<const int> tokens, const LstmTrace& tr,
                          const std::vector<std::vector<double>>& dh) {
  const auto H = static_cast<std::size_t>(d.hidden);
  const std::size_t cols = d.cols();
  const std::size_t n = tokens.size();
  std::vector<double> dh_next(H, 0.0), dc_next(H, 0.0), dz(4 * H);
  for (std::size_t t = n; t-- > 0;) {
    for (std::size_t j = 0; j < H; ++j) {
      const double dht = dh[t][j] + dh_next[j];
      const double i = tr.gate_i[t][j], f = tr.gate_f[t][j], g = tr.gate_g[t][j], o = tr.gate_o[t][j];
      const double tc = tr.cell_tanh[t][j];
      const double c_prev = t > 0 ? tr.cell[t - 1][j] : 0.0;
      const double d_o = dht * tc;
      const double dc = dc_next[j] + dht * o * (1.0 - tc * tc);
      dz[j] = dc * g * i * (1.0 - i);
      dz[H + j] = dc * c_prev * f * (1.0 - f);
      dz[2 * H + j] = dc * i * (1.0 - g * g);
      dz[3 * H + j] = d_o * o * (1.0 - o);
      dc_next[j] = dc * f;
    }
    const auto tok = static_cast<std::size_t>(tokens[t]);
    std::fill(dh_next.begin(), dh_next.end(), 0.0);
    const std::vector<double>* h_prev = t > 0 ? &tr.hidden[t - 1] : nullptr;
    for (std::size_t r = 0; r < 4 * H; ++r) {
      const double g = dz[r];
      d.bias_grad[r] += g;
      double* gw = d.weight_grad.data() + r * cols;
      gw[tok] += g;
      const double* w = d.weight.data() + r * cols + d.vocab;
      if (h_prev) {
        double* gwh = gw + d.vocab;
        const double* hp = h_prev->data();
#pragma omp simd
        for (std::size_t j = 0; j < H; ++j) gwh[j] += g * hp[j];
      }
#pragma omp simd
      for (std::size_t j = 0; j < H; ++j) dh_next[j] += w[j] * g;
    }
  }
}

}  // namespace detail

/// Hidden states of both directions for a sequence. forward[t] has read tokens[0..t],
/// backward[t] has read tokens[t..n-1].
struct BiEncoding {
  std::vector<int> tokens;
  LstmTrace forward, backward;
  std::size_t size() const { return tokens.size(); }
};

/// Bidirectional LSTM with a softmax head that predicts token t from the forward state
/// before it and the backward state after it.
struct BiLstm {
  int vocab = 0;
  int hidden = 0;
  LstmDirection fwd, bwd;
  Tensor out_weight, out_bias, out_weight_grad, out_bias_grad;  // [V][2H], [V]

  BiLstm() = default;
  BiLstm(int v, int h, Rng& rng) : vocab(v), hidden(h), fwd(v, h, rng), bwd(v, h, rng) {
    out_weight = Tensor({static_cast<std::size_t>(v), static_cast<std::size_t>(2 * h)});
    out_bias = Tensor({static_cast<std::size_t>(v)});
    glorot_uniform(out_weight, 2 * h, v, rng);
    out_weight_grad = zeros_like(out_weight);
    out_bias_grad = zeros_like(out_bias);
  }

  std::vector<Tensor*> params() {
    return {&fwd.weight, &fwd.bias, &bwd.weight, &bwd.bias, &out_weight, &out_bias};
  }
  std::vector<Tensor*> grads() {
    return {&fwd.weight_grad, &fwd.bias_grad, &bwd.weight_grad, &bwd.bias_grad, &out_weight_grad, &out_bias_grad};
  }
  void zero_grad() {
    for (Tensor* g : grads()) g->fill(0.0);
  }
};

inline BiEncoding lstm_bidirectional_encode(const BiLstm& m, std::span<const int> tokens) {
  if (tokens.empty()) throw ContractError("lstm: empty sequence");
  for (int t : tokens)
    if (t < 0 || t >= m.vocab) throw ContractError("lstm: token outside the alphabet");
  BiEncoding enc;
  enc.tokens.assign(tokens.begin(), tokens.end());
  enc.forward = detail::lstm_run(m.fwd, enc.tokens);
  std::vector<int> reversed(enc.tokens.rbegin(), enc.tokens.rend());
  LstmTrace rev = detail::lstm_run(m.bwd, reversed);
  // Store the backward direction by sequence position.
  auto flip = [](std::vector<std::vector<double>>& v) { std::reverse(v.begin(), v.end()); };
  for (auto* v : {&rev.gate_i, &rev.gate_f, &rev.gate_g, &rev.gate_o, &rev.cell, &rev.cell_tanh, &rev.hidden}) flip(*v);
  enc.backward = std::move(rev);
  return enc;
}

/// Context for predicting position t: [forward hidden at t-1, backward hidden at t+1],
/// zeros past either end.
inline std::vector<double> context_at(const BiLstm& m, const BiEncoding& enc, std::size_t t) {
  const auto H = static_cast<std::size_t>(m.hidden);
  std::vector<double> ctx(2 * H, 0.0);
  if (t > 0) std::copy_n(enc.forward.hidden[t - 1].begin(), H, ctx.begin());
  if (t + 1 < enc.size()) std::copy_n(enc.backward.hidden[t + 1].begin(), H, ctx.begin() + static_cast<std::ptrdiff_t>(H));
  return ctx;
}

inline std::vector<double> softmax(std::vector<double> logits) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double& v : logits) sum += (v = std::exp(v - mx));
  for (double& v : logits) v /= sum;
  return logits;
}

/// Distribution over the alphabet at position t.
inline std::vector<double> predict_token(const BiLstm& m, const BiEncoding& enc, std::size_t t) {
  const auto ctx = context_at(m, enc, t);
  const std::size_t C = ctx.size();
  std::vector<double> logits(static_cast<std::size_t>(m.vocab));
  for (std::size_t v = 0; v < logits.size(); ++v) {
    const double* w = m.out_weight.data() + v * C;
    double acc = m.out_bias[v];
    for (std::size_t j = 0; j < C; ++j) acc += w[j] * ctx[j];
    logits[v] = acc;
  }
  return softmax(std::move(logits));
}

/// Mean cross-entropy of predicting every token from its bidirectional context.
/// Accumulates parameter gradients when `with_grad`.
inline double lstm_sequence_loss(BiLstm& m, std::span<const int> tokens, bool with_grad) {
  const BiEncoding enc = lstm_bidirectional_encode(m, tokens);
  const std::size_t n = enc.size();
  const auto H = static_cast<std::size_t>(m.hidden);
  const double scale = 1.0 / static_cast<double>(n);
  double loss = 0.0;
  std::vector<std::vector<double>> dh_f(n, std::vector<double>(H, 0.0)), dh_b(n, std::vector<double>(H, 0.0));
  for (std::size_t t = 0; t < n; ++t) {
    const auto p = predict_token(m, enc, t);
    const auto target = static_cast<std::size_t>(enc.tokens[t]);
    loss -= std::log(std::max(p[target], 1e-300));
    if (!with_grad) continue;
    const auto ctx = context_at(m, enc, t);
    for (std::size_t v = 0; v < p.size(); ++v) {
      const double dl = (p[v] - (v == target ? 1.0 : 0.0)) * scale;
      m.out_bias_grad[v] += dl;
      double* gw = m.out_weight_grad.data() + v * 2 * H;
      const double* w = m.out_weight.data() + v * 2 * H;
      for (std::size_t j = 0; j < 2 * H; ++j) gw[j] += dl * ctx[j];
      if (t > 0)
        for (std::size_t j = 0; j < H; ++j) dh_f[t - 1][j] += dl * w[j];
      if (t + 1 < n)
        for (std::size_t j = 0; j < H; ++j) dh_b[t + 1][j] += dl * w[H + j];
    }
  }
  if (with_grad) {
    detail::lstm_backprop(m.fwd, enc.tokens, enc.forward, dh_f);
    // The backward direction ran over the reversed sequence.
    std::vector<int> reversed(enc.tokens.rbegin(), enc.tokens.rend());
    LstmTrace rev = enc.backward;
    for (auto* v : {&rev.gate_i, &rev.gate_f, &rev.gate_g, &rev.gate_o, &rev.cell, &rev.cell_tanh, &rev.hidden})
      std::reverse(v->begin(), v->end());
    std::reverse(dh_b.begin(), dh_b.end());
    detail::lstm_backprop(m.bwd, reversed, rev, dh_b);
  }
  return loss * scale;
}

}  // namespace morai::nn
