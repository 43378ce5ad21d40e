#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "morai/nn/tensor.hpp"

namespace morai::nn {

struct AdamConfig {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct OptimizerState {
  std::int64_t step = 0;
  std::vector<Tensor> first_moment;
  std::vector<Tensor> second_moment;

  bool empty() const { return first_moment.empty(); }
};

inline OptimizerState make_optimizer_state(const std::vector<Tensor*>& params) {
  OptimizerState s;
  for (const Tensor* p : params) {
    s.first_moment.push_back(zeros_like(*p));
    s.second_moment.push_back(zeros_like(*p));
  }
  return s;
}

/// One Adam update with bias correction. Throws NumericError (leaving everything
/// untouched) if any gradient entry is not finite.
inline void adam_step(const std::vector<Tensor*>& params, const std::vector<Tensor*>& grads, OptimizerState& state,
                      const AdamConfig& cfg) {
  if (params.size() != grads.size()) throw ShapeError("adam: parameter/gradient count mismatch");
  if (state.empty()) state = make_optimizer_state(params);
  if (state.first_moment.size() != params.size()) throw ShapeError("adam: optimizer state does not match parameters");
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (params[k]->size() != grads[k]->size() || state.first_moment[k].size() != params[k]->size())
      throw ShapeError("adam: shape mismatch for parameter " + std::to_string(k));
    if (!grads[k]->all_finite()) throw NumericError("adam: non-finite gradient for parameter " + std::to_string(k));
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  // lr * (m / c1) / (sqrt(v / c2) + eps), with the bias corrections folded into constants.
  const double step = cfg.lr / (1.0 - std::pow(cfg.beta1, t));
  const double inv_sqrt_c2 = 1.0 / std::sqrt(1.0 - std::pow(cfg.beta2, t));
  const double b1 = cfg.beta1, b2 = cfg.beta2, eps = cfg.eps;
  for (std::size_t k = 0; k < params.size(); ++k) {
    double* p = params[k]->data();
    const double* g = grads[k]->data();
    double* m = state.first_moment[k].data();
    double* v = state.second_moment[k].data();
    const std::size_t n = params[k]->size();
#pragma omp simd
    for (std::size_t i = 0; i < n; ++i) {
      const double gi = g[i];
      const double mi = b1 * m[i] + (1.0 - b1) * gi;
      const double vi = b2 * v[i] + (1.0 - b2) * gi * gi;
      m[i] = mi;
      v[i] = vi;
      p[i] -= step * mi / (std::sqrt(vi) * inv_sqrt_c2 + eps);
    }
  }
}

}  // namespace morai::nn
