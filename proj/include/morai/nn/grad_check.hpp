#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <vector>

#include "morai/nn/tensor.hpp"
#include "morai/rng.hpp"

namespace morai::nn {

struct GradCheckOptions {
  double epsilon = 1e-4;
  // Entries checked per parameter tensor; larger tensors are sampled.
  std::size_t max_entries_per_tensor = 64;
  std::uint64_t seed = 0;
  // Smallest denominator of the relative error; entries with gradients below it are
  // compared in absolute terms.
  double min_scale = 1e-8;
};

/// Compares analytic gradients with central differences. `loss(with_grad)` must return
/// the loss and, when `with_grad` is set, leave fresh gradients in `grads`.
/// Returns the max over checked entries of |analytic - numeric| / max(|analytic|, |numeric|, min_scale).
template <class LossFn>
double grad_check(const std::vector<Tensor*>& params, const std::vector<Tensor*>& grads, LossFn&& loss,
                  const GradCheckOptions& opts = {}) {
  loss(true);
  std::vector<Tensor> analytic;
  for (const Tensor* g : grads) analytic.push_back(*g);
  Rng rng(opts.seed);
  double worst = 0.0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor& p = *params[k];
    std::vector<std::size_t> idx(p.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    if (idx.size() > opts.max_entries_per_tensor) {
      std::shuffle(idx.begin(), idx.end(), rng);
      idx.resize(opts.max_entries_per_tensor);
    }
    for (std::size_t i : idx) {
      const double saved = p[i];
      p[i] = saved + opts.epsilon;
      const double up = loss(false);
      p[i] = saved - opts.epsilon;
      const double down = loss(false);
      p[i] = saved;
      const double numeric = (up - down) / (2.0 * opts.epsilon);
      const double a = analytic[k][i];
      const double denom = std::max({std::abs(a), std::abs(numeric), opts.min_scale});
      worst = std::max(worst, std::abs(a - numeric) / denom);
    }
  }
  return worst;
}

}  // namespace morai::nn
