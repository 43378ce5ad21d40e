#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "morai/errors.hpp"

namespace morai::nn {

/// Dense row-major array of doubles.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> values;

  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> dims, double fill = 0.0)
      : shape(std::move(dims)), values(count(shape), fill) {}
  Tensor(std::vector<std::size_t> dims, std::vector<double> data) : shape(std::move(dims)), values(std::move(data)) {
    if (values.size() != count(shape)) throw ShapeError("tensor data does not match its shape");
  }

  static std::size_t count(const std::vector<std::size_t>& dims) {
    return std::accumulate(dims.begin(), dims.end(), std::size_t{1}, std::multiplies<>());
  }

  std::size_t size() const { return values.size(); }
  double* data() { return values.data(); }
  const double* data() const { return values.data(); }
  double& operator[](std::size_t i) { return values[i]; }
  double operator[](std::size_t i) const { return values[i]; }

  void fill(double v) { std::fill(values.begin(), values.end(), v); }
  bool all_finite() const {
    // x * 0 is 0 for finite x and NaN otherwise.
    double acc = 0.0;
    const double* p = values.data();
    const std::size_t n = values.size();
#pragma omp simd reduction(+ : acc)
    for (std::size_t i = 0; i < n; ++i) acc += p[i] * 0.0;
    return acc == 0.0;
  }

  std::string shape_string() const {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) s += (i ? "x" : "") + std::to_string(shape[i]);
    return s + "]";
  }

  bool operator==(const Tensor&) const = default;
};

inline Tensor zeros_like(const Tensor& t) { return Tensor(t.shape); }

}  // namespace morai::nn
