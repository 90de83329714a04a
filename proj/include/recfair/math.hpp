#pragma once

#include <Eigen/Core>
#include <cmath>

namespace recfair {

inline double sigmoid(double z) {
  if (z >= 0.0) {
    return 1.0 / (1.0 + std::exp(-z));
  }
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// Elementwise sigmoid over any Eigen array expression.
template <typename Derived>
auto sigmoid(const Eigen::ArrayBase<Derived>& z) {
  return z.derived().unaryExpr([](double v) { return sigmoid(v); });
}

// log(1 + exp(z)) without overflow; log(sigmoid(z)) = -log1pexp(-z).
inline double log1pexp(double z) {
  if (z > 0.0) return z + std::log1p(std::exp(-z));
  return std::log1p(std::exp(z));
}

// Soft-threshold toward zero: shrink(v, t) = sign(v) * max(|v| - t, 0).
inline double soft_threshold(double v, double t) {
  if (v > t) return v - t;
  if (v < -t) return v + t;
  return 0.0;
}

}  // namespace recfair
