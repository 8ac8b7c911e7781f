#include <cmath>
#include <numbers>

#include "keyrate/kernels.hpp"

namespace keyrate::simd {

namespace {

inline double ratio_term(const RatioCoeffs& k, double x, double y) {
  return std::log1p(k.a * x / (k.c + k.b * y)) * std::numbers::log2e;
}

Moments moments(RatioCoeffs k, std::span<const double> x, std::span<const double> y) {
  Moments m;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double v = ratio_term(k, x[i], y[i]);
    m.sum += v;
    m.sum_sq += v * v;
  }
  m.count = x.size();
  return m;
}

Moments pair_moments(RatioCoeffs k, std::span<const double> x, std::span<const double> y,
                     std::span<const double> xa, std::span<const double> ya) {
  Moments m;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double v = 0.5 * (ratio_term(k, x[i], y[i]) + ratio_term(k, xa[i], ya[i]));
    m.sum += v;
    m.sum_sq += v * v;
  }
  m.count = x.size();
  return m;
}

double dot(RatioCoeffs k, std::span<const double> x, std::span<const double> y,
           std::span<const double> w) {
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) acc += w[i] * ratio_term(k, x[i], y[i]);
  return acc;
}

void eval(RatioCoeffs k, std::span<const double> x, std::span<const double> y, std::span<double> out) {
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = ratio_term(k, x[i], y[i]);
}

}  // namespace

const KernelTable& detail::scalar_table() {
  static const KernelTable table{Isa::scalar, &moments, &pair_moments, &dot, &eval};
  return table;
}

}  // namespace keyrate::simd
