#include "keyrate/fading.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace keyrate {

ChannelParams::ChannelParams(double rho, double var_h, double var_g)
    : rho_(rho), var_h_(var_h), var_g_(var_g) {
  if (!(rho >= 0.0 && rho < 1.0)) {
    throw InvalidArgument("rho must lie in [0, 1), got " + std::to_string(rho));
  }
  if (!(var_h > 0.0) || !std::isfinite(var_h)) {
    throw InvalidArgument("var_h must be positive and finite");
  }
  if (!(var_g > 0.0) || !std::isfinite(var_g)) {
    throw InvalidArgument("var_g must be positive and finite");
  }
}

std::complex<double> complex_normal(double u1, double u2, double variance) {
  const double radius = std::sqrt(-variance * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  return {radius * std::cos(angle), radius * std::sin(angle)};
}

GainSample sample_gain_tuple(const ChannelParams& params, UniformSource& source) {
  double u[kUniformsPerGainTuple];
  for (auto& value : u) value = source.next();

  GainSample sample;
  sample.h_ab = complex_normal(u[0], u[1], params.var_h());
  const auto innovation = complex_normal(u[2], u[3], params.var_h());
  const double rho = params.rho();
  sample.h_ba = rho * sample.h_ab + std::sqrt(1.0 - rho * rho) * innovation;
  sample.g_ae = complex_normal(u[4], u[5], params.var_g());
  sample.g_be = complex_normal(u[6], u[7], params.var_g());
  return sample;
}

GainSample sample_gain_tuple(const ChannelParams& params, const RngStream& stream, std::uint64_t index) {
  UniformSource source(stream, index * kUniformsPerGainTuple);
  return sample_gain_tuple(params, source);
}

double sample_exp_magnitude(UniformSource& source) { return -std::log(source.next()); }

}  // namespace keyrate
