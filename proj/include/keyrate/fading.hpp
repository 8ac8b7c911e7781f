#pragma once

#include <complex>
#include <cstdint>
#include <stdexcept>

#include "keyrate/rng.hpp"

namespace keyrate {

/// Thrown for parameter sets that violate a documented invariant.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/**
 * Fading statistics of the two-way link and the eavesdropper.
 *
 * h_AB, h_BA ~ CN(0, var_h) with correlation rho; g_AE, g_BE ~ CN(0, var_g)
 * independent of everything else. rho = 1 is rejected: the training rate
 * -log2(1-rho^2)/T diverges there.
 */
class ChannelParams {
 public:
  ChannelParams() = default;
  ChannelParams(double rho, double var_h = 1.0, double var_g = 1.0);

  [[nodiscard]] double rho() const { return rho_; }
  [[nodiscard]] double var_h() const { return var_h_; }
  [[nodiscard]] double var_g() const { return var_g_; }

 private:
  double rho_ = 0.0;
  double var_h_ = 1.0;
  double var_g_ = 1.0;
};

struct GainSample {
  std::complex<double> h_ab;
  std::complex<double> h_ba;
  std::complex<double> g_ae;
  std::complex<double> g_be;
};

/// Uniform draws consumed per gain tuple (four Box-Muller pairs).
inline constexpr std::uint64_t kUniformsPerGainTuple = 8;

/// CN(0, variance) from two uniforms by Box-Muller: |z|^2 = -variance*ln(u1).
std::complex<double> complex_normal(double u1, double u2, double variance);

/// Draws the next gain tuple; advances `source` by kUniformsPerGainTuple.
GainSample sample_gain_tuple(const ChannelParams& params, UniformSource& source);

/// Gain tuple number `index` of `stream`, independent of any cursor.
GainSample sample_gain_tuple(const ChannelParams& params, const RngStream& stream, std::uint64_t index);

/// Exp(1) variate -ln(U); advances `source` by one draw.
double sample_exp_magnitude(UniformSource& source);

}  // namespace keyrate
