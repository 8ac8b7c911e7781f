#pragma once

// Hot loops of the expectation engine. Every integrand the rate formulas need
// is an instance of
//
//     f(x, y) = log2(1 + a*x / (c + b*y)),   x, y >= 0,
//
// evaluated over arrays of Exp(1) variates (Monte Carlo) or quadrature nodes.
// A scalar reference implementation is always available; an AVX2+FMA variant
// is selected at runtime when the CPU supports it.

#include <cstddef>
#include <span>
#include <string_view>

namespace keyrate::simd {

struct RatioCoeffs {
  double a = 0.0;
  double b = 0.0;
  double c = 1.0;
};

struct Moments {
  double sum = 0.0;
  double sum_sq = 0.0;
  std::size_t count = 0;
};

enum class Isa { scalar, avx2 };

std::string_view to_string(Isa isa);

struct KernelTable {
  Isa isa;

  /// Sum and sum of squares of f(x[i], y[i]).
  Moments (*ratio_moments)(RatioCoeffs, std::span<const double> x, std::span<const double> y);

  /// Moments of antithetic pair means (f(x[i],y[i]) + f(xa[i],ya[i])) / 2.
  Moments (*ratio_pair_moments)(RatioCoeffs, std::span<const double> x, std::span<const double> y,
                                std::span<const double> xa, std::span<const double> ya);

  /// sum_i w[i] * f(x[i], y[i]).
  double (*ratio_dot)(RatioCoeffs, std::span<const double> x, std::span<const double> y,
                      std::span<const double> w);

  /// out[i] = f(x[i], y[i]).
  void (*ratio_eval)(RatioCoeffs, std::span<const double> x, std::span<const double> y,
                     std::span<double> out);
};

bool isa_supported(Isa isa);

/// Table for `isa`, or nullptr when the CPU (or the build) lacks it.
const KernelTable* kernels_for(Isa isa);

/**
 * The table used by the library. Chosen once: the best supported ISA, unless
 * KEYRATE_KERNEL=scalar|avx2 names another supported one.
 */
const KernelTable& active_kernels();

namespace detail {
const KernelTable& scalar_table();
#if defined(__x86_64__) || defined(_M_X64)
const KernelTable& avx2_table();
#endif
}  // namespace detail

}  // namespace keyrate::simd
