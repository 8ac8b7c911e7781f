#pragma once

#include <vector>

namespace keyrate {

struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;

  [[nodiscard]] std::size_t size() const { return nodes.size(); }
};

/// n-point Gauss-Legendre on [-1, 1] (Golub-Welsch).
const QuadratureRule& gauss_legendre(int n);

/// n-point Gauss-Laguerre for the weight e^{-x} on [0, inf) (Golub-Welsch).
const QuadratureRule& gauss_laguerre(int n);

/**
 * Rule for E[h(X)], X ~ Exp(1), with weights summing to 1.
 *
 * log(1 + c x)-type integrands have a kink at x ~ 1/c, which plain
 * Gauss-Laguerre cannot resolve once c is large. The rule covers [0, 1] with
 * Gauss-Legendre panels on dyadic intervals reaching `feature_scale`/256 and
 * [1, inf) with a shifted Gauss-Laguerre rule of `order` points. Panels carry
 * max(4, order/4) points each.
 */
QuadratureRule exp_rule(int order, double feature_scale = 1.0);

/**
 * Rule on (0, 1/2] for integrands with a log-type feature near
 * `feature_scale` or an integrable log singularity at 0: dyadic
 * Gauss-Legendre panels graded toward 0, at least `min_octaves` deep.
 * Integrals over (0, 1) with features at both ends are split at 1/2 and the
 * right half is written in s = 1 - t, which keeps nodes near t = 1 exact.
 */
QuadratureRule half_unit_rule(int order, double feature_scale, int min_octaves = 0);

}  // namespace keyrate
