#pragma once

#include <vector>

#include "keyrate/expectation.hpp"

namespace keyrate {

/**
 * Per-state power policy for one link of the upper bound.
 *
 * Maximizes E_h[phi(P(h), |h|^2)] subject to E[P(h)] <= P, where
 * phi(p, x) = E_g[log2(1 + p x / (1 + p |g|^2))]. |h|^2 is discretized into
 * equiprobable quantile cells of its exponential law, each represented by its
 * conditional mean.
 */
struct PowerPolicy {
  std::vector<double> gains;   ///< |h|^2 per cell, increasing
  std::vector<double> powers;  ///< P(h) per cell; mean equals the budget
  double value = 0.0;          ///< primal objective of `powers` (bits)
  double dual_bound = 0.0;     ///< Lagrangian dual at `lambda` (bits)
  double dual_gap = 0.0;       ///< dual_bound - value
  double lambda = 0.0;
  double constant_value = 0.0;  ///< objective of P(h) = P on the same grid
  int bisections = 0;
  bool converged = false;  ///< dual_gap below cfg.power_gap_tol
};

/// Solves the policy for budget `power`, |h|^2 ~ var_h Exp(1), |g|^2 ~ var_g Exp(1).
/// Results are cached per (power, var_h, var_g, grid, order).
PowerPolicy optimize_power_allocation(double power, double var_h, double var_g, const EvalConfig& cfg);

/// Quantile-cell conditional means of Exp(1) for `cells` equiprobable cells.
std::vector<double> exp_quantile_means(std::size_t cells);

}  // namespace keyrate
