#include "keyrate/power_allocation.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <numeric>
#include <tuple>

#include "keyrate/parallel.hpp"
#include "keyrate/quadrature.hpp"

namespace keyrate {

namespace {

constexpr double kSearchSpan = 1e4;
constexpr double kGoldenRelTol = 1e-10;
constexpr int kGoldenMaxIter = 200;

// phi(p, x) on a fixed rule for |g|^2 / var_g.
class PhiEvaluator {
 public:
  PhiEvaluator(double var_g, double max_power, int order)
      : var_g_(var_g),
        rule_(exp_rule(order, std::min(1.0, 1.0 / (max_power * var_g)))),
        ones_(rule_.size(), 1.0),
        kernels_(simd::active_kernels()) {}

  [[nodiscard]] double operator()(double p, double x) const {
    if (p <= 0.0 || x <= 0.0) return 0.0;
    return kernels_.ratio_dot({p * x, p * var_g_, 1.0}, ones_, rule_.nodes, rule_.weights);
  }

 private:
  double var_g_;
  QuadratureRule rule_;
  std::vector<double> ones_;
  const simd::KernelTable& kernels_;
};

struct CellOptimum {
  double power = 0.0;
  double phi = 0.0;
};

// argmax_p phi(p, x) - lambda p on [0, hi]; concave, so golden-section applies.
// Ties with p = 0 resolve to the smaller power.
CellOptimum maximize_cell(const PhiEvaluator& phi, double x, double lambda, double hi) {
  if (x / std::numbers::ln2 <= lambda) return {};
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double lo = 0.0;
  double a = hi - inv_phi * (hi - lo);
  double b = lo + inv_phi * (hi - lo);
  double fa = phi(a, x) - lambda * a;
  double fb = phi(b, x) - lambda * b;
  for (int it = 0; it < kGoldenMaxIter && hi - lo > kGoldenRelTol * (lo + hi); ++it) {
    if (fa >= fb) {
      hi = b;
      b = a;
      fb = fa;
      a = hi - inv_phi * (hi - lo);
      fa = phi(a, x) - lambda * a;
    } else {
      lo = a;
      a = b;
      fa = fb;
      b = lo + inv_phi * (hi - lo);
      fb = phi(b, x) - lambda * b;
    }
  }
  const double p = 0.5 * (lo + hi);
  const double v = phi(p, x);
  if (v - lambda * p <= 0.0) return {};
  return {p, v};
}

struct Sweep {
  std::vector<CellOptimum> cells;
  double mean_power = 0.0;
  double mean_lagrangian = 0.0;
};

Sweep sweep_cells(const PhiEvaluator& phi, const std::vector<double>& gains, double lambda, double hi,
                  unsigned workers) {
  Sweep s;
  s.cells.resize(gains.size());
  parallel_for(gains.size(), workers, [&](std::size_t k) { s.cells[k] = maximize_cell(phi, gains[k], lambda, hi); });
  const auto n = static_cast<double>(gains.size());
  for (const auto& c : s.cells) {
    s.mean_power += c.power / n;
    s.mean_lagrangian += (c.phi - lambda * c.power) / n;
  }
  return s;
}

using CacheKey = std::tuple<double, double, double, std::size_t, int, double, int>;

std::mutex cache_mu;
std::map<CacheKey, PowerPolicy>& cache() {
  static std::map<CacheKey, PowerPolicy> c;
  return c;
}

PowerPolicy solve(double power, double var_h, double var_g, const EvalConfig& cfg) {
  PowerPolicy out;
  out.gains = exp_quantile_means(cfg.power_grid);
  for (auto& g : out.gains) g *= var_h;
  const auto n = static_cast<double>(out.gains.size());
  const double hi = kSearchSpan * power;
  const PhiEvaluator phi(var_g, hi, cfg.power_quadrature_order);

  for (double g : out.gains) out.constant_value += phi(power, g) / n;

  double lam_lo = 0.0;  // spends more than the budget
  double lam_hi = out.gains.back() / std::numbers::ln2;  // spends nothing
  Sweep under = sweep_cells(phi, out.gains, lam_hi, hi, cfg.workers);
  double under_lambda = lam_hi;
  for (out.bisections = 0; out.bisections < cfg.power_max_bisections; ++out.bisections) {
    const double mid = 0.5 * (lam_lo + lam_hi);
    if (mid <= lam_lo || mid >= lam_hi) break;
    Sweep s = sweep_cells(phi, out.gains, mid, hi, cfg.workers);
    if (s.mean_power > power) {
      lam_lo = mid;
    } else {
      lam_hi = mid;
      under = std::move(s);
      under_lambda = mid;
      if (power - under.mean_power <= cfg.power_budget_tol * power) break;
    }
  }

  out.lambda = under_lambda;
  out.dual_bound = under.mean_lagrangian + under_lambda * power;
  out.powers.resize(out.gains.size());
  if (under.mean_power > 0.0) {
    const double scale = power / under.mean_power;
    for (std::size_t k = 0; k < out.powers.size(); ++k) out.powers[k] = under.cells[k].power * scale;
  } else {
    out.powers.back() = power * n;
  }
  for (std::size_t k = 0; k < out.powers.size(); ++k) out.value += phi(out.powers[k], out.gains[k]) / n;
  out.dual_gap = std::max(0.0, out.dual_bound - out.value);
  out.converged = out.dual_gap < cfg.power_gap_tol;
  return out;
}

}  // namespace

std::vector<double> exp_quantile_means(std::size_t cells) {
  if (cells == 0) throw InvalidArgument("power grid needs at least one cell");
  std::vector<double> means(cells);
  const auto n = static_cast<double>(cells);
  // Cell k spans survival probabilities [1-(k+1)/n, 1-k/n]; E[X | a<X<b] via
  // the antiderivative (x+1)e^{-x}, written in survival terms s = e^{-x}.
  for (std::size_t k = 0; k < cells; ++k) {
    const double s_a = 1.0 - static_cast<double>(k) / n;
    const double s_b = 1.0 - static_cast<double>(k + 1) / n;
    const double a = -std::log(s_a);
    const double part_a = (a + 1.0) * s_a;
    const double part_b = s_b > 0.0 ? (-std::log(s_b) + 1.0) * s_b : 0.0;
    means[k] = (part_a - part_b) / (s_a - s_b);
  }
  return means;
}

PowerPolicy optimize_power_allocation(double power, double var_h, double var_g, const EvalConfig& cfg) {
  if (!(power > 0.0) || !std::isfinite(power)) throw InvalidArgument("power budget must be positive and finite");
  if (!(var_h > 0.0) || !(var_g > 0.0)) throw InvalidArgument("gain variances must be positive");
  const CacheKey key{power, var_h, var_g, cfg.power_grid, cfg.power_quadrature_order, cfg.power_budget_tol,
                     cfg.power_max_bisections};
  {
    std::lock_guard lock(cache_mu);
    if (auto it = cache().find(key); it != cache().end()) return it->second;
  }
  PowerPolicy policy = solve(power, var_h, var_g, cfg);
  std::lock_guard lock(cache_mu);
  cache().emplace(key, policy);
  return policy;
}

}  // namespace keyrate
