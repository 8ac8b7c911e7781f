#include "keyrate/quadrature.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>

#include "keyrate/fading.hpp"

namespace keyrate {

namespace {

// Golub-Welsch: nodes are the eigenvalues of the Jacobi matrix, weights are
// mu0 times the squared first components of its eigenvectors.
QuadratureRule golub_welsch(const Eigen::VectorXd& diag, const Eigen::VectorXd& offdiag, double mu0) {
  const auto n = diag.size();
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
  jacobi.diagonal() = diag;
  for (Eigen::Index i = 0; i + 1 < n; ++i) jacobi(i, i + 1) = jacobi(i + 1, i) = offdiag[i];
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(jacobi);
  QuadratureRule rule;
  rule.nodes.resize(static_cast<std::size_t>(n));
  rule.weights.resize(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    const double v0 = solver.eigenvectors()(0, i);
    rule.nodes[static_cast<std::size_t>(i)] = solver.eigenvalues()[i];
    rule.weights[static_cast<std::size_t>(i)] = mu0 * v0 * v0;
  }
  return rule;
}

QuadratureRule make_legendre(int n) {
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd off(std::max(n - 1, 0));
  for (int k = 1; k < n; ++k) off[k - 1] = k / std::sqrt(4.0 * k * k - 1.0);
  auto rule = golub_welsch(diag, off, 2.0);
  // Symmetrize to remove eigen-solver noise.
  for (int i = 0; i < n / 2; ++i) {
    const int j = n - 1 - i;
    const double x = 0.5 * (rule.nodes[j] - rule.nodes[i]);
    const double w = 0.5 * (rule.weights[i] + rule.weights[j]);
    rule.nodes[i] = -x, rule.nodes[j] = x;
    rule.weights[i] = rule.weights[j] = w;
  }
  if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
  return rule;
}

QuadratureRule make_laguerre(int n) {
  Eigen::VectorXd diag(n);
  Eigen::VectorXd off(std::max(n - 1, 0));
  for (int k = 0; k < n; ++k) diag[k] = 2.0 * k + 1.0;
  for (int k = 1; k < n; ++k) off[k - 1] = k;
  return golub_welsch(diag, off, 1.0);
}

template <class Make>
const QuadratureRule& cached(std::map<int, QuadratureRule>& cache, std::mutex& mu, int n, Make make) {
  if (n < 1 || n > 1024) throw InvalidArgument("quadrature order out of range");
  std::lock_guard lock(mu);
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, make(n)).first;
  return it->second;
}

// Adds the Gauss-Legendre panel [lo, hi] with node weights multiplied by weight(x).
template <class Weight>
void add_panel(QuadratureRule& out, const QuadratureRule& gl, double lo, double hi, Weight weight) {
  const double mid = 0.5 * (lo + hi);
  const double half = 0.5 * (hi - lo);
  for (std::size_t i = 0; i < gl.size(); ++i) {
    const double x = mid + half * gl.nodes[i];
    out.nodes.push_back(x);
    out.weights.push_back(half * gl.weights[i] * weight(x));
  }
}

int octaves_below(double scale) {
  constexpr int kExtra = 8;
  constexpr int kMaxOctaves = 1000;
  const double s = std::min(1.0, scale);
  if (!(s > 0.0)) throw InvalidArgument("feature scale must be positive");
  return std::min(kMaxOctaves, static_cast<int>(std::ceil(-std::log2(s))) + kExtra);
}

int panel_points(int order) { return std::max(4, order / 4); }

}  // namespace

const QuadratureRule& gauss_legendre(int n) {
  static std::map<int, QuadratureRule> cache;
  static std::mutex mu;
  return cached(cache, mu, n, make_legendre);
}

const QuadratureRule& gauss_laguerre(int n) {
  static std::map<int, QuadratureRule> cache;
  static std::mutex mu;
  return cached(cache, mu, n, make_laguerre);
}

QuadratureRule exp_rule(int order, double feature_scale) {
  const auto& gl = gauss_legendre(panel_points(order));
  const auto& lag = gauss_laguerre(order);
  const int octaves = octaves_below(feature_scale);
  const auto density = [](double x) { return std::exp(-x); };

  QuadratureRule rule;
  rule.nodes.reserve(static_cast<std::size_t>(octaves + 1) * gl.size() + lag.size());
  rule.weights.reserve(rule.nodes.capacity());
  add_panel(rule, gl, 0.0, std::ldexp(1.0, -octaves), density);
  for (int k = octaves; k > 0; --k) {
    add_panel(rule, gl, std::ldexp(1.0, -k), std::ldexp(1.0, -k + 1), density);
  }
  const double tail_mass = std::exp(-1.0);
  for (std::size_t i = 0; i < lag.size(); ++i) {
    rule.nodes.push_back(1.0 + lag.nodes[i]);
    rule.weights.push_back(tail_mass * lag.weights[i]);
  }
  return rule;
}

QuadratureRule half_unit_rule(int order, double feature_scale, int min_octaves) {
  const auto& gl = gauss_legendre(panel_points(order));
  const int octaves = std::max(min_octaves, octaves_below(feature_scale));
  const auto unit = [](double) { return 1.0; };

  QuadratureRule rule;
  add_panel(rule, gl, 0.0, std::ldexp(0.5, -octaves), unit);
  for (int k = octaves; k > 0; --k) add_panel(rule, gl, std::ldexp(0.5, -k), std::ldexp(0.5, -k + 1), unit);
  return rule;
}

}  // namespace keyrate
