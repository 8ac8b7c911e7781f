#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string_view>
#include <tuple>
#include <vector>

#include "keyrate/fading.hpp"
#include "keyrate/kernels.hpp"
#include "keyrate/rng.hpp"

namespace keyrate {

enum class FunctionalKind { ratio, simple, ratio_limit };

/**
 * One of the fading functionals the rate formulas need, for X, Y iid Exp(1):
 *
 *   ratio:        F(a, b) = E[log2(1 + a X / (1 + b Y))]
 *   simple:       G(a)    = E[log2(1 + a X)]
 *   ratio_limit:  L(a)    = E[log2(1 + a X / Y)]
 */
struct Functional {
  FunctionalKind kind = FunctionalKind::simple;
  double a = 0.0;
  double b = 0.0;

  static Functional ratio(double a, double b);
  static Functional simple(double a);
  static Functional ratio_limit(double a = 1.0);

  [[nodiscard]] simd::RatioCoeffs coeffs() const;
};

std::string_view to_string(FunctionalKind kind);

enum class EvalMethod { mc, quadrature };

std::string_view to_string(EvalMethod method);

struct EvalConfig {
  std::uint64_t n_samples = 1'000'000;
  std::uint64_t seed = 1;
  int quadrature_order = 64;
  /// Pair every uniform u with 1-u. The integrands are monotone in each
  /// variate, so the pairing cannot increase the variance.
  bool antithetic = true;
  /// 0 = all hardware threads. Never changes results.
  unsigned workers = 0;
  /// How rate functions evaluate F(a, b).
  EvalMethod method = EvalMethod::mc;

  // Upper-bound power allocation.
  std::size_t power_grid = 512;
  int power_quadrature_order = 32;
  double power_budget_tol = 1e-9;
  int power_max_bisections = 200;
  double power_gap_tol = 1e-3;
};

struct EvalResult {
  double value = 0.0;
  double std_error = 0.0;  ///< 0 for quadrature
  std::uint64_t n_samples = 0;
  EvalMethod method = EvalMethod::mc;
  /// Quadrature only: agreement with the next order within 1e-6.
  bool converged = true;
};

// Fixed substream assignment. The forward link (h_AB, g_AE) and the reverse
// link (h_BA, g_BE) draw from different substreams.
inline constexpr std::uint64_t kForwardLinkSubstream = 1;
inline constexpr std::uint64_t kReverseLinkSubstream = 2;

/// MC work unit. Shard boundaries depend only on the sample count, so the
/// reduction (in shard order) is independent of the worker count.
inline constexpr std::uint64_t kShardUnits = 1u << 15;

inline constexpr std::uint64_t kMinMcSamples = 1000;

/**
 * Exp(1) pairs (X, Y) of a stream, materialized for repeated evaluation.
 *
 * Unit j uses uniforms 2j and 2j+1: X = -ln u_{2j}, Y = -ln u_{2j+1}. With
 * antithetic pairing the unit also holds X' = -ln(1-u_{2j}), Y' = -ln(1-u_{2j+1})
 * and counts as two samples.
 */
class McSampleSet {
 public:
  static McSampleSet draw(const RngStream& stream, std::uint64_t n_samples, bool antithetic,
                          unsigned workers);

  [[nodiscard]] EvalResult evaluate(const Functional& f, unsigned workers) const;

  [[nodiscard]] std::uint64_t units() const { return x_.size(); }
  [[nodiscard]] bool antithetic() const { return antithetic_; }
  [[nodiscard]] std::span<const double> x() const { return x_; }
  [[nodiscard]] std::span<const double> y() const { return y_; }

 private:
  std::vector<double> x_, y_, xa_, ya_;
  bool antithetic_ = true;
};

/// Streams the samples shard by shard; bit-identical to McSampleSet::draw + evaluate.
EvalResult eval_mc(const Functional& f, const EvalConfig& cfg, const RngStream& stream);

/// Tensor quadrature over the Exp(1) densities (order in [8, 256]).
EvalResult eval_quadrature(const Functional& f, int order);

/**
 * Gap constant E[log2(1+|h_AB|^2/|g_AE|^2)] + E[log2(1+|h_BA|^2/|g_BE|^2)].
 * Each term is L(var_h/var_g); by MC (one substream per link) or quadrature
 * according to cfg.method.
 */
EvalResult gamma_constant(const ChannelParams& params, const EvalConfig& cfg);

enum class Link { forward, reverse };

/**
 * Evaluates functionals for the rate formulas under one EvalConfig.
 *
 * In MC mode each link's samples are drawn once and reused, so every call
 * sees the same common random numbers (the optimizer's objective becomes a
 * deterministic surrogate). Results are memoized. Thread-safe.
 */
class ExpectationEngine {
 public:
  explicit ExpectationEngine(EvalConfig config, bool cache_samples = true);

  [[nodiscard]] EvalResult expect(const Functional& f, Link link) const;
  [[nodiscard]] const EvalConfig& config() const { return config_; }

 private:
  [[nodiscard]] std::shared_ptr<const McSampleSet> samples(Link link) const;

  EvalConfig config_;
  bool cache_samples_;
  mutable std::mutex mu_;
  mutable std::array<std::shared_ptr<const McSampleSet>, 2> samples_;
  mutable std::map<std::tuple<int, double, double, int>, EvalResult> memo_;
};

RngStream link_stream(std::uint64_t seed, Link link);

}  // namespace keyrate
