#include "keyrate/expectation.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "keyrate/parallel.hpp"
#include "keyrate/quadrature.hpp"

namespace keyrate {

namespace {

void check_coefficient(double v, const char* name) {
  if (!(v >= 0.0) || !std::isfinite(v)) {
    throw InvalidArgument(std::string("functional coefficient ") + name + " must be finite and >= 0");
  }
}

std::uint64_t units_for(std::uint64_t n_samples, bool antithetic) {
  if (n_samples < kMinMcSamples) {
    throw InvalidArgument("Monte Carlo needs at least " + std::to_string(kMinMcSamples) + " samples");
  }
  return antithetic ? n_samples / 2 : n_samples;
}

std::uint64_t shard_count(std::uint64_t units) { return (units + kShardUnits - 1) / kShardUnits; }

EvalResult finalize(const std::vector<simd::Moments>& shards, bool antithetic) {
  simd::Moments total;
  for (const auto& s : shards) {
    total.sum += s.sum;
    total.sum_sq += s.sum_sq;
    total.count += s.count;
  }
  const auto n = static_cast<double>(total.count);
  const double mean = total.sum / n;
  const double var = std::max(0.0, (total.sum_sq - total.sum * mean) / (n - 1.0));
  EvalResult result;
  result.value = mean;
  result.std_error = std::sqrt(var / n);
  result.n_samples = antithetic ? 2 * total.count : total.count;
  result.method = EvalMethod::mc;
  return result;
}

struct ShardBuffers {
  std::vector<double> x, y, xa, ya;
};

void fill_shard(const RngStream& stream, std::uint64_t begin, std::uint64_t end, bool antithetic,
                ShardBuffers& out) {
  const auto n = static_cast<std::size_t>(end - begin);
  out.x.resize(n);
  out.y.resize(n);
  out.xa.resize(antithetic ? n : 0);
  out.ya.resize(antithetic ? n : 0);
  UniformSource source(stream);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint64_t unit = begin + i;
    const double u0 = source.at(2 * unit);
    const double u1 = source.at(2 * unit + 1);
    out.x[i] = -std::log(u0);
    out.y[i] = -std::log(u1);
    if (antithetic) {
      out.xa[i] = -std::log(1.0 - u0);
      out.ya[i] = -std::log(1.0 - u1);
    }
  }
}

simd::Moments shard_moments(const Functional& f, std::span<const double> x, std::span<const double> y,
                            std::span<const double> xa, std::span<const double> ya, bool antithetic) {
  const auto& kernels = simd::active_kernels();
  if (antithetic) return kernels.ratio_pair_moments(f.coeffs(), x, y, xa, ya);
  return kernels.ratio_moments(f.coeffs(), x, y);
}

double feature_scale(double coefficient) { return coefficient > 1.0 ? 1.0 / coefficient : 1.0; }

double quad_simple(double a, int order) {
  if (a == 0.0) return 0.0;
  const auto rule = exp_rule(order, feature_scale(a));
  return simd::active_kernels().ratio_dot({a, 0.0, 1.0}, rule.nodes, rule.nodes, rule.weights);
}

double quad_ratio(double a, double b, int order) {
  if (a == 0.0) return 0.0;
  if (b == 0.0) return quad_simple(a, order);
  const auto inner = exp_rule(order, feature_scale(a));
  const auto outer = exp_rule(order, feature_scale(b));
  const auto& kernels = simd::active_kernels();
  double acc = 0.0;
  for (std::size_t j = 0; j < outer.size(); ++j) {
    const double c = 1.0 + b * outer.nodes[j];
    acc += outer.weights[j] * kernels.ratio_dot({a, 0.0, c}, inner.nodes, inner.nodes, inner.weights);
  }
  return acc;
}

// With r = X/Y (density 1/(1+r)^2) and r = t/(1-t), L(a) = int_0^1 log2(1 + a t/(1-t)) dt.
// Split at 1/2; the right half is written in s = 1 - t.
double quad_ratio_limit(double a, int order) {
  if (a == 0.0) return 0.0;
  const auto& kernels = simd::active_kernels();
  const auto left = half_unit_rule(order, feature_scale(a));
  const double lhs = kernels.ratio_dot({a, -1.0, 1.0}, left.nodes, left.nodes, left.weights);

  constexpr int kEndpointOctaves = 48;
  const auto right = half_unit_rule(order, std::min(1.0, a), kEndpointOctaves);
  std::vector<double> complement(right.size());
  for (std::size_t i = 0; i < right.size(); ++i) complement[i] = 1.0 - right.nodes[i];
  const double rhs = kernels.ratio_dot({a, 1.0, 0.0}, complement, right.nodes, right.weights);
  return lhs + rhs;
}

double quad_value(const Functional& f, int order) {
  switch (f.kind) {
    case FunctionalKind::ratio:
      return quad_ratio(f.a, f.b, order);
    case FunctionalKind::simple:
      return quad_simple(f.a, order);
    case FunctionalKind::ratio_limit:
      return quad_ratio_limit(f.a, order);
  }
  return 0.0;
}

std::uint64_t quad_points(const Functional& f, int order) {
  switch (f.kind) {
    case FunctionalKind::ratio:
      return exp_rule(order, feature_scale(f.a)).size() * (f.b > 0.0 ? exp_rule(order, feature_scale(f.b)).size() : 1);
    case FunctionalKind::simple:
      return exp_rule(order, feature_scale(f.a)).size();
    case FunctionalKind::ratio_limit:
      return half_unit_rule(order, feature_scale(f.a)).size() + half_unit_rule(order, std::min(1.0, f.a), 48).size();
  }
  return 0;
}

}  // namespace

Functional Functional::ratio(double a, double b) {
  check_coefficient(a, "a");
  check_coefficient(b, "b");
  return {FunctionalKind::ratio, a, b};
}

Functional Functional::simple(double a) {
  check_coefficient(a, "a");
  return {FunctionalKind::simple, a, 0.0};
}

Functional Functional::ratio_limit(double a) {
  check_coefficient(a, "a");
  return {FunctionalKind::ratio_limit, a, 1.0};
}

simd::RatioCoeffs Functional::coeffs() const {
  switch (kind) {
    case FunctionalKind::ratio:
      return {a, b, 1.0};
    case FunctionalKind::simple:
      return {a, 0.0, 1.0};
    case FunctionalKind::ratio_limit:
      return {a, 1.0, 0.0};
  }
  return {};
}

std::string_view to_string(FunctionalKind kind) {
  switch (kind) {
    case FunctionalKind::ratio:
      return "ratio";
    case FunctionalKind::simple:
      return "simple";
    case FunctionalKind::ratio_limit:
      return "ratio_limit";
  }
  return "unknown";
}

std::string_view to_string(EvalMethod method) { return method == EvalMethod::mc ? "mc" : "quadrature"; }

McSampleSet McSampleSet::draw(const RngStream& stream, std::uint64_t n_samples, bool antithetic,
                              unsigned workers) {
  const std::uint64_t units = units_for(n_samples, antithetic);
  McSampleSet set;
  set.antithetic_ = antithetic;
  set.x_.resize(units);
  set.y_.resize(units);
  if (antithetic) {
    set.xa_.resize(units);
    set.ya_.resize(units);
  }
  parallel_for(shard_count(units), workers, [&](std::size_t s) {
    const std::uint64_t begin = s * kShardUnits;
    const std::uint64_t end = std::min(units, begin + kShardUnits);
    ShardBuffers buf;
    fill_shard(stream, begin, end, antithetic, buf);
    std::copy(buf.x.begin(), buf.x.end(), set.x_.begin() + static_cast<std::ptrdiff_t>(begin));
    std::copy(buf.y.begin(), buf.y.end(), set.y_.begin() + static_cast<std::ptrdiff_t>(begin));
    if (antithetic) {
      std::copy(buf.xa.begin(), buf.xa.end(), set.xa_.begin() + static_cast<std::ptrdiff_t>(begin));
      std::copy(buf.ya.begin(), buf.ya.end(), set.ya_.begin() + static_cast<std::ptrdiff_t>(begin));
    }
  });
  return set;
}

EvalResult McSampleSet::evaluate(const Functional& f, unsigned workers) const {
  const std::uint64_t units = x_.size();
  std::vector<simd::Moments> shards(shard_count(units));
  parallel_for(shards.size(), workers, [&](std::size_t s) {
    const std::size_t begin = s * kShardUnits;
    const std::size_t len = std::min<std::size_t>(units - begin, kShardUnits);
    const auto part = [&](const std::vector<double>& v) {
      return v.empty() ? std::span<const double>{} : std::span<const double>(v).subspan(begin, len);
    };
    shards[s] = shard_moments(f, part(x_), part(y_), part(xa_), part(ya_), antithetic_);
  });
  return finalize(shards, antithetic_);
}

EvalResult eval_mc(const Functional& f, const EvalConfig& cfg, const RngStream& stream) {
  const std::uint64_t units = units_for(cfg.n_samples, cfg.antithetic);
  std::vector<simd::Moments> shards(shard_count(units));
  parallel_for(shards.size(), cfg.workers, [&](std::size_t s) {
    const std::uint64_t begin = s * kShardUnits;
    const std::uint64_t end = std::min(units, begin + kShardUnits);
    ShardBuffers buf;
    fill_shard(stream, begin, end, cfg.antithetic, buf);
    shards[s] = shard_moments(f, buf.x, buf.y, buf.xa, buf.ya, cfg.antithetic);
  });
  return finalize(shards, cfg.antithetic);
}

EvalResult eval_quadrature(const Functional& f, int order) {
  if (order < 8 || order > 256) throw InvalidArgument("quadrature order must lie in [8, 256]");
  constexpr int kOrderStep = 4;
  constexpr double kConvergenceTol = 1e-6;
  EvalResult result;
  result.method = EvalMethod::quadrature;
  result.value = quad_value(f, order);
  result.n_samples = quad_points(f, order);
  const double refined = quad_value(f, order + kOrderStep);
  result.converged = std::abs(refined - result.value) < kConvergenceTol;
  return result;
}

RngStream link_stream(std::uint64_t seed, Link link) {
  return {RngAlgorithm::philox4x32_10, seed,
          link == Link::forward ? kForwardLinkSubstream : kReverseLinkSubstream};
}

EvalResult gamma_constant(const ChannelParams& params, const EvalConfig& cfg) {
  const auto f = Functional::ratio_limit(params.var_h() / params.var_g());
  if (cfg.method == EvalMethod::quadrature) {
    auto term = eval_quadrature(f, cfg.quadrature_order);
    term.value *= 2.0;
    return term;
  }
  const auto fwd = eval_mc(f, cfg, link_stream(cfg.seed, Link::forward));
  const auto rev = eval_mc(f, cfg, link_stream(cfg.seed, Link::reverse));
  EvalResult out = fwd;
  out.value = fwd.value + rev.value;
  out.std_error = std::hypot(fwd.std_error, rev.std_error);
  out.n_samples = fwd.n_samples + rev.n_samples;
  return out;
}

ExpectationEngine::ExpectationEngine(EvalConfig config, bool cache_samples)
    : config_(config), cache_samples_(cache_samples) {
  if (config_.method == EvalMethod::mc) units_for(config_.n_samples, config_.antithetic);
}

std::shared_ptr<const McSampleSet> ExpectationEngine::samples(Link link) const {
  const auto slot = static_cast<std::size_t>(link);
  std::lock_guard lock(mu_);
  if (!samples_[slot]) {
    samples_[slot] = std::make_shared<const McSampleSet>(McSampleSet::draw(
        link_stream(config_.seed, link), config_.n_samples, config_.antithetic, config_.workers));
  }
  return samples_[slot];
}

EvalResult ExpectationEngine::expect(const Functional& f, Link link) const {
  const bool mc = config_.method == EvalMethod::mc;
  // Quadrature does not depend on the link.
  const auto key = std::make_tuple(static_cast<int>(f.kind), f.a, f.b, mc ? static_cast<int>(link) : 0);
  {
    std::lock_guard lock(mu_);
    if (auto it = memo_.find(key); it != memo_.end()) return it->second;
  }
  EvalResult result;
  if (!mc) {
    result = eval_quadrature(f, config_.quadrature_order);
  } else if (cache_samples_) {
    result = samples(link)->evaluate(f, config_.workers);
  } else {
    result = eval_mc(f, config_, link_stream(config_.seed, link));
  }
  std::lock_guard lock(mu_);
  memo_.emplace(key, result);
  return result;
}

}  // namespace keyrate
