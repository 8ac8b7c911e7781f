#include "keyrate/rates.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "keyrate/gaussian_info.hpp"

namespace keyrate {

namespace {

constexpr double kConstraintSlack = 1e-9;

double reciprocity_mi(double rho) {
  Eigen::MatrixXcd cov(2, 2);
  cov << 1.0, rho, rho, 1.0;
  return gaussian_mi(CovarianceModel({kH_AB, kH_BA}, cov), {kH_AB}, {kH_BA}).bits;
}

// 2^c - 1 without cancellation for small c.
double exp2m1(double c) { return std::expm1(c * std::numbers::ln2); }

struct LinkTerm {
  double value = 0.0;
  double unclamped = 0.0;
  double penalty = 0.0;
  double std_error = 0.0;
  bool clamped = false;
};

LinkTerm link_term(const ExpectationEngine& engine, Link link, double a, double b, double penalty) {
  const auto r = engine.expect(Functional::ratio(a, b), link);
  LinkTerm t;
  t.unclamped = r.value - penalty;
  t.clamped = t.unclamped < 0.0;
  t.value = std::max(0.0, t.unclamped);
  t.penalty = penalty;
  t.std_error = r.std_error;
  return t;
}

void assign_links(RateBreakdown& out, const LinkTerm& fwd, const LinkTerm& rev, double scale) {
  out.forward_term = scale * fwd.value;
  out.reverse_term = scale * rev.value;
  out.forward_unclamped = scale * fwd.unclamped;
  out.reverse_unclamped = scale * rev.unclamped;
  out.forward_clamped = fwd.clamped;
  out.reverse_clamped = rev.clamped;
  out.penalty_terms = scale * (fwd.penalty + rev.penalty);
  out.std_error = scale * std::hypot(fwd.std_error, rev.std_error);
  if (fwd.clamped) out.diagnostics.emplace_back("forward term negative, clamped to 0");
  if (rev.clamped) out.diagnostics.emplace_back("reverse term negative, clamped to 0");
}

double golden_max(auto&& f, double lo, double hi, double tol) {
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = hi - inv_phi * (hi - lo);
  double b = lo + inv_phi * (hi - lo);
  double fa = f(a), fb = f(b);
  while (hi - lo > tol) {
    if (fa >= fb) {
      hi = b;
      b = a;
      fb = fa;
      a = hi - inv_phi * (hi - lo);
      fa = f(a);
    } else {
      lo = a;
      a = b;
      fa = fb;
      b = lo + inv_phi * (hi - lo);
      fb = f(b);
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace

SystemParams::SystemParams(int T, double P, ChannelParams channel) : T_(T), P_(P), channel_(channel) {
  if (T < 2) throw InvalidArgument("coherence period T must be at least 2");
  if (!(P > 0.0) || !std::isfinite(P)) throw InvalidArgument("average power P must be positive and finite");
}

SchemeParams SchemeParams::from_split(const SystemParams& sys, double tau, double eps1, double eps2) {
  if (!(tau >= 0.0 && tau <= 1.0)) throw InvalidArgument("pilot share tau must lie in [0, 1]");
  const double budget = sys.T() * sys.P();
  SchemeParams s;
  s.p1 = tau * budget;
  s.p2 = (1.0 - tau) * budget / (sys.T() - 1.0);
  s.eps1 = eps1;
  s.eps2 = eps2;
  return s;
}

void check_power_constraint(const SystemParams& sys, const SchemeParams& scheme) {
  if (!(scheme.p1 >= 0.0) || !(scheme.p2 >= 0.0)) throw InvalidArgument("scheme powers must be non-negative");
  if (!(scheme.eps1 >= 0.0) || !(scheme.eps2 >= 0.0)) throw InvalidArgument("overhead fractions must be non-negative");
  const double budget = sys.T() * sys.P();
  if (scheme.p1 + (sys.T() - 1.0) * scheme.p2 > budget * (1.0 + kConstraintSlack)) {
    throw InvalidArgument("scheme violates p1 + (T-1) p2 <= T P");
  }
}

std::string_view to_string(BoundLabel label) {
  switch (label) {
    case BoundLabel::training:
      return "training";
    case BoundLabel::upper:
      return "upper";
    case BoundLabel::lower_pd:
      return "lower_pd";
    case BoundLabel::lower_nodisc:
      return "lower_nodisc";
  }
  return "unknown";
}

std::string_view to_string(Eps1Rule rule) { return rule == Eps1Rule::Tminus1 ? "Tminus1" : "T"; }

std::string_view to_string(RncModel::Kind kind) {
  switch (kind) {
    case RncModel::Kind::training_based:
      return "training";
    case RncModel::Kind::coherent_genie:
      return "genie";
    case RncModel::Kind::constant_override:
      return "const";
  }
  return "unknown";
}

RncModel RncModel::constant(double value) {
  if (!(value >= 0.0) || !std::isfinite(value)) throw InvalidArgument("constant R_NC must be finite and >= 0");
  return RncModel(Kind::constant_override, value);
}

RncModel::RncModel(const RncModel& other) : kind_(other.kind_), constant_(other.constant_) {}

RncModel& RncModel::operator=(const RncModel& other) {
  if (this != &other) {
    kind_ = other.kind_;
    constant_ = other.constant_;
    std::lock_guard lock(mu_);
    cache_.clear();
  }
  return *this;
}

double training_effective_snr(double p_pilot, double p_data, double var_h) {
  const double err = var_h / (1.0 + p_pilot * var_h);
  return (var_h - err) * p_data / (1.0 + err * p_data);
}

double RncModel::rate(const SystemParams& sys, const EvalConfig& cfg) const {
  if (kind_ == Kind::constant_override) return constant_;
  const auto key = std::make_pair(sys.T(), sys.P());
  {
    std::lock_guard lock(mu_);
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;
  }
  const double var_h = sys.channel().var_h();
  double value = 0.0;
  if (kind_ == Kind::coherent_genie) {
    value = eval_quadrature(Functional::simple(sys.P() * var_h), cfg.quadrature_order).value;
  } else {
    // G is increasing, so the best split maximizes the effective SNR.
    const double budget = sys.T() * sys.P();
    const auto snr = [&](double tau) {
      return training_effective_snr(tau * budget, (1.0 - tau) * budget / (sys.T() - 1.0), var_h);
    };
    const double tau = golden_max(snr, 0.0, 1.0, 1e-12);
    value = sys.sharing_fraction() * eval_quadrature(Functional::simple(snr(tau)), cfg.quadrature_order).value;
  }
  std::lock_guard lock(mu_);
  cache_.emplace(key, value);
  return value;
}

double rate_nc(const RncModel& model, const SystemParams& sys, const EvalConfig& cfg) { return model.rate(sys, cfg); }

RateBreakdown rate_training(int T, double rho) {
  if (T < 2) throw InvalidArgument("coherence period T must be at least 2");
  const ChannelParams checked(rho);
  RateBreakdown out;
  out.label = BoundLabel::training;
  out.reciprocity_term = reciprocity_mi(checked.rho()) / T;
  out.total = out.reciprocity_term;
  return out;
}

RateBreakdown rate_upper(const SystemParams& sys, const EvalConfig& cfg) {
  const auto& ch = sys.channel();
  // Both directions share the same fading law, so one policy serves both links.
  const auto policy = optimize_power_allocation(sys.P(), ch.var_h(), ch.var_g(), cfg);
  RateBreakdown out;
  out.label = BoundLabel::upper;
  out.reciprocity_term = reciprocity_mi(ch.rho()) / sys.T();
  out.forward_term = policy.value;
  out.reverse_term = policy.value;
  out.forward_unclamped = policy.value;
  out.reverse_unclamped = policy.value;
  out.total = out.reciprocity_term + out.forward_term + out.reverse_term;
  out.power_dual_gap = policy.dual_gap;
  out.power_converged = policy.converged;
  if (!policy.converged) {
    out.diagnostics.push_back("power allocation dual gap " + std::to_string(policy.dual_gap) +
                              " exceeds tolerance");
  }
  return out;
}

RateBreakdown rate_lower_pd(const SystemParams& sys, const SchemeParams& scheme, const ExpectationEngine& engine) {
  check_power_constraint(sys, scheme);
  const auto& ch = sys.channel();
  const double alpha = scheme.alpha();
  RateBreakdown out;
  out.label = BoundLabel::lower_pd;
  out.reciprocity_term = estimate_pair_mi(alpha, ch.rho()) / sys.T();
  const double penalty = std::log2(1.0 + scheme.p2 / (1.0 + scheme.p1));
  const double a = scheme.p2 * ch.var_h();
  const double b = scheme.p2 * ch.var_g();
  const auto fwd = link_term(engine, Link::forward, a, b, penalty);
  const auto rev = link_term(engine, Link::reverse, a, b, penalty);
  assign_links(out, fwd, rev, sys.sharing_fraction());
  out.total = out.reciprocity_term + out.forward_term + out.reverse_term;
  return out;
}

RateBreakdown rate_lower_pd(const SystemParams& sys, const SchemeParams& scheme, const EvalConfig& cfg) {
  return rate_lower_pd(sys, scheme, ExpectationEngine(cfg));
}

std::optional<Quantization> solve_quantization(const SystemParams& sys, const SchemeParams& scheme, double rnc,
                                               Eps1Rule rule) {
  const double alpha = scheme.alpha();
  const double rho = sys.channel().rho();
  const double c1 = scheme.eps1 * (rule == Eps1Rule::Tminus1 ? sys.T() - 1.0 : sys.T()) * rnc;
  const double c2 = scheme.eps2 * rnc;
  if (!(c1 > 0.0) || !(c2 > 0.0)) return std::nullopt;
  Quantization q;
  q.q1 = alpha * (1.0 - alpha * alpha * rho * rho) / exp2m1(c1);
  q.sigma_sq = sigma_sq_from_pilot(scheme.p1, q.q1);
  q.q2 = (q.sigma_sq * scheme.p2 + 1.0) / exp2m1(c2);
  return q;
}

double nodisc_reciprocity_rate(double alpha, double rho, double q1) {
  if (alpha == 0.0) return 0.0;
  return 2.0 * quantized_cross_mi(alpha, rho, q1) - quantized_pair_mi(alpha, rho, q1);
}

RateBreakdown rate_lower_nodisc(const SystemParams& sys, const SchemeParams& scheme, const RncModel& rnc,
                                const ExpectationEngine& engine, const NodiscOptions& options) {
  check_power_constraint(sys, scheme);
  RateBreakdown out;
  out.label = BoundLabel::lower_nodisc;
  out.overhead_factor = options.apply_overhead ? 1.0 / (1.0 + scheme.eps1 + scheme.eps2) : 1.0;

  Quantization q;
  if (options.q1_override && options.q2_override) {
    q.q1 = *options.q1_override;
    q.q2 = *options.q2_override;
    if (!(q.q1 >= 0.0) || !(q.q2 >= 0.0)) throw InvalidArgument("quantization noise must be non-negative");
    q.sigma_sq = sigma_sq_from_pilot(scheme.p1, q.q1);
  } else {
    const auto solved = solve_quantization(sys, scheme, rnc.rate(sys, engine.config()), options.eps1_rule);
    if (!solved) {
      out.infeasible_quantization = true;
      out.diagnostics.emplace_back("eps * R_NC = 0: message-rate constraint cannot be met");
      return out;
    }
    q = *solved;
    if (options.q1_override) {
      q.q1 = *options.q1_override;
      q.sigma_sq = sigma_sq_from_pilot(scheme.p1, q.q1);
    }
    if (options.q2_override) q.q2 = *options.q2_override;
  }
  out.quantization = q;

  const auto& ch = sys.channel();
  const double scale = out.overhead_factor;
  out.reciprocity_term = scale * nodisc_reciprocity_rate(scheme.alpha(), ch.rho(), q.q1) / sys.T();
  const double p2_eff = scheme.p2 / (1.0 + q.q2);
  const double penalty = std::log2(q.sigma_sq * p2_eff + 1.0);
  const double a = p2_eff * ch.var_h();
  const double b = scheme.p2 * ch.var_g();
  const auto fwd = link_term(engine, Link::forward, a, b, penalty);
  const auto rev = link_term(engine, Link::reverse, a, b, penalty);
  assign_links(out, fwd, rev, scale * sys.sharing_fraction());
  out.total = out.reciprocity_term + out.forward_term + out.reverse_term;
  return out;
}

RateBreakdown rate_lower_nodisc(const SystemParams& sys, const SchemeParams& scheme, const RncModel& rnc,
                                const EvalConfig& cfg, const NodiscOptions& options) {
  return rate_lower_nodisc(sys, scheme, rnc, ExpectationEngine(cfg), options);
}

}  // namespace keyrate
