#include "keyrate/optimizer.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

namespace keyrate {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kWarmStartTau = 0.1;
constexpr double kWarmStartEps = 0.1;
constexpr double kGoldenWidth = 1e-3;
const std::vector<double> kPatternSteps{0.0, 0.5, 1.0, 1.5, 2.0, 3.0, 4.0, 6.0, 8.0};

double logit(double t) { return std::log(t / (1.0 - t)); }
double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }

struct Point {
  double tau = 0.0;
  double eps1 = 0.0;
  double eps2 = 0.0;
};

class Objective {
 public:
  Objective(const SystemParams& sys, const OptimizeSpec& spec, const RncModel& rnc, const ExpectationEngine& engine,
            std::vector<TraceEntry>* trace)
      : sys_(sys), spec_(spec), rnc_(rnc), engine_(engine), trace_(trace) {}

  [[nodiscard]] RateBreakdown breakdown(const SchemeParams& s) const {
    if (spec_.target == OptimizeTarget::lower_pd) return rate_lower_pd(sys_, s, engine_);
    return rate_lower_nodisc(sys_, s, rnc_, engine_, spec_.nodisc);
  }

  [[nodiscard]] SchemeParams scheme(const Point& p) const {
    if (spec_.target == OptimizeTarget::lower_pd) return SchemeParams::from_split(sys_, p.tau);
    return SchemeParams::from_split(sys_, p.tau, p.eps1, p.eps2);
  }

  double value(const SchemeParams& s) const {
    const auto r = breakdown(s);
    const double v = r.infeasible_quantization ? kNegInf : r.total;
    if (trace_) trace_->push_back({s, v});
    return v;
  }

  double operator()(const Point& p) const { return value(scheme(p)); }

 private:
  const SystemParams& sys_;
  const OptimizeSpec& spec_;
  const RncModel& rnc_;
  const ExpectationEngine& engine_;
  std::vector<TraceEntry>* trace_;
};

// Maximizes f over a coarse grid of `coords`, then golden-section between the
// winner's neighbours. Returns the best coordinate and value, never worse than
// (start, start_value).
template <class F>
std::pair<double, double> line_search(F&& f, const std::vector<double>& coords, double start, double start_value) {
  double best = start;
  double best_value = start_value;
  std::size_t best_idx = coords.size();
  for (std::size_t i = 0; i < coords.size(); ++i) {
    const double v = f(coords[i]);
    if (v > best_value) {
      best_value = v;
      best = coords[i];
      best_idx = i;
    }
  }
  double lo, hi;
  if (best_idx < coords.size()) {
    lo = coords[best_idx == 0 ? 0 : best_idx - 1];
    hi = coords[std::min(best_idx + 1, coords.size() - 1)];
  } else {
    const auto it = std::lower_bound(coords.begin(), coords.end(), start);
    hi = it == coords.end() ? coords.back() : *it;
    lo = it == coords.begin() ? coords.front() : *(it - 1);
  }
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = hi - inv_phi * (hi - lo);
  double b = lo + inv_phi * (hi - lo);
  double fa = f(a), fb = f(b);
  while (hi - lo > kGoldenWidth) {
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
  for (const auto& [c, v] : {std::pair{a, fa}, std::pair{b, fb}}) {
    if (v > best_value) {
      best_value = v;
      best = c;
    }
  }
  return {best, best_value};
}

std::vector<double> linspace(double lo, double hi, int n) {
  std::vector<double> out(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = n == 1 ? lo : lo + (hi - lo) * i / (n - 1.0);
  return out;
}

}  // namespace

std::string_view to_string(OptimizeTarget target) {
  return target == OptimizeTarget::lower_pd ? "lower_pd" : "lower_nodisc";
}

void validate(const OptimizeSpec& spec) {
  if (!(spec.tau_min > 0.0 && spec.tau_min < spec.tau_max && spec.tau_max < 1.0)) {
    throw InvalidArgument("optimizer tau range must satisfy 0 < tau_min < tau_max < 1");
  }
  if (!(spec.eps_min > 0.0 && spec.eps_min < spec.eps_max && std::isfinite(spec.eps_max))) {
    throw InvalidArgument("optimizer eps range must satisfy 0 < eps_min < eps_max");
  }
  if (spec.tau_grid < 2 || spec.eps_grid < 2) throw InvalidArgument("optimizer grids need at least 2 points");
  if (spec.passes < 1) throw InvalidArgument("optimizer needs at least one pass");
  if (!(spec.tolerance > 0.0)) throw InvalidArgument("optimizer tolerance must be positive");
  if (spec.final_sample_factor < 1) throw InvalidArgument("final sample factor must be at least 1");
}

SchemeParams high_snr_schedule(double P, int T) {
  if (!(P > 1.0) || !std::isfinite(P)) throw InvalidArgument("high-SNR schedule needs P > 1");
  if (T < 2) throw InvalidArgument("coherence period T must be at least 2");
  SchemeParams s;
  s.p1 = P - std::sqrt(P);
  s.p2 = std::sqrt(P) / (T - 1.0);
  s.eps1 = s.eps2 = 1.0 / std::log2(1.0 + P);
  return s;
}

OptimizeReport optimize_scheme(const SystemParams& sys, const OptimizeSpec& spec, const RncModel& rnc,
                               const EvalConfig& cfg) {
  validate(spec);
  OptimizeReport report;
  const ExpectationEngine engine(cfg);
  const Objective objective(sys, spec, rnc, engine, &report.trace);
  const bool pd = spec.target == OptimizeTarget::lower_pd;

  if (sys.P() > 1.0) {
    report.warm_start = high_snr_schedule(sys.P(), sys.T());
  } else {
    report.warm_start = SchemeParams::from_split(sys, kWarmStartTau, kWarmStartEps, kWarmStartEps);
    report.warm_start_is_high_snr_schedule = false;
  }
  if (pd) report.warm_start.eps1 = report.warm_start.eps2 = 0.0;

  SchemeParams best_scheme = report.warm_start;
  double best_value = objective.value(best_scheme);

  Point cur;
  cur.tau = std::clamp(report.warm_start.p1 / (sys.T() * sys.P()), spec.tau_min, spec.tau_max);
  cur.eps1 = std::clamp(report.warm_start.eps1, spec.eps_min, spec.eps_max);
  cur.eps2 = std::clamp(report.warm_start.eps2, spec.eps_min, spec.eps_max);
  double cur_value = objective(cur);
  if (cur_value > best_value) {
    best_value = cur_value;
    best_scheme = objective.scheme(cur);
  }

  const auto tau_coords = linspace(logit(spec.tau_min), logit(spec.tau_max), spec.tau_grid);
  const auto eps_coords = linspace(std::log(spec.eps_min), std::log(spec.eps_max), spec.eps_grid);

  for (int pass = 0; pass < spec.passes; ++pass) {
    const double pass_start = best_value;
    const Point pass_origin = cur;

    auto [z, v] = line_search(
        [&](double zz) {
          Point p = cur;
          p.tau = logistic(zz);
          return objective(p);
        },
        tau_coords, logit(cur.tau), cur_value);
    cur.tau = logistic(z);
    cur_value = v;

    if (!pd) {
      for (double Point::*field : {&Point::eps1, &Point::eps2}) {
        auto [le, ve] = line_search(
            [&](double l) {
              Point p = cur;
              p.*field = std::exp(l);
              return objective(p);
            },
            eps_coords, std::log(cur.*field), cur_value);
        cur.*field = std::exp(le);
        cur_value = ve;
      }
    }

    if (!pd) {
      // Pattern step along the pass displacement; coupled coordinates otherwise zigzag.
      const std::array<double, 3> from{logit(pass_origin.tau), std::log(pass_origin.eps1), std::log(pass_origin.eps2)};
      const std::array<double, 3> to{logit(cur.tau), std::log(cur.eps1), std::log(cur.eps2)};
      const auto along = [&](double t) {
        Point p;
        p.tau = logistic(std::clamp(from[0] + t * (to[0] - from[0]), tau_coords.front(), tau_coords.back()));
        p.eps1 = std::exp(std::clamp(from[1] + t * (to[1] - from[1]), eps_coords.front(), eps_coords.back()));
        p.eps2 = std::exp(std::clamp(from[2] + t * (to[2] - from[2]), eps_coords.front(), eps_coords.back()));
        return p;
      };
      auto [t, vt] = line_search([&](double tt) { return objective(along(tt)); }, kPatternSteps, 1.0, cur_value);
      cur = along(t);
      cur_value = vt;
    }

    if (cur_value > best_value) {
      best_value = cur_value;
      best_scheme = objective.scheme(cur);
    }
    report.pass_best.push_back(best_value);
    if (best_value - pass_start < spec.tolerance && pass > 0) break;
  }

  EvalConfig final_cfg = cfg;
  if (cfg.method == EvalMethod::mc) final_cfg.n_samples = cfg.n_samples * static_cast<std::uint64_t>(spec.final_sample_factor);
  const ExpectationEngine final_engine(final_cfg, false);
  const Objective final_objective(sys, spec, rnc, final_engine, nullptr);
  auto best_rate = final_objective.breakdown(best_scheme);
  const auto warm_rate = final_objective.breakdown(report.warm_start);
  report.warm_start_rate = warm_rate.infeasible_quantization ? 0.0 : warm_rate.total;
  if (!warm_rate.infeasible_quantization && (best_rate.infeasible_quantization || warm_rate.total > best_rate.total)) {
    best_scheme = report.warm_start;
    best_rate = warm_rate;
  }
  report.best = best_scheme;
  report.best_rate = best_rate;
  return report;
}

}  // namespace keyrate
