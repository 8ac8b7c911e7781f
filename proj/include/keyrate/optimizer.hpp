#pragma once

#include <vector>

#include "keyrate/rates.hpp"

namespace keyrate {

enum class OptimizeTarget { lower_pd, lower_nodisc };

std::string_view to_string(OptimizeTarget target);

/**
 * Search space for optimize_scheme. tau = p1/(T P) is searched on a logit
 * grid (dense near both ends), eps1 and eps2 on log grids; each coarse pick
 * is refined by golden-section between its grid neighbours. For lower_nodisc
 * every pass ends with a line search along that pass's net displacement.
 */
struct OptimizeSpec {
  OptimizeTarget target = OptimizeTarget::lower_pd;
  double tau_min = 1e-9;
  double tau_max = 1.0 - 1e-9;
  int tau_grid = 17;
  double eps_min = 1e-4;
  double eps_max = 1.0;
  int eps_grid = 13;
  int passes = 3;
  double tolerance = 1e-6;  ///< bits; stops passes early and ends golden-section
  int final_sample_factor = 4;
  NodiscOptions nodisc;
};

/// Throws InvalidArgument on an empty grid or a range outside (0, 1) / (0, inf).
void validate(const OptimizeSpec& spec);

struct TraceEntry {
  SchemeParams scheme;
  double total = 0.0;
};

struct OptimizeReport {
  SchemeParams best;
  RateBreakdown best_rate;
  std::vector<TraceEntry> trace;
  SchemeParams warm_start;
  double warm_start_rate = 0.0;
  /// Best objective value after each pass on the search samples.
  std::vector<double> pass_best;
  bool warm_start_is_high_snr_schedule = true;
};

/// p1 = P - sqrt(P), p2 = sqrt(P)/(T-1), eps1 = eps2 = 1/log2(1+P). Requires P > 1.
SchemeParams high_snr_schedule(double P, int T);

/**
 * Maximizes the chosen lower bound over (tau, eps1, eps2) by coordinate
 * search with the power constraint active. The objective uses one sample set
 * per run; the winner and the warm start are re-evaluated on
 * cfg.n_samples * final_sample_factor samples without the sample cache and
 * the better of the two is reported.
 */
OptimizeReport optimize_scheme(const SystemParams& sys, const OptimizeSpec& spec, const RncModel& rnc,
                               const EvalConfig& cfg);

}  // namespace keyrate
