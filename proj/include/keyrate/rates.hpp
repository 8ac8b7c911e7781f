#pragma once

#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "keyrate/expectation.hpp"
#include "keyrate/fading.hpp"
#include "keyrate/power_allocation.hpp"

namespace keyrate {

/// Coherence period, average power (linear, unit noise) and fading law.
class SystemParams {
 public:
  SystemParams(int T, double P, ChannelParams channel);

  [[nodiscard]] int T() const { return T_; }
  [[nodiscard]] double P() const { return P_; }
  [[nodiscard]] const ChannelParams& channel() const { return channel_; }

  /// Fraction of each block spent sharing randomness, (T-1)/T.
  [[nodiscard]] double sharing_fraction() const { return (T_ - 1.0) / T_; }

 private:
  int T_;
  double P_;
  ChannelParams channel_;
};

/// Pilot power, per-symbol sharing power and the public-message overheads.
struct SchemeParams {
  double p1 = 0.0;
  double p2 = 0.0;
  double eps1 = 0.0;
  double eps2 = 0.0;

  [[nodiscard]] double alpha() const { return p1 / (1.0 + p1); }

  /// Split with pilot share tau = p1/(T P) and the power constraint active.
  static SchemeParams from_split(const SystemParams& sys, double tau, double eps1 = 0.0, double eps2 = 0.0);
};

/// Throws unless p1, p2 >= 0 and p1 + (T-1) p2 <= T P (1e-9 relative slack).
void check_power_constraint(const SystemParams& sys, const SchemeParams& scheme);

/// Quantization noise implied by the message-rate constraints.
struct Quantization {
  double q1 = 0.0;
  double q2 = 0.0;
  double sigma_sq = 1.0;
};

enum class BoundLabel { training, upper, lower_pd, lower_nodisc };

std::string_view to_string(BoundLabel label);

/**
 * A bound and its additive parts, in bits per channel use.
 *
 * total = reciprocity_term + forward_term + reverse_term. penalty_terms is the
 * amount already subtracted inside the forward and reverse terms. For
 * lower_nodisc every part carries the overhead factor.
 */
struct RateBreakdown {
  BoundLabel label = BoundLabel::training;
  double total = 0.0;
  double reciprocity_term = 0.0;
  double forward_term = 0.0;
  double reverse_term = 0.0;
  double penalty_terms = 0.0;
  double std_error = 0.0;

  bool forward_clamped = false;
  bool reverse_clamped = false;
  double forward_unclamped = 0.0;
  double reverse_unclamped = 0.0;

  double overhead_factor = 1.0;
  bool infeasible_quantization = false;
  std::optional<Quantization> quantization;

  /// Upper bound only: dual gap of the power policy for each link.
  double power_dual_gap = 0.0;
  bool power_converged = true;

  std::vector<std::string> diagnostics;
};

/// Which coefficient multiplies eps1 in the channel-message constraint.
enum class Eps1Rule { Tminus1, T };

std::string_view to_string(Eps1Rule rule);

/// Communication rate available for public messages over the non-coherent channel.
class RncModel {
 public:
  enum class Kind { training_based, coherent_genie, constant_override };

  static RncModel training_based() { return RncModel(Kind::training_based, 0.0); }
  static RncModel coherent_genie() { return RncModel(Kind::coherent_genie, 0.0); }
  static RncModel constant(double value);

  RncModel(const RncModel& other);
  RncModel& operator=(const RncModel& other);

  [[nodiscard]] Kind kind() const { return kind_; }
  [[nodiscard]] double constant_value() const { return constant_; }

  /// Cached per (T, P). Always evaluated by quadrature at cfg.quadrature_order.
  [[nodiscard]] double rate(const SystemParams& sys, const EvalConfig& cfg) const;

 private:
  RncModel(Kind kind, double constant) : kind_(kind), constant_(constant) {}

  Kind kind_;
  double constant_;
  mutable std::mutex mu_;
  mutable std::map<std::pair<int, double>, double> cache_;
};

std::string_view to_string(RncModel::Kind kind);

double rate_nc(const RncModel& model, const SystemParams& sys, const EvalConfig& cfg);

/// Effective SNR of one-pilot training followed by data at power p_data.
double training_effective_snr(double p_pilot, double p_data, double var_h);

RateBreakdown rate_training(int T, double rho);

RateBreakdown rate_upper(const SystemParams& sys, const EvalConfig& cfg);

RateBreakdown rate_lower_pd(const SystemParams& sys, const SchemeParams& scheme, const ExpectationEngine& engine);
RateBreakdown rate_lower_pd(const SystemParams& sys, const SchemeParams& scheme, const EvalConfig& cfg);

struct NodiscOptions {
  Eps1Rule eps1_rule = Eps1Rule::Tminus1;
  std::optional<double> q1_override;
  std::optional<double> q2_override;
  bool apply_overhead = true;
};

/// Q1, Q2, sigma^2 from the constraints with equality. nullopt when eps R_NC = 0.
std::optional<Quantization> solve_quantization(const SystemParams& sys, const SchemeParams& scheme, double rnc,
                                               Eps1Rule rule);

RateBreakdown rate_lower_nodisc(const SystemParams& sys, const SchemeParams& scheme, const RncModel& rnc,
                                const ExpectationEngine& engine, const NodiscOptions& options = {});
RateBreakdown rate_lower_nodisc(const SystemParams& sys, const SchemeParams& scheme, const RncModel& rnc,
                                const EvalConfig& cfg, const NodiscOptions& options = {});

/// Key rate from the quantized estimates, 2 I(u;hhat_cross) - I(u_AB;u_BA), bits per block.
double nodisc_reciprocity_rate(double alpha, double rho, double q1);

}  // namespace keyrate
