#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace keyrate {

/**
 * Joint law of a set of circularly-symmetric complex Gaussian scalars.
 *
 * The matrix must be Hermitian to 1e-12; eigenvalues down to -1e-12 are
 * treated as rounding and clamped to zero, anything more negative throws.
 */
class CovarianceModel {
 public:
  CovarianceModel(std::vector<std::string> labels, Eigen::MatrixXcd matrix);

  [[nodiscard]] const std::vector<std::string>& labels() const { return labels_; }
  [[nodiscard]] const Eigen::MatrixXcd& matrix() const { return matrix_; }
  [[nodiscard]] Eigen::Index index_of(const std::string& label) const;
  [[nodiscard]] bool contains(const std::string& label) const;

  /// Covariance restricted to `group`, in the order given.
  [[nodiscard]] Eigen::MatrixXcd block(const std::vector<std::string>& group) const;

  /// Same law with labels renamed through `rename` (pairs old -> new).
  [[nodiscard]] CovarianceModel relabeled(
      const std::vector<std::pair<std::string, std::string>>& rename) const;

 private:
  std::vector<std::string> labels_;
  Eigen::MatrixXcd matrix_;
};

struct MiResult {
  double bits = 0.0;
  /// Joint covariance loses rank relative to the marginals: I = +inf.
  bool infinite = false;
  /// Some factor had condition number above 1e12.
  bool ill_conditioned = false;
};

/// I(A;B) = log2(det S_A det S_B / det S_AB) using pseudo-determinants, so
/// degenerate (zero-variance) symbols carry no information instead of failing.
MiResult gaussian_mi(const CovarianceModel& model, const std::vector<std::string>& group_a,
                     const std::vector<std::string>& group_b);

/// Pilot estimation and test-channel quantization noise of the separation scheme.
struct EstimationChain {
  double alpha = 0.0;  ///< LMMSE coefficient P1/(1+P1)
  double q1 = 0.0;     ///< channel-quantization noise variance
  double q2 = 0.0;     ///< source-quantization noise variance

  static EstimationChain from_pilot(double p1, double q1 = 0.0, double q2 = 0.0);
};

inline double lmmse_coefficient(double p1) { return p1 / (1.0 + p1); }

// Symbol names used by the chain builders.
inline const std::string kH_AB = "h_AB";
inline const std::string kH_BA = "h_BA";
inline const std::string kHhat_AB = "hhat_AB";
inline const std::string kHhat_BA = "hhat_BA";
inline const std::string kU_AB = "u_AB";
inline const std::string kU_BA = "u_BA";

/// (h_AB, h_BA, hhat_AB, hhat_BA) for unit-variance gains correlated by rho
/// and single-pilot LMMSE estimates with independent errors of variance a(1-a).
CovarianceModel build_training_chain(double rho, double p1);

/// Training chain plus u = hhat + q with independent q ~ CN(0, q1).
CovarianceModel build_quantized_chain(double rho, double p1, double q1);

// Closed forms for the chains above, all in bits.

/// I(hhat_AB; hhat_BA) = -log2(1 - a^2 rho^2).
double estimate_pair_mi(double alpha, double rho);
/// I(u_AB; hhat_AB) = log2(1 + a/Q1). Infinite at Q1 = 0.
double quantized_own_mi(double alpha, double q1);
/// I(u_AB; hhat_BA) = -log2(1 - a^2 rho^2 / (1 + Q1/a)).
double quantized_cross_mi(double alpha, double rho, double q1);
/// I(u_AB; u_BA) = -log2(1 - a^2 rho^2 / (1 + Q1/a)^2).
double quantized_pair_mi(double alpha, double rho, double q1);
/// I(u_AB; hhat_AB) - I(u_AB; hhat_BA) = log2(1 + a(1 - a^2 rho^2)/Q1).
double quantization_rate_gap(double alpha, double rho, double q1);

/// 1 - a^2/(Q1 + a); the prior variance 1 when there is no estimate.
double sigma_sq_residual(double alpha, double q1);

/// sigma_sq_residual for alpha = P1/(1+P1), keeping 1 - alpha = 1/(1+P1) exact at large P1.
double sigma_sq_from_pilot(double p1, double q1);

}  // namespace keyrate
