#include "keyrate/gaussian_info.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "keyrate/fading.hpp"

namespace keyrate {

namespace {

constexpr double kHermitianTol = 1e-12;
constexpr double kNegativeEigenTol = 1e-12;
constexpr double kRankTol = 1e-12;
constexpr double kIllConditioned = 1e12;

struct LogDet {
  double value = 0.0;  // natural log of the pseudo-determinant
  Eigen::Index rank = 0;
  bool ill_conditioned = false;
};

LogDet pseudo_log_det(const Eigen::MatrixXcd& m) {
  LogDet out;
  if (m.rows() == 0) return out;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(m, Eigen::EigenvaluesOnly);
  const auto& eig = solver.eigenvalues();
  const double largest = eig.maxCoeff();
  if (largest <= 0.0) return out;
  const double floor = kRankTol * largest;
  double smallest = largest;
  for (Eigen::Index i = 0; i < eig.size(); ++i) {
    if (eig[i] > floor) {
      out.value += std::log(eig[i]);
      ++out.rank;
      smallest = std::min(smallest, eig[i]);
    }
  }
  out.ill_conditioned = largest / smallest > kIllConditioned;
  return out;
}

inline double neg_log2_one_minus(double x) { return -std::log1p(-x) / std::numbers::ln2; }

}  // namespace

CovarianceModel::CovarianceModel(std::vector<std::string> labels, Eigen::MatrixXcd matrix)
    : labels_(std::move(labels)), matrix_(std::move(matrix)) {
  const auto n = static_cast<Eigen::Index>(labels_.size());
  if (matrix_.rows() != n || matrix_.cols() != n) {
    throw InvalidArgument("covariance matrix size does not match the label count");
  }
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    for (std::size_t j = i + 1; j < labels_.size(); ++j) {
      if (labels_[i] == labels_[j]) throw InvalidArgument("duplicate symbol " + labels_[i]);
    }
  }
  if ((matrix_ - matrix_.adjoint()).cwiseAbs().maxCoeff() > kHermitianTol) {
    throw InvalidArgument("covariance matrix is not Hermitian");
  }
  matrix_ = 0.5 * (matrix_ + matrix_.adjoint()).eval();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(matrix_);
  Eigen::VectorXd eig = solver.eigenvalues();
  if (eig.size() > 0 && eig.minCoeff() < 0.0) {
    if (eig.minCoeff() < -kNegativeEigenTol) {
      throw InvalidArgument("covariance matrix is not positive semidefinite");
    }
    eig = eig.cwiseMax(0.0);
    matrix_ = solver.eigenvectors() * eig.asDiagonal() * solver.eigenvectors().adjoint();
  }
}

Eigen::Index CovarianceModel::index_of(const std::string& label) const {
  const auto it = std::find(labels_.begin(), labels_.end(), label);
  if (it == labels_.end()) throw InvalidArgument("unknown symbol " + label);
  return static_cast<Eigen::Index>(it - labels_.begin());
}

bool CovarianceModel::contains(const std::string& label) const {
  return std::find(labels_.begin(), labels_.end(), label) != labels_.end();
}

Eigen::MatrixXcd CovarianceModel::block(const std::vector<std::string>& group) const {
  const auto n = static_cast<Eigen::Index>(group.size());
  std::vector<Eigen::Index> idx;
  idx.reserve(group.size());
  for (const auto& label : group) idx.push_back(index_of(label));
  Eigen::MatrixXcd out(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) out(i, j) = matrix_(idx[i], idx[j]);
  }
  return out;
}

CovarianceModel CovarianceModel::relabeled(
    const std::vector<std::pair<std::string, std::string>>& rename) const {
  auto labels = labels_;
  for (auto& label : labels) {
    for (const auto& [from, to] : rename) {
      if (label == from) {
        label = to;
        break;
      }
    }
  }
  return CovarianceModel(std::move(labels), matrix_);
}

MiResult gaussian_mi(const CovarianceModel& model, const std::vector<std::string>& group_a,
                     const std::vector<std::string>& group_b) {
  for (const auto& a : group_a) {
    if (std::find(group_b.begin(), group_b.end(), a) != group_b.end()) {
      throw InvalidArgument("symbol " + a + " appears in both groups");
    }
  }
  std::vector<std::string> joint = group_a;
  joint.insert(joint.end(), group_b.begin(), group_b.end());

  // Work with correlations: MI is invariant to per-symbol scaling, and the
  // rank test should not depend on how different the variances are.
  const Eigen::MatrixXcd cov = model.block(joint);
  const auto n_a = static_cast<Eigen::Index>(group_a.size());
  const double max_var = cov.rows() > 0 ? cov.diagonal().real().maxCoeff() : 0.0;
  std::vector<Eigen::Index> keep_a, keep_b;
  for (Eigen::Index i = 0; i < cov.rows(); ++i) {
    if (cov(i, i).real() > kRankTol * max_var) (i < n_a ? keep_a : keep_b).push_back(i);
  }
  std::vector<Eigen::Index> keep = keep_a;
  keep.insert(keep.end(), keep_b.begin(), keep_b.end());
  const auto n = static_cast<Eigen::Index>(keep.size());
  Eigen::MatrixXcd corr(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      corr(i, j) = cov(keep[i], keep[j]) /
                   std::sqrt(cov(keep[i], keep[i]).real() * cov(keep[j], keep[j]).real());
    }
  }
  const auto ka = static_cast<Eigen::Index>(keep_a.size());
  const LogDet det_a = pseudo_log_det(corr.topLeftCorner(ka, ka));
  const LogDet det_b = pseudo_log_det(corr.bottomRightCorner(n - ka, n - ka));
  const LogDet det_ab = pseudo_log_det(corr);

  MiResult result;
  result.ill_conditioned = det_a.ill_conditioned || det_b.ill_conditioned || det_ab.ill_conditioned;
  if (det_ab.rank < det_a.rank + det_b.rank) {
    result.infinite = true;
    result.bits = std::numeric_limits<double>::infinity();
    return result;
  }
  const double nats = det_a.value + det_b.value - det_ab.value;
  result.bits = std::max(0.0, nats / std::numbers::ln2);
  return result;
}

EstimationChain EstimationChain::from_pilot(double p1, double q1, double q2) {
  if (!(p1 >= 0.0)) throw InvalidArgument("pilot power must be non-negative");
  if (!(q1 >= 0.0) || !(q2 >= 0.0)) throw InvalidArgument("quantization noise must be non-negative");
  return {lmmse_coefficient(p1), q1, q2};
}

CovarianceModel build_training_chain(double rho, double p1) {
  if (!(rho >= 0.0 && rho < 1.0)) throw InvalidArgument("rho must lie in [0, 1)");
  if (!(p1 >= 0.0)) throw InvalidArgument("pilot power must be non-negative");
  const double a = lmmse_coefficient(p1);
  Eigen::MatrixXcd m(4, 4);
  // h_AB, h_BA, hhat_AB, hhat_BA
  m << 1.0, rho, a, a * rho,
       rho, 1.0, a * rho, a,
       a, a * rho, a, a * a * rho,
       a * rho, a, a * a * rho, a;
  return CovarianceModel({kH_AB, kH_BA, kHhat_AB, kHhat_BA}, m);
}

CovarianceModel build_quantized_chain(double rho, double p1, double q1) {
  if (!(q1 >= 0.0)) throw InvalidArgument("quantization noise must be non-negative");
  const auto base = build_training_chain(rho, p1);
  const double a = lmmse_coefficient(p1);
  Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(6, 6);
  m.topLeftCorner(4, 4) = base.matrix();
  // u = hhat + q: covariance with any other symbol equals that of hhat.
  for (Eigen::Index k = 0; k < 4; ++k) {
    m(4, k) = m(k, 4) = base.matrix()(2, k);
    m(5, k) = m(k, 5) = base.matrix()(3, k);
  }
  m(4, 4) = m(5, 5) = a + q1;
  m(4, 5) = m(5, 4) = a * a * rho;
  return CovarianceModel({kH_AB, kH_BA, kHhat_AB, kHhat_BA, kU_AB, kU_BA}, m);
}

double estimate_pair_mi(double alpha, double rho) { return neg_log2_one_minus(alpha * alpha * rho * rho); }

double quantized_own_mi(double alpha, double q1) {
  if (alpha == 0.0) return 0.0;
  if (q1 == 0.0) return std::numeric_limits<double>::infinity();
  return std::log1p(alpha / q1) / std::numbers::ln2;
}

// a^2 rho^2 / (1 + Q1/a) written as a^3 rho^2 / (a + Q1) so a = 0 stays finite.
double quantized_cross_mi(double alpha, double rho, double q1) {
  if (alpha == 0.0) return 0.0;
  return neg_log2_one_minus(alpha * alpha * alpha * rho * rho / (alpha + q1));
}

double quantized_pair_mi(double alpha, double rho, double q1) {
  if (alpha == 0.0) return 0.0;
  const double ratio = alpha / (alpha + q1);
  return neg_log2_one_minus(alpha * alpha * rho * rho * ratio * ratio);
}

double quantization_rate_gap(double alpha, double rho, double q1) {
  if (alpha == 0.0) return 0.0;
  if (q1 == 0.0) return std::numeric_limits<double>::infinity();
  return std::log1p(alpha * (1.0 - alpha * alpha * rho * rho) / q1) / std::numbers::ln2;
}

double sigma_sq_residual(double alpha, double q1) {
  if (alpha == 0.0) return 1.0;
  return 1.0 - alpha * alpha / (q1 + alpha);
}

double sigma_sq_from_pilot(double p1, double q1) {
  if (p1 == 0.0) return 1.0;
  const double alpha = lmmse_coefficient(p1);
  const double one_minus_alpha = 1.0 / (1.0 + p1);
  return (q1 + alpha * one_minus_alpha) / (q1 + alpha);
}

}  // namespace keyrate
