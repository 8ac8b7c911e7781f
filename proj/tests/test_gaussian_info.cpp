#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "keyrate/gaussian_info.hpp"
#include "keyrate/fading.hpp"

using namespace keyrate;

namespace {

CovarianceModel correlated_pair(double rho) {
  Eigen::MatrixXcd m(2, 2);
  m << 1.0, rho, rho, 1.0;
  return CovarianceModel({"x", "y"}, m);
}

double mi(const CovarianceModel& model, const std::string& a, const std::string& b) {
  return gaussian_mi(model, {a}, {b}).bits;
}

// Random (P1, rho, Q1) spanning the same ranges as the acceptance grid.
struct ChainPoint {
  double p1, rho, q1;
};

std::vector<ChainPoint> random_points(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> log_p1(std::log(0.1), std::log(1e4));
  std::uniform_real_distribution<double> rho(0.0, 0.999);
  std::uniform_real_distribution<double> log_q1(std::log(1e-4), std::log(1e2));
  std::vector<ChainPoint> out(n);
  for (auto& p : out) p = {std::exp(log_p1(gen)), rho(gen), std::exp(log_q1(gen))};
  return out;
}

}  // namespace

TEST(GaussianMi, IndependentPairIsZero) { EXPECT_EQ(mi(correlated_pair(0.0), "x", "y"), 0.0); }

TEST(GaussianMi, CorrelatedPairMatchesDeterminant) {
  // det = 1 - 0.95^2 = 0.0975, I = log2(1/0.0975).
  EXPECT_NEAR(mi(correlated_pair(0.95), "x", "y"), 3.358453970912476, 1e-12);
}

TEST(GaussianMi, ComplexEntriesUseModulus) {
  Eigen::MatrixXcd m(2, 2);
  const std::complex<double> c(0.6, 0.5);
  m << 1.0, c, std::conj(c), 1.0;
  const CovarianceModel model({"x", "y"}, m);
  EXPECT_NEAR(mi(model, "x", "y"), -std::log2(1.0 - std::norm(c)), 1e-12);
}

TEST(GaussianMi, RejectsBadInput) {
  Eigen::MatrixXcd asym(2, 2);
  asym << 1.0, 0.5, 0.4, 1.0;
  EXPECT_THROW(CovarianceModel({"x", "y"}, asym), InvalidArgument);
  Eigen::MatrixXcd indefinite(2, 2);
  indefinite << 1.0, 2.0, 2.0, 1.0;
  EXPECT_THROW(CovarianceModel({"x", "y"}, indefinite), InvalidArgument);
  const auto model = correlated_pair(0.5);
  EXPECT_THROW(gaussian_mi(model, {"x"}, {"x"}), InvalidArgument);
  EXPECT_THROW(gaussian_mi(model, {"x"}, {"z"}), InvalidArgument);
}

TEST(GaussianMi, TinyNegativeEigenvalueIsClamped) {
  Eigen::MatrixXcd m(2, 2);
  m << 1.0, 1.0 + 1e-13, 1.0 + 1e-13, 1.0;
  EXPECT_NO_THROW(CovarianceModel({"x", "y"}, m));
}

TEST(GaussianMi, SingularJointIsInfinite) {
  const auto r = gaussian_mi(correlated_pair(1.0 - 1e-17), {"x"}, {"y"});
  EXPECT_TRUE(r.infinite);
  EXPECT_TRUE(std::isinf(r.bits));
}

TEST(TrainingChain, CovarianceStructure) {
  const auto model = build_training_chain(0.95, 9.0);
  const double a = 0.9;
  const auto& m = model.matrix();
  EXPECT_NEAR(m(model.index_of(kHhat_AB), model.index_of(kHhat_AB)).real(), a, 1e-15);
  EXPECT_NEAR(m(model.index_of(kHhat_AB), model.index_of(kHhat_BA)).real(), a * a * 0.95, 1e-15);
  // Estimation error hhat - a h has variance a(1 - a) and is uncorrelated with h.
  const auto ih = model.index_of(kH_AB), ie = model.index_of(kHhat_AB);
  const double err_var = m(ie, ie).real() - 2 * a * m(ie, ih).real() + a * a * m(ih, ih).real();
  EXPECT_NEAR(err_var, a * (1 - a), 1e-15);
  EXPECT_NEAR(m(ie, ih).real() - a * m(ih, ih).real(), 0.0, 1e-15);
}

TEST(TrainingChain, NoPilotMeansNoEstimate) {
  const auto model = build_training_chain(0.95, 0.0);
  EXPECT_EQ(model.block({kHhat_AB, kHhat_BA}).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(mi(model, kHhat_AB, kHhat_BA), 0.0);
}

TEST(TrainingChain, EstimatePairMi) {
  const auto model = build_training_chain(0.95, 9.0);
  EXPECT_NEAR(mi(model, kHhat_AB, kHhat_BA), 1.894456007801074, 1e-10);
  EXPECT_NEAR(estimate_pair_mi(0.9, 0.95), 1.894456007801074, 1e-12);
}

TEST(TrainingChain, StrongPilotApproachesGainMi) {
  const auto model = build_training_chain(0.95, 1e12);
  EXPECT_NEAR(mi(model, kHhat_AB, kHhat_BA), -std::log2(1 - 0.95 * 0.95), 1e-9);
}

TEST(QuantizedChain, OwnEstimateMi) {
  const auto model = build_quantized_chain(0.95, 9.0, 0.1);
  EXPECT_NEAR(mi(model, kU_AB, kHhat_AB), 3.321928094887362, 1e-10);
  EXPECT_NEAR(quantized_own_mi(0.9, 0.1), 3.321928094887362, 1e-12);
}

TEST(QuantizedChain, PureNoiseQuantizerCarriesNothing) {
  const auto model = build_quantized_chain(0.95, 9.0, 1e12);
  EXPECT_LT(mi(model, kU_AB, kHhat_AB), 1e-10);
  EXPECT_LT(mi(model, kU_AB, kHhat_BA), 1e-10);
  EXPECT_LT(mi(model, kU_AB, kU_BA), 1e-10);
}

TEST(QuantizedChain, RateGapIdentity) {
  const auto model = build_quantized_chain(0.95, 9.0, 0.1);
  const double diff = mi(model, kU_AB, kHhat_AB) - mi(model, kU_AB, kHhat_BA);
  EXPECT_NEAR(diff, std::log2(1 + 0.9 * (1 - 0.81 * 0.9025) / 0.1), 1e-10);
  EXPECT_NEAR(quantization_rate_gap(0.9, 0.95, 0.1), diff, 1e-10);
}

TEST(QuantizedChain, ZeroQuantizationNoise) {
  const auto model = build_quantized_chain(0.95, 9.0, 0.0);
  const auto own = gaussian_mi(model, {kU_AB}, {kHhat_AB});
  EXPECT_TRUE(own.infinite);
  const auto cross = gaussian_mi(model, {kU_AB}, {kHhat_BA});
  EXPECT_FALSE(cross.infinite);
  EXPECT_NEAR(cross.bits, estimate_pair_mi(0.9, 0.95), 1e-10);
  EXPECT_TRUE(std::isinf(quantized_own_mi(0.9, 0.0)));
}

TEST(SigmaSqResidual, Values) {
  const double p1 = 4.0;
  EXPECT_NEAR(sigma_sq_residual(lmmse_coefficient(p1), 0.0), 1.0 / (1.0 + p1), 1e-15);
  EXPECT_EQ(sigma_sq_residual(0.0, 0.3), 1.0);
  EXPECT_EQ(sigma_sq_residual(0.0, 0.0), 1.0);
  EXPECT_NEAR(sigma_sq_residual(0.9, 0.1), 0.19, 1e-15);
}

TEST(ClosedForms, MatchCovarianceOracleOnRandomGrid) {
  for (const auto& p : random_points(300, 7)) {
    const auto model = build_quantized_chain(p.rho, p.p1, p.q1);
    const double a = lmmse_coefficient(p.p1);
    EXPECT_NEAR(mi(model, kU_AB, kHhat_AB), quantized_own_mi(a, p.q1), 1e-10);
    EXPECT_NEAR(mi(model, kU_AB, kHhat_BA), quantized_cross_mi(a, p.rho, p.q1), 1e-10);
    EXPECT_NEAR(mi(model, kU_AB, kU_BA), quantized_pair_mi(a, p.rho, p.q1), 1e-10);
    EXPECT_NEAR(mi(model, kHhat_AB, kHhat_BA), estimate_pair_mi(a, p.rho), 1e-10);
    EXPECT_NEAR(mi(model, kU_AB, kHhat_AB) - mi(model, kU_AB, kHhat_BA),
                quantization_rate_gap(a, p.rho, p.q1), 1e-10);
  }
}

TEST(ClosedForms, SymmetricUnderLinkSwap) {
  for (const auto& p : random_points(50, 8)) {
    const auto model = build_quantized_chain(p.rho, p.p1, p.q1);
    const auto swapped = model.relabeled({{kH_AB, kH_BA}, {kH_BA, kH_AB}, {kHhat_AB, kHhat_BA},
                                          {kHhat_BA, kHhat_AB}, {kU_AB, kU_BA}, {kU_BA, kU_AB}});
    for (const auto& [a, b] : {std::pair{kU_AB, kHhat_AB}, std::pair{kU_AB, kHhat_BA},
                               std::pair{kU_AB, kU_BA}, std::pair{kHhat_AB, kH_BA}}) {
      EXPECT_NEAR(mi(model, a, b), mi(swapped, a, b), 1e-10);
    }
  }
}

TEST(ClosedForms, DataProcessingAlongMarkovChain) {
  for (const auto& p : random_points(200, 9)) {
    const auto model = build_quantized_chain(p.rho, p.p1, p.q1);
    const double uu = mi(model, kU_AB, kU_BA);
    const double uh = mi(model, kU_AB, kHhat_BA);
    const double hh = mi(model, kHhat_AB, kHhat_BA);
    EXPECT_LE(uu, uh + 1e-12);
    EXPECT_LE(uh, hh + 1e-12);
  }
}

TEST(ClosedForms, NonIncreasingInQuantizationNoise) {
  for (const auto& p : random_points(100, 10)) {
    const auto lo = build_quantized_chain(p.rho, p.p1, p.q1);
    const auto hi = build_quantized_chain(p.rho, p.p1, 2.0 * p.q1);
    for (const auto& [a, b] : {std::pair{kU_AB, kHhat_AB}, std::pair{kU_AB, kHhat_BA},
                               std::pair{kU_AB, kU_BA}}) {
      EXPECT_GE(mi(lo, a, b) + 1e-12, mi(hi, a, b));
    }
  }
}

TEST(SigmaSqResidual, PilotFormAgreesAndStaysExact) {
  for (double p1 : {0.0, 0.3, 9.0, 1e3}) {
    for (double q1 : {0.0, 1e-3, 0.1, 10.0}) {
      if (p1 == 0.0 && q1 == 0.0) continue;
      EXPECT_NEAR(sigma_sq_from_pilot(p1, q1), sigma_sq_residual(lmmse_coefficient(p1), q1), 1e-13);
    }
  }
  EXPECT_EQ(sigma_sq_from_pilot(0.0, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(sigma_sq_from_pilot(1e12, 0.0), 1.0 / (1.0 + 1e12));
}
