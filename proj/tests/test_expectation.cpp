#include <gtest/gtest.h>

#include <cmath>

#include "keyrate/expectation.hpp"

using namespace keyrate;

namespace {

EvalConfig mc_config(std::uint64_t n, std::uint64_t seed = 1) {
  EvalConfig cfg;
  cfg.n_samples = n;
  cfg.seed = seed;
  cfg.workers = 1;
  return cfg;
}

double ratio_limit_closed_form(double a) {
  if (a == 1.0) return 1.0 / std::log(2.0);
  return a * std::log(a) / ((a - 1.0) * std::log(2.0));
}

struct Reference {
  Functional f;
  double value;
};

// Independent high-precision evaluations.
const std::vector<Reference>& references() {
  static const std::vector<Reference> refs = {
      {Functional::simple(1.0), 0.8603473822708860},
      {Functional::simple(0.5), 0.5212870037159069},
      {Functional::simple(10.0), 2.906514808414805},
      {Functional::simple(1000.0), 9.143619491037331},
      {Functional::simple(1e6), 19.09884293357537},
      {Functional::ratio(1.0, 1.0), 0.5823476586180775},
      {Functional::ratio(10.0, 1.0), 2.273519362382132},
      {Functional::ratio(1.0, 10.0), 0.2273519362382132},
      {Functional::ratio(100.0, 100.0), 1.383854558552129},
      {Functional::ratio(1000.0 / 9.0, 1000.0 / 9.0), 1.388424180692329},
      {Functional::ratio(1e8, 1e8), 1.442694783462175},
      {Functional::ratio(1000.0, 0.5), 8.626645810226537},
      {Functional::ratio_limit(1.0), 1.4426950408889634},
      {Functional::ratio_limit(4.0), 2.6666666666666667},
  };
  return refs;
}

}  // namespace

TEST(Functional, RejectsNegativeOrNonFinite) {
  EXPECT_THROW(Functional::ratio(-1.0, 1.0), InvalidArgument);
  EXPECT_THROW(Functional::ratio(1.0, NAN), InvalidArgument);
  EXPECT_THROW(Functional::simple(INFINITY), InvalidArgument);
}

TEST(Quadrature, MatchesReferenceValues) {
  for (const auto& r : references()) {
    const auto q = eval_quadrature(r.f, 64);
    EXPECT_NEAR(q.value, r.value, 1e-8) << to_string(r.f.kind) << " a=" << r.f.a << " b=" << r.f.b;
    EXPECT_TRUE(q.converged);
    EXPECT_EQ(q.std_error, 0.0);
    EXPECT_GT(q.n_samples, 0u);
  }
}

TEST(Quadrature, RatioLimitMatchesClosedForm) {
  for (double a : {0.01, 0.3, 1.0, 2.0, 17.0, 1e4}) {
    EXPECT_NEAR(eval_quadrature(Functional::ratio_limit(a), 64).value, ratio_limit_closed_form(a), 1e-9) << a;
  }
}

TEST(Quadrature, RejectsOrderOutOfRange) {
  EXPECT_THROW(eval_quadrature(Functional::simple(1.0), 4), InvalidArgument);
  EXPECT_THROW(eval_quadrature(Functional::simple(1.0), 512), InvalidArgument);
}

TEST(Quadrature, ZeroCoefficientIsZero) {
  EXPECT_EQ(eval_quadrature(Functional::simple(0.0), 32).value, 0.0);
  EXPECT_EQ(eval_quadrature(Functional::ratio(0.0, 3.0), 32).value, 0.0);
}

TEST(MonteCarlo, AgreesWithReferenceWithinFourSigma) {
  const auto cfg = mc_config(400'000);
  for (const auto& r : references()) {
    const auto m = eval_mc(r.f, cfg, link_stream(cfg.seed, Link::forward));
    EXPECT_GT(m.std_error, 0.0);
    EXPECT_LT(std::abs(m.value - r.value), 4.0 * m.std_error)
        << to_string(r.f.kind) << " a=" << r.f.a << " b=" << r.f.b << " se=" << m.std_error;
  }
}

TEST(MonteCarlo, ReportsSampleCount) {
  auto cfg = mc_config(10'000);
  EXPECT_EQ(eval_mc(Functional::simple(1.0), cfg, link_stream(1, Link::forward)).n_samples, 10'000u);
  cfg.antithetic = false;
  EXPECT_EQ(eval_mc(Functional::simple(1.0), cfg, link_stream(1, Link::forward)).n_samples, 10'000u);
  cfg.n_samples = 999;
  EXPECT_THROW(eval_mc(Functional::simple(1.0), cfg, link_stream(1, Link::forward)), InvalidArgument);
}

TEST(MonteCarlo, StandardErrorShrinksWithSamples) {
  const auto f = Functional::ratio(10.0, 1.0);
  const auto small = eval_mc(f, mc_config(40'000), link_stream(1, Link::forward));
  const auto large = eval_mc(f, mc_config(640'000), link_stream(1, Link::forward));
  EXPECT_NEAR(small.std_error / large.std_error, 4.0, 0.4);
}

TEST(MonteCarlo, AntitheticReducesVariance) {
  auto cfg = mc_config(200'000);
  const auto f = Functional::simple(1.0);
  const auto anti = eval_mc(f, cfg, link_stream(1, Link::forward));
  cfg.antithetic = false;
  const auto plain = eval_mc(f, cfg, link_stream(1, Link::forward));
  EXPECT_LT(anti.std_error, plain.std_error);
}

TEST(MonteCarlo, DeterministicForSeed) {
  const auto f = Functional::ratio(3.0, 2.0);
  const auto a = eval_mc(f, mc_config(100'000, 5), link_stream(5, Link::forward));
  const auto b = eval_mc(f, mc_config(100'000, 5), link_stream(5, Link::forward));
  const auto c = eval_mc(f, mc_config(100'000, 6), link_stream(6, Link::forward));
  EXPECT_EQ(a.value, b.value);
  EXPECT_NE(a.value, c.value);
}

TEST(MonteCarlo, LinksUseIndependentStreams) {
  const auto f = Functional::ratio(3.0, 2.0);
  const auto cfg = mc_config(100'000);
  EXPECT_NE(eval_mc(f, cfg, link_stream(1, Link::forward)).value,
            eval_mc(f, cfg, link_stream(1, Link::reverse)).value);
}

TEST(MonteCarlo, WorkerCountDoesNotChangeResult) {
  const auto f = Functional::ratio(7.0, 0.3);
  auto cfg = mc_config(300'001);
  const auto one = eval_mc(f, cfg, link_stream(1, Link::forward));
  cfg.workers = 4;
  const auto four = eval_mc(f, cfg, link_stream(1, Link::forward));
  EXPECT_EQ(one.value, four.value);
  EXPECT_EQ(one.std_error, four.std_error);
}

TEST(MonteCarlo, CachedSetMatchesStreaming) {
  const auto cfg = mc_config(150'000);
  const auto stream = link_stream(1, Link::reverse);
  const auto set = McSampleSet::draw(stream, cfg.n_samples, cfg.antithetic, 3);
  for (const auto& f : {Functional::ratio(2.0, 5.0), Functional::simple(100.0), Functional::ratio_limit(1.0)}) {
    const auto cached = set.evaluate(f, 2);
    const auto streamed = eval_mc(f, cfg, stream);
    EXPECT_EQ(cached.value, streamed.value);
    EXPECT_EQ(cached.std_error, streamed.std_error);
    EXPECT_EQ(cached.n_samples, streamed.n_samples);
  }
}

TEST(Functional, MonotoneInCoefficients) {
  double prev = 0.0;
  for (double a : {0.1, 1.0, 10.0, 100.0, 1e4}) {
    const double v = eval_quadrature(Functional::ratio(a, 2.0), 64).value;
    EXPECT_GT(v, prev);
    prev = v;
  }
  prev = INFINITY;
  for (double b : {0.0, 0.1, 1.0, 10.0, 100.0}) {
    const double v = eval_quadrature(Functional::ratio(5.0, b), 64).value;
    EXPECT_LT(v, prev);
    prev = v;
  }
}

TEST(Functional, SimpleIsConcaveInPower) {
  for (double a : {0.1, 1.0, 10.0, 1000.0}) {
    const double lo = eval_quadrature(Functional::simple(a), 64).value;
    const double mid = eval_quadrature(Functional::simple(1.5 * a), 64).value;
    const double hi = eval_quadrature(Functional::simple(2.0 * a), 64).value;
    EXPECT_GE(mid, 0.5 * (lo + hi));
  }
}

TEST(Functional, RatioApproachesLimitAtHighPower) {
  const double l1 = 1.0 / std::log(2.0);
  EXPECT_NEAR(eval_quadrature(Functional::ratio(1e8, 1e8), 64).value, l1, 1e-6);
}

TEST(GammaConstant, UnitVariancesGiveTwoOverLn2) {
  EvalConfig cfg;
  cfg.method = EvalMethod::quadrature;
  const auto q = gamma_constant(ChannelParams(0.95), cfg);
  EXPECT_NEAR(q.value, 2.0 / std::log(2.0), 1e-9);
  const auto m = gamma_constant(ChannelParams(0.95), mc_config(200'000));
  EXPECT_LT(std::abs(m.value - 2.0 / std::log(2.0)), 4.0 * m.std_error);
}

TEST(GammaConstant, ScalesWithVarianceRatio) {
  EvalConfig cfg;
  cfg.method = EvalMethod::quadrature;
  EXPECT_NEAR(gamma_constant(ChannelParams(0.5, 4.0, 1.0), cfg).value, 16.0 / 3.0, 1e-9);
  EXPECT_NEAR(gamma_constant(ChannelParams(0.5, 2.0, 0.5), cfg).value, 16.0 / 3.0, 1e-9);
}

TEST(Engine, MemoizesAndReusesSamples) {
  const ExpectationEngine engine(mc_config(100'000));
  const auto f = Functional::ratio(3.0, 1.0);
  const auto a = engine.expect(f, Link::forward);
  const auto b = engine.expect(f, Link::forward);
  EXPECT_EQ(a.value, b.value);
  const auto direct = eval_mc(f, engine.config(), link_stream(1, Link::forward));
  EXPECT_EQ(a.value, direct.value);
  EXPECT_NE(a.value, engine.expect(f, Link::reverse).value);
}

TEST(Engine, StreamingModeMatchesCachedMode) {
  const ExpectationEngine cached(mc_config(100'000), true);
  const ExpectationEngine streaming(mc_config(100'000), false);
  const auto f = Functional::ratio(30.0, 0.2);
  EXPECT_EQ(cached.expect(f, Link::reverse).value, streaming.expect(f, Link::reverse).value);
}

TEST(Engine, QuadratureIgnoresLink) {
  EvalConfig cfg;
  cfg.method = EvalMethod::quadrature;
  const ExpectationEngine engine(cfg);
  const auto f = Functional::ratio(3.0, 1.0);
  EXPECT_EQ(engine.expect(f, Link::forward).value, engine.expect(f, Link::reverse).value);
}
