#include <cmath>

#include <gtest/gtest.h>

#include "istlab/criticality.hpp"
#include "istlab/kernel.hpp"
#include "istlab/rate.hpp"

using namespace istlab;

namespace {

std::vector<double> scan() {
  std::vector<double> s;
  for (int i = 0; i < 64; ++i) s.push_back(std::pow(10.0, 4.0 * i / 63.0));
  return s;
}

}  // namespace

TEST(Classify, Verdicts) {
  EXPECT_EQ(classify_asymptotic(RateFunction::constant(1.0), LifetimeKernel::pareto(3.0), scan()).verdict,
            Verdict::SupercriticalSufficient);
  EXPECT_EQ(classify_asymptotic(RateFunction::constant(0.5), LifetimeKernel::dirac(1.0), scan()).verdict,
            Verdict::SubcriticalSufficient);
  const auto r = classify_asymptotic(RateFunction::asymptotically_critical(1.0), LifetimeKernel::dirac(1.0), scan());
  EXPECT_EQ(r.verdict, Verdict::Inconclusive);
  EXPECT_TRUE(r.stabilized);
}

TEST(Classify, InfiniteMeanIsInconclusive) {
  EXPECT_EQ(classify_asymptotic(RateFunction::constant(1.0), LifetimeKernel::pareto(1.0), scan()).verdict,
            Verdict::Inconclusive);
}

TEST(IntegralDrift, ConstantClosedForm) {
  const double b = 1.0, m = 2.0, dx = 0.05;
  const auto psi = integral_drift_profile(RateFunction::constant(b), [&](double) { return m; }, 5.0, dx);
  for (std::size_t i = 0; i < psi.size(); i += 10) {
    const double x = static_cast<double>(i) * dx;
    EXPECT_NEAR(psi[i], (m * b - 1.0) * (1.0 - std::exp(-b * x)) / b, 1e-10);
  }
}

TEST(IntegralDrift, CriticalIsZero) {
  const auto psi = integral_drift_profile(RateFunction::constant(2.0), [](double) { return 0.5; }, 3.0, 0.1);
  for (double v : psi) EXPECT_NEAR(v, 0.0, 1e-14);
}

TEST(DiscreteDrift, IdentityAndConstants) {
  const auto b = RateFunction::constant(1.0);
  const auto K = LifetimeKernel::dirac(1.7);
  for (double x : {0.5, 1.0, 3.0})
    EXPECT_NEAR(discrete_drift(b, K, [](double y) { return y; }, x), 0.7 * (1.0 - std::exp(-x)), 1e-9);
  EXPECT_NEAR(discrete_drift(b, K, [](double) { return 2.0; }, 1.3), 0.0, 1e-10);
  EXPECT_EQ(discrete_drift(b, K, [](double y) { return y; }, 0.0), 0.0);
}

TEST(Periodic, SupConstant) {
  EXPECT_NEAR(periodic_sup_phi(1.0, 0.0), 0.5072555, 1e-4);
  EXPECT_NEAR(periodic_sup_phi(1.0, 0.3), 0.5072555 + 0.3, 1e-4);
  EXPECT_LT(periodic_sup_phi(1.0, -0.6), 0.0);
}

TEST(Periodic, AsymptoteIsPeriodic) {
  for (double t : {0.0, 0.4, 2.0})
    EXPECT_NEAR(periodic_drift_asymptote(1.0, 0.2, t), periodic_drift_asymptote(1.0, 0.2, t + 2.0 * M_PI), 1e-12);
  // sup of (cos t + sin t) / 2 is 1/sqrt(2)
  EXPECT_NEAR(periodic_sup_asymptote(1.0, 0.0), 1.0 / std::sqrt(2.0), 1e-9);
}

TEST(Periodic, IntegralDriftApproachesAsymptote) {
  // b = 1, psi(t) = cos t: Psi(x) - asymptote(x) decays like e^{-x}
  const auto b = RateFunction::constant(1.0);
  const auto prof = integral_drift_profile(b, [](double s) { return 1.0 + std::cos(s); }, 40.0, 0.01);
  const double x = 40.0;
  EXPECT_NEAR(prof.back(), periodic_drift_asymptote(1.0, 0.0, x), 1e-8);
}

TEST(Tails, LightTailDecays) {
  std::vector<double> th{1.0, 2.0, 3.0, 4.0, 5.0, 6.0};
  const auto r = length_tail_estimate(RateFunction::constant(1.0), LifetimeKernel::exponential(2.0), 0.5, 50.0, 20000,
                                      th, 3);
  EXPECT_GT(r.decay_rate, 0.0);
  EXPECT_FALSE(r.heavy_tail);
}

TEST(Tails, ParetoLowerBound) {
  std::vector<double> th{2.0, 4.0, 8.0, 16.0};
  const auto r = length_tail_estimate(RateFunction::constant(0.5), LifetimeKernel::pareto(3.0), 1.0, 1e6, 20000, th, 4);
  for (const auto& p : r.points) EXPECT_GE(p.ci_high, p.bound_value) << "t = " << p.threshold;
}

TEST(Tails, BelowRootLifetime) {
  const auto r = length_tail_estimate(RateFunction::constant(1.0), LifetimeKernel::exponential(2.0), 2.0, 10.0, 500,
                                      {0.5, 1.5}, 5);
  for (const auto& p : r.points) EXPECT_EQ(p.estimate, 1.0);
}

TEST(Tails, RefusesSupercritical) {
  try {
    length_tail_estimate(RateFunction::constant(2.0), LifetimeKernel::exponential(1.0), 1.0, 10.0, 100, {2.0}, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::regime);
  }
}
