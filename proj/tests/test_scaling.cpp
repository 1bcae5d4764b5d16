#include <cmath>

#include <boost/math/distributions/normal.hpp>
#include <gtest/gtest.h>

#include "istlab/scaling.hpp"

using namespace istlab;

namespace {

std::vector<double> scan() {
  std::vector<double> s;
  for (int i = 0; i < 32; ++i) s.push_back(10.0 * std::pow(1000.0, i / 31.0));
  return s;
}

}  // namespace

TEST(NearCritical, Examples) {
  const auto a = check_near_critical(RateFunction::asymptotically_critical(1.0), LifetimeKernel::dirac(1.0), scan());
  EXPECT_TRUE(a.passes());
  EXPECT_NEAR(a.c_estimate, 1.0, 0.01);
  const auto z = check_near_critical(RateFunction::constant(1.0), LifetimeKernel::dirac(1.0), scan());
  EXPECT_TRUE(z.passes());
  EXPECT_NEAR(z.c_estimate, 0.0, 1e-12);
  const auto bad = check_near_critical(RateFunction::constant(2.0), LifetimeKernel::dirac(1.0), scan());
  EXPECT_FALSE(bad.passes());
  EXPECT_FALSE(bad.violations.empty());
}

TEST(Rescaled, UnitScaleIsBaseSimulator) {
  const auto b = RateFunction::asymptotically_critical(1.0);
  const auto K = LifetimeKernel::dirac(1.0);
  for (std::uint64_t s = 0; s < 20; ++s) {
    Rng r1(s), r2(s);
    const auto p = simulate_rescaled_path(1.0, b, K, 1.5, 10.0, r1);
    PdmpOptions po;
    po.horizon = 10.0;
    const auto q = simulate_pdmp(b, K, 1.5, r2, po);
    ASSERT_EQ(p.jumps.size(), q.jumps.size());
    for (std::size_t k = 0; k < p.jumps.size(); ++k) {
      EXPECT_EQ(p.jumps[k].s, q.jumps[k].s);
      EXPECT_EQ(p.jumps[k].to, q.jumps[k].to);
    }
    EXPECT_EQ(p.absorption, q.absorption);
  }
}

TEST(Rescaled, DiracJumpSize) {
  Rng rng(3);
  const auto p = simulate_rescaled_path(64.0, RateFunction::asymptotically_critical(1.0), LifetimeKernel::dirac(1.0),
                                        1.0, 1.0, rng);
  ASSERT_FALSE(p.jumps.empty());
  for (const auto& j : p.jumps) EXPECT_NEAR(j.to - j.from, 0.125, 1e-12);
}

TEST(Rescaled, NoBirthDescent) {
  Rng rng(3);
  const auto p = simulate_rescaled_path(16.0, RateFunction::constant(0.0), LifetimeKernel::dirac(1.0), 2.0, 5.0, rng);
  ASSERT_TRUE(p.absorption.has_value());
  EXPECT_DOUBLE_EQ(*p.absorption, 0.5);  // slope sqrt(16) from level 2
  EXPECT_DOUBLE_EQ(p.value_at(0.25), 1.0);
}

TEST(Rescaled, StreamedMarginalsMatchPaths) {
  const auto b = RateFunction::asymptotically_critical(1.0);
  const auto K = LifetimeKernel::dirac(1.0);
  const auto run = simulate_rescaled(16.0, b, K, 1.0, 2.0, {0.5, 1.0, 2.0}, 50, 77);
  for (std::size_t i = 0; i < 50; ++i) {
    Rng rng = replica_rng(77, i);
    const auto p = simulate_rescaled_path(16.0, b, K, 1.0, 2.0, rng);
    for (std::size_t k = 0; k < 3; ++k)
      EXPECT_NEAR(run.samples[k][i], p.value_at(run.times[k]), 1e-12 * std::max(1.0, run.samples[k][i]));
  }
}

TEST(Bessel, SecondMoment) {
  for (double c : {0.5, 1.0, 2.0}) {
    const double delta = 2 * c + 1, x0 = 1.2, t = 0.7;
    const auto x = bessel_marginal(c, x0, t, 40000, 12);
    std::vector<double> sq;
    for (double v : x) sq.push_back(v * v);
    const auto ms = stats::mean_se(sq);
    EXPECT_LT(std::abs(ms.mean - (x0 * x0 + delta * t)), 4.0 * ms.se) << "c = " << c;
  }
}

TEST(Bessel, BrownianCaseIsAbsorbedBM) {
  // c = 0: |B| from x0 killed at 0; density phi_t(y - x0) - phi_t(y + x0)
  const double x0 = 1.0, t = 0.5, sd = std::sqrt(t);
  const auto x = bessel_marginal(0.0, x0, t, 40000, 13);
  std::vector<double> alive;
  for (double v : x)
    if (v > 0.0) alive.push_back(v);
  const double surv = std::erf(x0 / std::sqrt(2.0 * t));
  EXPECT_NEAR(alive.size() / 40000.0, surv, 4.0 * std::sqrt(surv * (1 - surv) / 40000.0));
  boost::math::normal n;
  auto F = [&](double y) {
    const double a = boost::math::cdf(n, (y - x0) / sd) - boost::math::cdf(n, -x0 / sd);
    const double b = boost::math::cdf(n, (y + x0) / sd) - boost::math::cdf(n, x0 / sd);
    return (a - b) / surv;
  };
  EXPECT_GT(stats::ks_pvalue(stats::ks_one_sample(alive, F), alive.size()), 0.01);
}

TEST(Bessel, EulerAgreesWithExact) {
  for (double c : {1.0, -0.25}) {
    const auto ex = bessel_marginal(c, 1.0, 0.5, 20000, 21);
    const auto eu = bessel_marginal(c, 1.0, 0.5, 2000, 22, BesselMethod::Euler);
    std::size_t a = 0, b = 0;
    std::vector<double> ea, ua;
    for (double v : ex) v > 0 ? ea.push_back(v) : void(++a);
    for (double v : eu) v > 0 ? ua.push_back(v) : void(++b);
    EXPECT_NEAR(a / 20000.0, b / 2000.0, 0.03) << "c = " << c;
    EXPECT_GT(stats::ks_two_sample_pvalue(stats::ks_two_sample(ea, ua), ea.size(), ua.size()), 0.01) << "c = " << c;
  }
}

TEST(Bessel, SmallTime) {
  const auto x = bessel_marginal(1.0, 2.0, 1e-8, 1000, 2);
  for (double v : x) EXPECT_NEAR(v, 2.0, 1e-3);
}

TEST(Bessel, SurvivalFunction) {
  EXPECT_NEAR(bessel_survival(0.0, 1.0, 0.5), std::erf(1.0), 1e-14);
  EXPECT_EQ(bessel_survival(1.0, 1.0, 0.5), 1.0);
}

TEST(Scaling, LatticeAtom) {
  // Dirac kernels put X^n(t) on a lattice: the largest atom is visible
  const auto rep = compare_scaling_limit({16.0}, RateFunction::asymptotically_critical(1.0), LifetimeKernel::dirac(1.0),
                                         1.0, 1.0, 0.5, 4000, 5);
  EXPECT_GT(rep.entries[0].max_atom, 0.05);
  EXPECT_GT(rep.entries[0].ks, 0.0);
}
