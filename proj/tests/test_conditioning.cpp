#include <cmath>

#include <gtest/gtest.h>

#include "istlab/conditioning.hpp"
#include "istlab/stats.hpp"

using namespace istlab;

namespace {

const ScaleTable& supercritical_table() {
  static const ScaleTable t =
      limit_scale_table(RateFunction::constant(2.0), LifetimeKernel::exponential(1.0), 8.0, 0.01, 1e-10);
  return t;
}

}  // namespace

TEST(Conditioning, ExtinctBaseIsUnchanged) {
  const auto b = RateFunction::constant(1.0);
  const auto K = LifetimeKernel::exponential(2.0);
  const auto tab = limit_scale_table(b, K, 4.0, 0.01, 1e-9);
  const auto p = condition_params(b, K, tab, ConditionEvent::Ext);
  EXPECT_TRUE(p.identity);
  EXPECT_DOUBLE_EQ(p.rate(1.3), 1.0);
  Rng r1(4), r2(4);
  EXPECT_EQ(p.kernel.sample(1.0, r1), K.sample(1.0, r2));
}

TEST(Conditioning, ExtDuality) {
  const auto b = RateFunction::constant(2.0);
  const auto K = LifetimeKernel::exponential(1.0);
  const auto p = condition_params(b, K, supercritical_table(), ConditionEvent::Ext);
  for (double x : {0.5, 1.0, 3.0, 7.5}) EXPECT_NEAR(p.rate(x), 1.0, 1e-4) << "x = " << x;
  EXPECT_LT(p.normalization_error, 1e-8);
  Rng rng(6);
  std::vector<double> y(20000);
  for (auto& v : y) v = p.kernel.sample(2.0, rng);
  const double d = stats::ks_one_sample(y, [](double u) { return 1.0 - std::exp(-2.0 * u); });
  EXPECT_GT(stats::ks_pvalue(d, y.size()), 0.01);
}

TEST(Conditioning, ExtComplementRate) {
  const auto b = RateFunction::constant(2.0);
  const auto K = LifetimeKernel::exponential(1.0);
  const auto p = condition_params(b, K, supercritical_table(), ConditionEvent::ExtC);
  for (double x : {0.5, 1.0, 3.0}) {
    const double exact = 2.0 * (1.0 - 0.5 * std::exp(-x)) / (1.0 - std::exp(-x));
    EXPECT_NEAR(p.rate(x), exact, 2e-3 * exact) << "x = " << x;
  }
  EXPECT_NEAR(p.rate(7.5), 2.0, 2e-3);
  EXPECT_LT(p.normalization_error, 1e-8);
}

TEST(Conditioning, DiracStaysDirac) {
  const auto b = RateFunction::constant(1.0);
  const auto K = LifetimeKernel::dirac(0.5);
  const auto tab = solve_scale(b, K, 2.0, 200, 1e-12);
  const auto p = condition_params(b, K, tab, ConditionEvent::HeightLE);
  Rng rng(1);
  for (double x : {0.2, 0.9, 1.4}) EXPECT_EQ(p.kernel.sample(x, rng), 0.5);
}

TEST(Conditioning, HeightLEHolds) {
  const auto b = RateFunction::constant(1.0);
  const auto K = LifetimeKernel::exponential(2.0);
  const double T = 2.0;
  const auto tab = solve_scale(b, K, T, 200, 1e-12);
  const auto p = condition_params(b, K, tab, ConditionEvent::HeightLE);
  EXPECT_LT(p.normalization_error, 1e-8);
  const auto rep = simulate_conditioned(p, 0.5, T, std::numeric_limits<double>::infinity(), 10000, 9);
  EXPECT_EQ(rep.violations, 0u);
  EXPECT_DOUBLE_EQ(rep.absorbed_fraction, 1.0);
}

TEST(Conditioning, ExtAbsorbsAlways) {
  const auto p = condition_params(RateFunction::constant(2.0), LifetimeKernel::exponential(1.0), supercritical_table(),
                                  ConditionEvent::Ext);
  const auto rep = simulate_conditioned(p, 1.0, std::numeric_limits<double>::infinity(),
                                        std::numeric_limits<double>::infinity(), 5000, 2);
  EXPECT_DOUBLE_EQ(rep.absorbed_fraction, 1.0);
  // base paths from 1 die with probability e^{-1}
  SummaryOptions so;
  so.barrier = 30.0;
  const auto base = replicate<PathSummary>(20000, 3, [&](std::size_t, Rng& rng) {
    return summarize_pdmp(RateFunction::constant(2.0), LifetimeKernel::exponential(1.0), 1.0, rng, so);
  });
  double died = 0.0;
  for (const auto& s : base) died += s.absorbed;
  died /= base.size();
  EXPECT_NEAR(died, std::exp(-1.0), 4.0 * std::sqrt(0.25 / base.size()));
}

TEST(Conditioning, ExtComplementEscapes) {
  const auto p = condition_params(RateFunction::constant(2.0), LifetimeKernel::exponential(1.0), supercritical_table(),
                                  ConditionEvent::ExtC);
  std::vector<double> below;
  for (double horizon : {0.02, 0.5, 6.0}) {
    const auto r = simulate_conditioned(p, p.x_min, std::numeric_limits<double>::infinity(), horizon, 4000, 8, {});
    EXPECT_EQ(r.violations, 0u) << "horizon " << horizon;
    below.push_back(r.below_eps_fraction);
  }
  EXPECT_GT(below[0], 0.3);
  EXPECT_LT(below[1], below[0]);
  EXPECT_LT(below[2], 0.01);
}

TEST(Conditioning, ExtComplementRateNearZero) {
  // below x_min the rate continues as c / x, so the integral to 0 diverges
  const auto p = condition_params(RateFunction::constant(2.0), LifetimeKernel::exponential(1.0), supercritical_table(),
                                  ConditionEvent::ExtC);
  EXPECT_NEAR(p.rate(0.01) * 0.01, p.rate(p.x_min) * p.x_min, 1e-12);
  EXPECT_TRUE(std::isinf(p.rate.cumulative(0.0, 0.1)));
  EXPECT_FALSE(p.rate.invert_backward(0.1, 50.0).has_value() && *p.rate.invert_backward(0.1, 50.0) <= 0.0);
}

TEST(Conditioning, HarmonicExtrapolation) {
  const Harmonic h(supercritical_table(), ConditionEvent::Ext);
  EXPECT_NEAR(h(10.0), std::exp(-10.0), 1e-6);
  EXPECT_NEAR(h.tail_rate(), 1.0, 1e-3);
}
