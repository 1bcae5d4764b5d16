#include <cmath>

#include <gtest/gtest.h>

#include "istlab/error.hpp"
#include "istlab/kernel.hpp"
#include "istlab/random.hpp"
#include "istlab/rate.hpp"
#include "istlab/stats.hpp"

using namespace istlab;

TEST(Rate, CumulativeConstant) { EXPECT_DOUBLE_EQ(RateFunction::constant(1.0).cumulative(0.0, 2.0), 2.0); }

TEST(Rate, CumulativeAsymptoticallyCritical) {
  EXPECT_NEAR(RateFunction::asymptotically_critical(1.0).cumulative(0.0, 1.0), 1.0 + std::log(2.0), 1e-14);
}

TEST(Rate, CumulativePiecewise) {
  EXPECT_NEAR(RateFunction::piecewise_constant({0.0, 1.0}, {1.0, 3.0}).cumulative(0.5, 1.5), 2.0, 1e-14);
}

TEST(Rate, CumulativeOrderingError) {
  try {
    RateFunction::constant(1.0).cumulative(2.0, 1.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::ordering);
  }
}

TEST(Rate, SinusoidalAgainstQuadrature) {
  const auto b = RateFunction::sinusoidal(1.0, 0.5, 2.0, 0.3);
  // midpoint rule, independent of the closed-form antiderivative
  const int n = 200000;
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += b((i + 0.5) * 3.0 / n);
  EXPECT_NEAR(b.cumulative(0.0, 3.0), s * 3.0 / n, 1e-9);
}

TEST(Rate, TabulatedTrapezoid) {
  const auto b = RateFunction::tabulated({0.0, 1.0, 2.0}, {0.0, 2.0, 2.0});
  EXPECT_NEAR(b.cumulative(0.0, 2.0), 3.0, 1e-14);
  EXPECT_NEAR(b(0.5), 1.0, 1e-14);
}

TEST(Rate, InvertBackwardRoundTrip) {
  for (const auto& b : {RateFunction::constant(1.5), RateFunction::asymptotically_critical(1.0),
                        RateFunction::sinusoidal(1.0, 0.5), RateFunction::piecewise_constant({0.0, 1.0}, {1.0, 3.0})}) {
    const double x = 3.0, e = 0.7;
    const auto y = b.invert_backward(x, e);
    ASSERT_TRUE(y.has_value());
    EXPECT_NEAR(b.cumulative(*y, x), e, 1e-9);
  }
  // total mass below x is 3 < 5: absorption
  EXPECT_FALSE(RateFunction::constant(1.0).invert_backward(3.0, 5.0).has_value());
}

TEST(Rate, SupOnBoundsValues) {
  const auto b = RateFunction::sinusoidal(1.0, 0.5);
  const double s = b.sup_on(0.0, 4.0);
  for (int i = 0; i <= 400; ++i) EXPECT_LE(b(i * 0.01), s + 1e-12);
}

TEST(Rate, RejectsNegative) { EXPECT_THROW(RateFunction::constant(-1.0), Error); }

TEST(Kernel, Moments) {
  EXPECT_NEAR(LifetimeKernel::pareto(3.0).moment(0.0, 1), 1.5, 1e-12);
  EXPECT_DOUBLE_EQ(LifetimeKernel::dirac(1.0).moment(7.0, 1), 1.0);
  EXPECT_DOUBLE_EQ(LifetimeKernel::dirac(1.0).moment(7.0, 3), 1.0);
  EXPECT_NEAR(LifetimeKernel::exponential(2.0).moment(0.0, 1), 0.5, 1e-10);
  EXPECT_TRUE(std::isinf(LifetimeKernel::pareto(3.0).moment(0.0, 3)));
}

TEST(Kernel, Expectations) {
  EXPECT_DOUBLE_EQ(LifetimeKernel::dirac(2.0).expect(0.0, [](double y) { return y * y; }), 4.0);
  EXPECT_NEAR(LifetimeKernel::exponential(1.0).expect(0.0, [](double y) { return std::exp(-y); }), 0.5, 1e-10);
  EXPECT_NEAR(LifetimeKernel::pareto(3.0).expect(0.0, [](double y) { return y * y; }), 3.0, 1e-8);
}

TEST(Kernel, TwoPointDeath) {
  const auto K = LifetimeKernel::two_point_death();
  Rng rng(3);
  EXPECT_NEAR(K.sample(0.25, rng), 0.75, 1e-15);
  EXPECT_NEAR(K.sample(2.0, rng), 1.0, 1e-15);
  EXPECT_NEAR(K.moment(1.5, 1), 0.5, 1e-15);
}

TEST(Kernel, ParetoSamplesPassKs) {
  const auto K = LifetimeKernel::pareto(3.0);
  Rng rng(11);
  std::vector<double> x(20000);
  for (auto& v : x) v = K.sample(0.0, rng);
  const double d = stats::ks_one_sample(x, [](double y) { return y < 1.0 ? 0.0 : 1.0 - std::pow(y, -3.0); });
  EXPECT_GT(stats::ks_pvalue(d, x.size()), 0.01);
}

TEST(Kernel, TimeVaryingExponential) {
  // d(t) = 1 + t: survival exp(-(u + t u + u^2 / 2))
  const auto K = LifetimeKernel::exponential(RateFunction::tabulated({0.0, 100.0}, {1.0, 101.0}));
  Rng rng(5);
  std::vector<double> x(20000);
  for (auto& v : x) v = K.sample(1.0, rng);
  const double d =
      stats::ks_one_sample(x, [](double u) { return 1.0 - std::exp(-(u + u + 0.5 * u * u)); });
  EXPECT_GT(stats::ks_pvalue(d, x.size()), 0.01);
}

TEST(Kernel, ExponentialNeedsPositiveTail) {
  EXPECT_THROW(LifetimeKernel::exponential(RateFunction::piecewise_constant({0.0, 1.0}, {1.0, 0.0})), Error);
}

TEST(Random, ReplicateIndependentOfThreads) {
  auto draw = [](std::size_t, Rng& rng) { return uniform_open(rng); };
  set_thread_count(1);
  const auto a = replicate<double>(1000, 42, draw);
  set_thread_count(4);
  const auto b = replicate<double>(1000, 42, draw);
  set_thread_count(0);
  EXPECT_EQ(a, b);
}

TEST(Stats, WilsonCoversHalf) {
  const auto w = stats::wilson(50, 100);
  EXPECT_LT(w.low, 0.5);
  EXPECT_GT(w.high, 0.5);
}
