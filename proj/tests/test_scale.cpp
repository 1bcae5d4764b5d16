#include <cmath>

#include <gtest/gtest.h>

#include "istlab/contour.hpp"
#include "istlab/kernel.hpp"
#include "istlab/rate.hpp"
#include "istlab/scale.hpp"

using namespace istlab;

namespace {

double closed(double b, double d, double T, double t) {
  return (d - b * std::exp((b - d) * (T - t))) / (d - b * std::exp((b - d) * T));
}

}  // namespace

TEST(Scale, StartsAtOne) {
  for (const auto& K : {LifetimeKernel::exponential(2.0), LifetimeKernel::dirac(0.3), LifetimeKernel::pareto(3.0)}) {
    const auto tab = solve_scale(RateFunction::constant(1.0), K, 2.0, 256, 1e-10);
    EXPECT_EQ(tab.values[0], 1.0);
  }
}

TEST(Scale, MarkovConstantClosedForm) {
  const auto tab = solve_scale(RateFunction::constant(1.0), LifetimeKernel::exponential(2.0), 1.0, 512, 1e-11);
  for (std::size_t j = 0; j <= tab.M; ++j) EXPECT_NEAR(tab.values[j], closed(1, 2, 1, tab.grid(j)), 5e-6);
  EXPECT_NEAR(tab.left_limit(), 1.0 / (2.0 - std::exp(-1.0)), 5e-6);
  EXPECT_NEAR(1.0 / (2.0 - std::exp(-1.0)), 0.612700, 1e-6);
  EXPECT_EQ(tab.at(1.0), 0.0);
}

TEST(Scale, DiracJumpsOverT) {
  // every jump from t >= 0 lands at t + 1 >= T = 1: S is the no-birth probability
  const auto tab = solve_scale(RateFunction::constant(1.0), LifetimeKernel::dirac(1.0), 1.0, 512, 1e-12);
  EXPECT_NEAR(tab.at(0.5), std::exp(-0.5), 1e-9);
}

TEST(Scale, NoPathReachesT) {
  // births only on [0, 2.2), lifetimes a = 0.75: the contour never reaches T = 3
  const double T = 3.0, a = 0.75;
  const auto b = RateFunction::piecewise_constant({0.0, 2.2}, {1.3, 0.0});
  const auto tab = solve_scale(b, LifetimeKernel::dirac(a), T, 480, 1e-12);
  for (double v : tab.values) EXPECT_NEAR(v, 1.0, 10.0 * tab.tol);
}

TEST(Scale, NoPathReachesTAtomOnGrid) {
  // births stop exactly at T - a: the atom from the last birth node lands on T,
  // which the node-based quadrature sees for one cell; the error is O(h)
  const double T = 3.0, a = 0.75;
  const auto b = RateFunction::piecewise_constant({0.0, T - a}, {1.3, 0.0});
  double prev = 0.0;
  for (std::size_t M : {240, 480, 960}) {
    const auto tab = solve_scale(b, LifetimeKernel::dirac(a), T, M, 1e-12);
    double err = 0.0;
    for (double v : tab.values) err = std::max(err, std::abs(v - 1.0));
    EXPECT_LT(err, 12.0 * tab.h);
    if (prev > 0.0) {
      EXPECT_NEAR(prev / err, 2.0, 0.1);
    }
    prev = err;
  }
}

TEST(Scale, MonotoneAndResidual) {
  const auto tab = solve_scale(RateFunction::sinusoidal(1.0, 0.5), LifetimeKernel::pareto(3.0), 3.0, 600, 1e-10);
  for (std::size_t j = 1; j <= tab.M; ++j) EXPECT_LE(tab.values[j], tab.values[j - 1] + 1e-12);
  EXPECT_LT(tab.residual, 1e-9);
  EXPECT_LT(scale_ode_residual(tab, RateFunction::sinusoidal(1.0, 0.5), LifetimeKernel::pareto(3.0)), 1e-2);
}

TEST(Scale, TwoPointDeathAgainstMonteCarlo) {
  const auto b = RateFunction::constant(0.8);
  const auto K = LifetimeKernel::two_point_death();
  const double T = 2.5;
  const auto tab = solve_scale(b, K, T, 1000, 1e-12);
  PdmpOptions po;
  po.cap = T;
  for (double t : {0.3, 1.2, 2.2}) {
    const std::size_t N = 40000;
    const auto low = replicate<char>(N, replica_seed(31, static_cast<std::uint64_t>(t * 10)), [&](std::size_t, Rng& rng) {
      char reached = 0;
      run_pdmp(b, K, t, rng, po, [&](const Jump& j) {
        if (j.to >= T) reached = 1;
        return !reached;
      });
      return static_cast<char>(!reached);
    });
    double f = 0.0;
    for (char c : low) f += c;
    f /= N;
    const double p = tab.at(t);
    EXPECT_LT(std::abs(f - p), 4.0 * std::sqrt(p * (1 - p) / N) + 1e-3) << "t = " << t;
  }
}

TEST(Scale, MarkovClosedFormEndpoints) {
  const auto b = RateFunction::sinusoidal(1.0, 0.5), d = RateFunction::constant(2.0);
  EXPECT_DOUBLE_EQ(scale_markov_closed_form(b, d, 2.0, 0.0), 1.0);
  EXPECT_GT(scale_markov_closed_form(b, d, 2.0, 2.0), 0.0);
  EXPECT_NEAR(scale_markov_closed_form(RateFunction::constant(1.0), d, 1.0, 0.4), closed(1, 2, 1, 0.4), 1e-14);
}

TEST(Scale, WConstant) {
  EXPECT_NEAR(scale_W_constant(1.0, 2.0, std::log(2.0)), 1.5, 1e-14);
  EXPECT_NEAR(scale_W_constant(1.0, 1.0, 3.0), 4.0, 1e-14);
}

TEST(Scale, HittingProbabilityEdges) {
  const auto tab = solve_scale(RateFunction::constant(1.0), LifetimeKernel::exponential(2.0), 1.0, 256, 1e-11);
  EXPECT_DOUBLE_EQ(hitting_probability(tab, 0.3, 0.3), 0.0);
  EXPECT_DOUBLE_EQ(hitting_probability(tab, 0.3, 1.0), 1.0);
  EXPECT_THROW(hitting_probability(tab, 0.5, 0.2), Error);
}

TEST(Extinction, Subcritical) {
  const auto r = extinction_probability(RateFunction::constant(1.0), LifetimeKernel::exponential(2.0), 1.5, 1e-6);
  EXPECT_NEAR(r.value, 1.0, 1e-4);
}

TEST(Extinction, SupercriticalMarkov) {
  for (double t0 : {0.5, 2.0}) {
    const auto r = extinction_probability(RateFunction::constant(2.0), LifetimeKernel::exponential(1.0), t0, 1e-6);
    EXPECT_NEAR(r.value, std::exp(-t0), 1e-4);
  }
  EXPECT_EQ(extinction_probability(RateFunction::constant(2.0), LifetimeKernel::exponential(1.0), 0.0, 1e-6).value,
            1.0);
}

TEST(Population, RootAlive) {
  const auto law = population_law(RateFunction::constant(2.0), LifetimeKernel::exponential(1.0), 3.0, 2.0, 1e-10, 256);
  EXPECT_TRUE(law.root_alive);
  EXPECT_EQ(law.p0, 0.0);
}

TEST(Population, MarkovClosedForm) {
  // b = 2, d = 1: p0 = S_t(t0), q = S_t(t-) = 1 / (2 e^t - 1)
  const double t0 = 0.5, t = 3.0;
  const auto law = population_law(RateFunction::constant(2.0), LifetimeKernel::exponential(1.0), t0, t, 1e-11);
  EXPECT_NEAR(law.p0, closed(2, 1, t, t0), 1e-6);
  EXPECT_NEAR(law.q, 1.0 / (2.0 * std::exp(t) - 1.0), 1e-6);
  double total = 0.0;
  for (std::size_t k = 0; k < 5000; ++k) total += law.pmf(k);
  EXPECT_NEAR(total, 1.0, 1e-9);
}

TEST(Population, QuasiLimitTracksClosedForm) {
  for (double t : {5.0, 10.0}) {
    const auto law = population_law(RateFunction::constant(2.0), LifetimeKernel::exponential(1.0), 0.5, t, 1e-12);
    EXPECT_NEAR(law.q / (1.0 / (2.0 * std::exp(t) - 1.0)), 1.0, 1e-3) << "t = " << t;
  }
}
