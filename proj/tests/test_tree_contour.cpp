#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "istlab/contour.hpp"
#include "istlab/kernel.hpp"
#include "istlab/rate.hpp"
#include "istlab/stats.hpp"
#include "istlab/tree.hpp"

using namespace istlab;

namespace {

ChronoTree two_nodes() {
  // root (0, 2], one child born at 1 dying at 1.7
  return ChronoTree({{-1, 0, 0.0, 2.0}, {0, 1, 1.0, 1.7}}, 10.0, 2.0, 0);
}

ContourPath one_jump() {
  ContourPath p;
  p.x0 = 2.0;
  p.jumps = {{1.0, 1.0, 5.0}};
  p.absorption = 6.0;
  p.horizon = 6.0;
  return p;
}

}  // namespace

TEST(Tree, NoBirths) {
  const auto t = simulate_tree(RateFunction::constant(0.0), LifetimeKernel::dirac(1.0), 3.0, 10.0, 1u);
  ASSERT_EQ(t.size(), 1u);
  EXPECT_EQ(t.label_string(0), kRootLabel);
  EXPECT_EQ(t.nodes()[0].birth, 0.0);
  EXPECT_EQ(t.nodes()[0].death, 3.0);
}

TEST(Tree, RootChildrenArePoisson) {
  // children of a root alive on (0, 2] with unit birth rate: Poisson(2)
  const std::size_t N = 10000, kmax = 12;
  std::vector<double> counts(kmax + 1, 0.0), probs(kmax + 1, 0.0);
  for (std::size_t i = 0; i < N; ++i) {
    const auto t = simulate_tree(RateFunction::constant(1.0), LifetimeKernel::dirac(1.0), 2.0, 5.0, replica_seed(9, i));
    counts[std::min<std::size_t>(t.children()[0].size(), kmax)] += 1.0;
  }
  double acc = 0.0, pk = std::exp(-2.0);
  for (std::size_t k = 0; k < kmax; ++k) {
    probs[k] = pk;
    acc += pk;
    pk *= 2.0 / static_cast<double>(k + 1);
  }
  probs[kmax] = 1.0 - acc;
  EXPECT_GT(stats::chi_square_gof(counts, probs).p_value, 0.01);
}

TEST(Tree, DeathsCappedAtT) {
  const auto t = simulate_tree(RateFunction::constant(1.0), LifetimeKernel::dirac(1.0), 5.0, 5.0, 4u);
  for (const auto& v : t.nodes()) {
    EXPECT_LE(v.death, 5.0);
    if (v.birth > 4.0) {
      EXPECT_EQ(v.death, 5.0);
    }
  }
  EXPECT_EQ(check_tree_invariants(t), "");
}

TEST(Tree, PopulationConventions) {
  const ChronoTree t({{-1, 0, 0.0, 3.0}}, 10.0, 3.0, 0);
  EXPECT_EQ(population_at(t, 2.0), 1u);
  EXPECT_EQ(population_at(t, 3.0), 1u);
  EXPECT_EQ(population_at(t, std::nextafter(3.0, 4.0)), 0u);
  EXPECT_EQ(population_at(t, 0.0), 0u);
  EXPECT_THROW(population_at(t, 11.0), Error);
}

TEST(Tree, LengthAndHeight) {
  const ChronoTree single({{-1, 0, 0.0, 3.0}}, 10.0, 3.0, 0);
  EXPECT_DOUBLE_EQ(tree_length(single), 3.0);
  EXPECT_DOUBLE_EQ(tree_height(single), 3.0);
  const ChronoTree two({{-1, 0, 0.0, 2.0}, {0, 1, 1.0, 2.5}}, 10.0, 2.0, 0);
  EXPECT_DOUBLE_EQ(tree_length(two), 3.5);
  EXPECT_DOUBLE_EQ(tree_height(two), 2.5);
}

TEST(Tree, CsvRoundTrip) {
  const auto t = simulate_tree(RateFunction::constant(1.0), LifetimeKernel::exponential(1.5), 1.0, 4.0, 17u);
  std::stringstream ss;
  write_tree_csv(ss, t);
  const auto back = read_tree_csv(ss, 4.0);
  ASSERT_EQ(back.size(), t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    EXPECT_EQ(back.label_string(i), t.label_string(i));
    EXPECT_EQ(back.nodes()[i].birth, t.nodes()[i].birth);
    EXPECT_EQ(back.nodes()[i].death, t.nodes()[i].death);
  }
}

TEST(Tree, SubcriticalMeanLengthStableInT) {
  // b = 1, Exp(2): b m = 1/2, the mean length is finite and does not depend on T
  auto mean_len = [](double T) {
    const auto L = replicate<double>(20000, 77, [&](std::size_t i, Rng& rng) {
      return tree_length(simulate_tree(RateFunction::constant(1.0), LifetimeKernel::exponential(2.0), 1.0, T, rng, i));
    });
    return stats::mean_se(L);
  };
  const auto a = mean_len(20.0), b = mean_len(40.0);
  EXPECT_LT(std::abs(a.mean - b.mean), 2.0 * std::hypot(a.se, b.se) + 1e-12);
}

TEST(Contour, SingleNode) {
  const ChronoTree t({{-1, 0, 0.0, 3.0}}, 10.0, 3.0, 0);
  const auto p = contour_of_tree(t);
  EXPECT_TRUE(p.jumps.empty());
  ASSERT_TRUE(p.absorption.has_value());
  EXPECT_DOUBLE_EQ(*p.absorption, 3.0);
  EXPECT_DOUBLE_EQ(p.value_at(1.0), 2.0);
}

TEST(Contour, TwoNodeHandTrace) {
  const auto p = contour_of_tree(two_nodes());
  ASSERT_EQ(p.jumps.size(), 1u);
  EXPECT_DOUBLE_EQ(p.jumps[0].s, 1.0);
  EXPECT_DOUBLE_EQ(p.jumps[0].from, 1.0);
  EXPECT_DOUBLE_EQ(p.jumps[0].to, 1.7);
  EXPECT_NEAR(*p.absorption, 2.7, 1e-15);
  EXPECT_EQ(upcrossing_count(p, 1.5), 2u);
  EXPECT_EQ(population_at(two_nodes(), 1.5), 2u);
  EXPECT_EQ(upcrossing_count(p, 3.0), 0u);
}

TEST(Contour, OneJumpPerBirthAndDurationIsLength) {
  for (std::uint64_t s = 0; s < 50; ++s) {
    const auto t = simulate_tree(RateFunction::constant(1.0), LifetimeKernel::dirac(1.0), 2.0, 5.0, s);
    const auto p = contour_of_tree(t);
    EXPECT_EQ(p.jumps.size() + 1, t.size());
    EXPECT_NEAR(p.duration(), tree_length(t), 1e-9 * tree_length(t));
  }
}

TEST(Contour, PdmpNoBirths) {
  const auto p = simulate_pdmp(RateFunction::constant(0.0), LifetimeKernel::dirac(1.0), 4.0, 1u);
  EXPECT_TRUE(p.jumps.empty());
  EXPECT_DOUBLE_EQ(*p.absorption, 4.0);
}

TEST(Contour, FirstJumpIsExponentialTruncated) {
  // constant rate 1.5 from x0 = 50: waiting time to the first jump is Exp(1.5)
  const auto b = RateFunction::constant(1.5);
  PdmpOptions po;
  const auto w = replicate<double>(100000, 8, [&](std::size_t, Rng& rng) {
    double first = -1.0;
    run_pdmp(b, LifetimeKernel::dirac(1.0), 50.0, rng, po, [&](const Jump& j) {
      first = j.s;
      return false;
    });
    return first;
  });
  const double d = stats::ks_one_sample(w, [](double u) { return 1.0 - std::exp(-1.5 * u); });
  EXPECT_GT(stats::ks_pvalue(d, w.size()), 0.01);
}

TEST(Contour, DiracJumpsHaveUnitSize) {
  PdmpOptions po;
  po.cap = 6.0;
  const auto p = simulate_pdmp(RateFunction::constant(1.0), LifetimeKernel::dirac(1.0), 3.0, 21u, po);
  for (const auto& j : p.jumps) {
    if (j.to < 6.0)
      EXPECT_NEAR(j.to - j.from, 1.0, 1e-12);
    else
      EXPECT_EQ(j.to, 6.0);
  }
}

TEST(Contour, ValueAndExit) {
  ContourPath flat;
  flat.x0 = 4.0;
  flat.absorption = 4.0;
  flat.horizon = 4.0;
  EXPECT_DOUBLE_EQ(flat.value_at(1.5), 2.5);
  EXPECT_EQ(flat.first_exit(1.0, 10.0).side, Exit::Low);
  const auto e = one_jump().first_exit(0.5, 4.5);
  EXPECT_EQ(e.side, Exit::High);
  EXPECT_DOUBLE_EQ(e.s, 1.0);
}

TEST(Contour, NegativeVariation) {
  ContourPath flat;
  flat.x0 = 4.0;
  flat.absorption = 4.0;
  flat.horizon = 4.0;
  EXPECT_DOUBLE_EQ(flat.negative_variation(0.0, 1.0), 1.0);
  ContourPath early;
  early.x0 = 0.5;
  early.absorption = 0.5;
  early.horizon = 1.0;
  EXPECT_DOUBLE_EQ(early.negative_variation(0.0, 1.0), 0.5);
}

TEST(Contour, PathCsvRoundTrip) {
  PdmpOptions po;
  po.horizon = 3.0;
  const auto p = simulate_pdmp(RateFunction::constant(1.0), LifetimeKernel::exponential(1.0), 2.0, 5u, po);
  std::stringstream ss;
  write_path_csv(ss, p);
  const auto q = read_path_csv(ss);
  ASSERT_EQ(q.jumps.size(), p.jumps.size());
  EXPECT_EQ(q.absorption.has_value(), p.absorption.has_value());
  EXPECT_DOUBLE_EQ(q.horizon, p.horizon);
  for (std::size_t i = 0; i < p.jumps.size(); ++i) EXPECT_EQ(q.jumps[i].to, p.jumps[i].to);
}

TEST(Generator, ConstantsAreHarmonic) {
  const auto b = RateFunction::constant(1.0);
  const auto K = LifetimeKernel::exponential(2.0);
  const auto g = generator_residual(b, K, 3.0, [](double) { return 1.0; }, 1.0, 0.05, 1000, 3);
  EXPECT_NEAR(g.generator, 0.0, 1e-12);
  EXPECT_NEAR(g.estimate, 0.0, 1e-12);
}

TEST(Generator, IdentityGivesDrift) {
  // no cap: L x = -1 + b m
  const auto b = RateFunction::constant(1.5);
  const auto K = LifetimeKernel::exponential(2.0);
  const double inf = std::numeric_limits<double>::infinity();
  EXPECT_NEAR(generator_value(b, K, inf, [](double x) { return x; }, 1.0), -1.0 + 0.75, 1e-8);
}

TEST(Generator, ExponentialTestFunction) {
  // L e^{theta x} = e^{theta x}(-theta + b (d / (d - theta) - 1))
  const auto b = RateFunction::constant(1.0);
  const auto K = LifetimeKernel::exponential(2.0);
  const double th = 0.5, x = 1.0, inf = std::numeric_limits<double>::infinity();
  const double exact = std::exp(th * x) * (-th + (2.0 / (2.0 - th) - 1.0));
  EXPECT_NEAR(generator_value(b, K, inf, [&](double y) { return std::exp(th * y); }, x), exact, 1e-7);
}
