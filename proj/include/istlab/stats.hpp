#ifndef ISTLAB_STATS_HPP
#define ISTLAB_STATS_HPP

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>

#include "istlab/error.hpp"

namespace istlab::stats {

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};

inline MeanSe mean_se(std::span<const double> x) {
  const double n = static_cast<double>(x.size());
  if (x.empty()) return {};
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : x) ss += (v - mean) * (v - mean);
  const double var = x.size() > 1 ? ss / (n - 1.0) : 0.0;
  return {mean, std::sqrt(var / n)};
}

/// Kolmogorov limiting survival function Q(lambda) = P(K > lambda).
inline double kolmogorov_q(double lambda) {
  if (lambda < 0.2) return 1.0;
  double sum = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += (k % 2 == 1 ? 1.0 : -1.0) * term;
    if (term < 1e-16) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

/// Two-sample KS statistic sup|F_a - F_b|; ties are handled by stepping
/// both empirical CDFs past equal values together.
inline double ks_two_sample(std::vector<double> a, std::vector<double> b) {
  require(!a.empty() && !b.empty(), Errc::domain, "ks_two_sample needs non-empty samples");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

/// One-sample KS statistic against a continuous CDF.
template <class Cdf>
double ks_one_sample(std::vector<double> a, Cdf&& cdf) {
  require(!a.empty(), Errc::domain, "ks_one_sample needs a non-empty sample");
  std::sort(a.begin(), a.end());
  const double n = static_cast<double>(a.size());
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double f = cdf(a[i]);
    d = std::max({d, f - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - f});
  }
  return d;
}

/// Asymptotic p-value with Stephens' small-sample correction.
inline double ks_pvalue(double d, double n_eff) {
  const double s = std::sqrt(n_eff);
  return kolmogorov_q((s + 0.12 + 0.11 / s) * d);
}

inline double ks_two_sample_pvalue(double d, std::size_t n, std::size_t m) {
  return ks_pvalue(d, static_cast<double>(n) * static_cast<double>(m) / static_cast<double>(n + m));
}

/// Asymptotic critical value c(alpha) sqrt((n+m)/(nm)).
inline double ks_critical_value(std::size_t n, std::size_t m, double alpha) {
  const double c = std::sqrt(-0.5 * std::log(alpha / 2.0));
  return c * std::sqrt(static_cast<double>(n + m) / (static_cast<double>(n) * static_cast<double>(m)));
}

struct ChiSquareResult {
  double statistic = 0.0;
  int dof = 0;
  double p_value = 1.0;
  int bins = 0;
};

/// Pearson goodness of fit. `probs` are the model cell probabilities for the
/// cells counted in `observed`; adjacent cells are merged left to right until
/// each expected count reaches min_expected.
inline ChiSquareResult chi_square_gof(std::span<const double> observed, std::span<const double> probs,
                                      double min_expected = 5.0, int fitted_params = 0) {
  require(observed.size() == probs.size() && !observed.empty(), Errc::domain,
          "chi_square_gof: observed/probability size mismatch");
  const double n = std::accumulate(observed.begin(), observed.end(), 0.0);
  std::vector<double> obs, expct;
  double o = 0.0, e = 0.0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    o += observed[i];
    e += n * probs[i];
    if (e >= min_expected) {
      obs.push_back(o);
      expct.push_back(e);
      o = e = 0.0;
    }
  }
  if (e > 0.0 || o > 0.0) {
    if (expct.empty()) {
      obs.push_back(o);
      expct.push_back(e);
    } else {
      obs.back() += o;
      expct.back() += e;
    }
  }
  ChiSquareResult r;
  r.bins = static_cast<int>(obs.size());
  for (std::size_t i = 0; i < obs.size(); ++i) r.statistic += (obs[i] - expct[i]) * (obs[i] - expct[i]) / expct[i];
  r.dof = r.bins - 1 - fitted_params;
  if (r.dof >= 1) {
    boost::math::chi_squared dist(r.dof);
    r.p_value = boost::math::cdf(boost::math::complement(dist, r.statistic));
  }
  return r;
}

struct Interval {
  double low = 0.0;
  double high = 1.0;
};

/// Wilson score interval for k successes in n trials.
inline Interval wilson(double k, double n, double z = 1.959963984540054) {
  if (n <= 0.0) return {0.0, 1.0};
  const double p = k / n;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double centre = (p + z2 / (2.0 * n)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
  return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

}  // namespace istlab::stats

#endif
