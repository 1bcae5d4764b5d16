#ifndef ISTLAB_SCALING_HPP
#define ISTLAB_SCALING_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>

#include "istlab/contour.hpp"
#include "istlab/error.hpp"
#include "istlab/kernel.hpp"
#include "istlab/random.hpp"
#include "istlab/rate.hpp"
#include "istlab/stats.hpp"

namespace istlab {

struct NearCriticalReport {
  std::vector<double> scan;
  std::vector<double> c_profile;   // x (b(x) m(x) - 1)
  std::vector<double> m2_profile;  // b(x) m_2(x)
  std::vector<double> m3_profile;  // b(x) m_3(x)
  double c_estimate = 0.0;         // mean of x (b m - 1) over the last quarter of the scan
  double m2_estimate = 0.0;        // mean of b m_2 over the last quarter
  double m3_sup = 0.0;
  bool c_converges = false;
  bool m2_to_one = false;
  bool m3_bounded = false;
  bool passes() const { return c_converges && m2_to_one && m3_bounded; }
  std::vector<std::string> violations;
};

/// Diagnostics for the asymptotically critical regime:
/// x (b m - 1) -> c, b m_2 -> 1, sup b m_3 < inf.
inline NearCriticalReport check_near_critical(const RateFunction& b, const LifetimeKernel& K, std::vector<double> scan) {
  require(scan.size() >= 8, Errc::domain, "check_near_critical needs at least 8 scan points");
  std::sort(scan.begin(), scan.end());
  NearCriticalReport r;
  r.scan = scan;
  for (double x : scan) {
    const double bx = b(x);
    r.c_profile.push_back(x * (bx * K.moment(x, 1) - 1.0));
    r.m2_profile.push_back(bx * K.moment(x, 2));
    r.m3_profile.push_back(bx * K.moment(x, 3));
  }
  const std::size_t n = scan.size(), q3 = n - n / 4, half = n / 2;
  auto mean = [](const std::vector<double>& v, std::size_t a, std::size_t b) {
    double s = 0.0;
    for (std::size_t i = a; i < b; ++i) s += v[i];
    return s / static_cast<double>(b - a);
  };
  r.c_estimate = mean(r.c_profile, q3, n);
  r.m2_estimate = mean(r.m2_profile, q3, n);
  r.m3_sup = *std::max_element(r.m3_profile.begin(), r.m3_profile.end());
  // x (b m - 1) is taken to converge when its spread over the tail half is
  // small against max(1, |c|) and does not keep growing with x.
  const double lo = *std::min_element(r.c_profile.begin() + half, r.c_profile.end());
  const double hi = *std::max_element(r.c_profile.begin() + half, r.c_profile.end());
  const double scale = std::max(1.0, std::abs(r.c_estimate));
  r.c_converges = std::isfinite(lo) && std::isfinite(hi) && (hi - lo) < 0.1 * scale;
  r.m2_to_one = std::isfinite(r.m2_estimate) && std::abs(r.m2_estimate - 1.0) < 0.05;
  r.m3_bounded = std::isfinite(r.m3_sup);
  if (!r.c_converges) r.violations.push_back("x (b m - 1) does not settle on the scan");
  if (!r.m2_to_one) r.violations.push_back("b m_2 does not tend to 1");
  if (!r.m3_bounded) r.violations.push_back("b m_3 is unbounded");
  return r;
}

/// X^n(s) = C(n s) / sqrt(n) where C is the base contour started at sqrt(n) x0:
/// slope sqrt(n), jump rate n b(sqrt(n) x), jump sizes y / sqrt(n) with
/// y ~ K(sqrt(n) x, .).
template <class Rate, class Kernel>
ContourPath simulate_rescaled_path(double n, const Rate& b, const Kernel& K, double x0, double horizon, Rng& rng,
                                   std::size_t max_jumps = 10'000'000) {
  require(n >= 1.0 && x0 > 0.0 && horizon > 0.0, Errc::domain, "simulate_rescaled needs n >= 1, x0 > 0, horizon > 0");
  const double c = std::sqrt(n);
  PdmpOptions opt;
  opt.horizon = n * horizon;
  opt.max_jumps = max_jumps;
  ContourPath base = simulate_pdmp(b, K, c * x0, rng, opt);
  ContourPath out;
  out.x0 = base.x0 / c;
  out.slope = c;
  out.horizon = base.horizon / n;
  if (base.absorption) out.absorption = *base.absorption / n;
  out.jumps.reserve(base.jumps.size());
  for (const auto& j : base.jumps) out.jumps.push_back({j.s / n, j.from / c, j.to / c});
  return out;
}

struct RescaledRun {
  double n = 1.0;
  double x0 = 0.0;
  double horizon = 0.0;
  std::vector<double> times;
  std::vector<std::vector<double>> samples;  // samples[k][i]: X^n(times[k]) on replica i
  std::vector<double> absorption_times;     // +inf when not absorbed by the horizon
  double absorbed_fraction = 0.0;
};

/// N rescaled paths, streamed: only the marginals at `times` and the
/// absorption times are kept.
template <class Rate, class Kernel>
RescaledRun simulate_rescaled(double n, const Rate& b, const Kernel& K, double x0, double horizon,
                              std::vector<double> times, std::size_t N, std::uint64_t seed,
                              std::size_t max_jumps = 10'000'000) {
  require(n >= 1.0 && x0 > 0.0 && horizon > 0.0 && N > 0, Errc::domain,
          "simulate_rescaled needs n >= 1, x0 > 0, horizon > 0, N > 0");
  std::sort(times.begin(), times.end());
  for (double t : times) require(t >= 0.0 && t <= horizon, Errc::domain, "simulate_rescaled: times must lie in [0, horizon]");
  const double c = std::sqrt(n);
  RescaledRun run;
  run.n = n;
  run.x0 = x0;
  run.horizon = horizon;
  run.times = times;
  struct One {
    std::vector<double> values;
    double absorbed_at;
  };
  PdmpOptions opt;
  opt.horizon = n * horizon;
  opt.max_jumps = max_jumps;
  const auto all = replicate<One>(N, seed, [&](std::size_t, Rng& rng) {
    One o;
    o.values.assign(times.size(), 0.0);
    std::size_t next = 0;
    double s0 = 0.0, v0 = c * x0;
    auto fill_until = [&](double s_limit, bool inclusive) {
      while (next < times.size() && (n * times[next] < s_limit || (inclusive && n * times[next] <= s_limit))) {
        o.values[next] = std::max(0.0, v0 - (n * times[next] - s0)) / c;
        ++next;
      }
    };
    const PdmpEnd end = run_pdmp(b, K, c * x0, rng, opt, [&](const Jump& j) {
      fill_until(j.s, false);
      s0 = j.s;
      v0 = j.to;
      return true;
    });
    fill_until(std::numeric_limits<double>::infinity(), true);
    o.absorbed_at = end.absorbed ? end.s / n : std::numeric_limits<double>::infinity();
    return o;
  });
  run.samples.assign(times.size(), std::vector<double>(N));
  run.absorption_times.resize(N);
  std::size_t absorbed = 0;
  for (std::size_t i = 0; i < N; ++i) {
    for (std::size_t k = 0; k < times.size(); ++k) run.samples[k][i] = all[i].values[k];
    run.absorption_times[i] = all[i].absorbed_at;
    absorbed += std::isfinite(all[i].absorbed_at);
  }
  run.absorbed_fraction = static_cast<double>(absorbed) / static_cast<double>(N);
  return run;
}

enum class BesselMethod { Exact, Euler };

/// P(the Bessel process of dimension 2c + 1 from x0, absorbed at 0, is still
/// positive at t). 1 when the dimension is at least 2.
inline double bessel_survival(double c, double x0, double t) {
  const double delta = 2.0 * c + 1.0;
  if (delta >= 2.0) return 1.0;
  const double s = 1.0 - 0.5 * delta;
  return boost::math::gamma_p(s, x0 * x0 / (2.0 * t));
}

/// One draw of X_t for the Bessel process with generator (c/x) f' + f''/2,
/// absorbed at 0, through its square Y = X^2 (squared Bessel of dimension
/// delta = 2c + 1, Y_0 = x0^2):
///   delta >= 2: Y = 2t Gamma(delta/2 + K), K ~ Poisson(x0^2 / 2t);
///   delta <  2: killed with probability 1 - P(1 - delta/2, x0^2 / 2t), else
///               Y = 2t Gamma(K + 1) with P(K = k) proportional to
///               lambda^{k+s} / Gamma(k + 1 + s), s = 1 - delta/2.
inline double bessel_draw(double c, double x0, double t, Rng& rng, BesselMethod method = BesselMethod::Exact) {
  require(x0 > 0.0 && t > 0.0, Errc::domain, "bessel_marginal needs x0 > 0 and t > 0");
  const double delta = 2.0 * c + 1.0;
  if (method == BesselMethod::Euler) {
    const std::size_t steps = 10'000;
    const double dt = t / static_cast<double>(steps), sq = std::sqrt(dt);
    std::normal_distribution<double> z;
    double y = x0 * x0;
    for (std::size_t i = 0; i < steps; ++i) {
      y += delta * dt + 2.0 * std::sqrt(std::max(y, 0.0)) * sq * z(rng);
      if (y <= 0.0) {
        if (delta < 2.0) return 0.0;
        y = 0.0;
      }
    }
    return std::sqrt(y);
  }
  const double lambda = x0 * x0 / (2.0 * t);
  if (delta >= 2.0) {
    std::poisson_distribution<long> pois(lambda);
    const long k = pois(rng);
    std::gamma_distribution<double> g(0.5 * delta + static_cast<double>(k), 2.0 * t);
    return std::sqrt(g(rng));
  }
  const double s = 1.0 - 0.5 * delta;
  const double surv = boost::math::gamma_p(s, lambda);
  double u = uniform_open(rng);
  if (u >= surv) return 0.0;
  // walk the weights e^{-lambda} lambda^{k+s} / Gamma(k+1+s)
  const double log_lambda = std::log(lambda);
  long k = 0;
  double w = std::exp(-lambda + s * log_lambda - std::lgamma(1.0 + s));
  while (u > w && k < 100'000) {
    u -= w;
    ++k;
    w *= lambda / (static_cast<double>(k) + s);
  }
  std::gamma_distribution<double> g(static_cast<double>(k) + 1.0, 2.0 * t);
  return std::sqrt(g(rng));
}

inline std::vector<double> bessel_marginal(double c, double x0, double t, std::size_t N, std::uint64_t seed,
                                           BesselMethod method = BesselMethod::Exact) {
  return replicate<double>(N, seed, [&](std::size_t, Rng& rng) { return bessel_draw(c, x0, t, rng, method); });
}

struct ScalingEntry {
  double n = 0.0;
  double ks = 0.0;              // distance between the non-absorbed parts
  double critical_value = 0.0;  // two-sample, level 0.01
  double p_value = 0.0;
  double absorbed_rescaled = 0.0;
  double absorbed_oracle = 0.0;
  std::size_t alive_rescaled = 0;
  std::size_t alive_oracle = 0;
  /// Largest share of the non-absorbed rescaled sample sitting on a single
  /// value. Lattice kernels (Dirac) put X^n(t) on a grid of spacing
  /// 1/sqrt(n), and the KS distance to a continuous law cannot drop below
  /// roughly this mass.
  double max_atom = 0.0;
};

inline double largest_atom(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  std::size_t best = 1, run = 1;
  for (std::size_t i = 1; i < v.size(); ++i) {
    run = std::abs(v[i] - v[i - 1]) <= 1e-9 * std::max(1.0, std::abs(v[i])) ? run + 1 : 1;
    best = std::max(best, run);
  }
  return static_cast<double>(best) / static_cast<double>(v.size());
}

struct ScalingReport {
  double c = 0.0, x0 = 0.0, t = 0.0;
  std::size_t N = 0;
  double alpha = 0.01;
  std::vector<ScalingEntry> entries;
  /// Each step either decreases or both distances are already below the
  /// critical value (the noise floor).
  bool decreasing = false;
  bool last_below_critical = false;
};

/// KS distance between the rescaled marginal at t and the Bessel oracle for
/// each n, with the absorbed masses compared separately.
template <class Rate, class Kernel>
ScalingReport compare_scaling_limit(const std::vector<double>& n_list, const Rate& b, const Kernel& K, double c,
                                    double x0, double t, std::size_t N, std::uint64_t seed, double alpha = 0.01) {
  require(!n_list.empty(), Errc::domain, "compare_scaling_limit needs at least one n");
  ScalingReport r;
  r.c = c, r.x0 = x0, r.t = t, r.N = N, r.alpha = alpha;
  const auto oracle = bessel_marginal(c, x0, t, N, splitmix64(seed ^ 0xB3553Lu));
  std::vector<double> oracle_alive;
  for (double v : oracle)
    if (v > 0.0) oracle_alive.push_back(v);
  for (std::size_t i = 0; i < n_list.size(); ++i) {
    const double n = n_list[i];
    const auto run = simulate_rescaled(n, b, K, x0, t, {t}, N, replica_seed(seed, i));
    std::vector<double> alive;
    for (double v : run.samples[0])
      if (v > 0.0) alive.push_back(v);
    ScalingEntry e;
    e.n = n;
    e.alive_rescaled = alive.size();
    e.alive_oracle = oracle_alive.size();
    e.absorbed_rescaled = 1.0 - static_cast<double>(alive.size()) / static_cast<double>(N);
    e.absorbed_oracle = 1.0 - static_cast<double>(oracle_alive.size()) / static_cast<double>(N);
    e.max_atom = largest_atom(alive);
    if (!alive.empty() && !oracle_alive.empty()) {
      e.ks = stats::ks_two_sample(alive, oracle_alive);
      e.critical_value = stats::ks_critical_value(alive.size(), oracle_alive.size(), alpha);
      e.p_value = stats::ks_two_sample_pvalue(e.ks, alive.size(), oracle_alive.size());
    }
    r.entries.push_back(e);
  }
  r.decreasing = true;
  for (std::size_t i = 1; i < r.entries.size(); ++i) {
    const auto& a = r.entries[i - 1];
    const auto& b2 = r.entries[i];
    const bool floor = a.ks < a.critical_value && b2.ks < b2.critical_value;
    if (!(b2.ks < a.ks || floor)) r.decreasing = false;
  }
  r.last_below_critical = r.entries.back().ks < r.entries.back().critical_value;
  return r;
}

}  // namespace istlab

#endif
