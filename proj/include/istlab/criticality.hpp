#ifndef ISTLAB_CRITICALITY_HPP
#define ISTLAB_CRITICALITY_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "istlab/contour.hpp"
#include "istlab/error.hpp"
#include "istlab/kernel.hpp"
#include "istlab/quadrature.hpp"
#include "istlab/random.hpp"
#include "istlab/rate.hpp"
#include "istlab/stats.hpp"

namespace istlab {

enum class Verdict { SubcriticalSufficient, SupercriticalSufficient, Inconclusive };

constexpr const char* verdict_name(Verdict v) {
  switch (v) {
    case Verdict::SubcriticalSufficient: return "SubcriticalSufficient";
    case Verdict::SupercriticalSufficient: return "SupercriticalSufficient";
    case Verdict::Inconclusive: return "Inconclusive";
  }
  return "Inconclusive";
}

struct CriticalityReport {
  std::vector<double> scan;
  std::vector<double> drift;       // b(x) m(x)
  std::vector<double> second;      // b(x) m_2(x) / x
  double limsup = 0.0;             // max of b m over the tail half of the scan
  double liminf = 0.0;             // min of b m over the tail half
  double second_moment_check = 0.0;  // sup of b m_2 / x over the tail half
  double stabilization = 0.0;      // relative change of mean b m between the two tail quarters
  bool stabilized = false;         // stabilization < 1%
  double integral_condition_value = std::numeric_limits<double>::quiet_NaN();
  Verdict verdict = Verdict::Inconclusive;
  std::string reason;
};

inline constexpr double kVerdictMargin = 0.05;

/// Verdict from the asymptotic drift b(x) m(x) over the tail half of `scan`.
inline CriticalityReport classify_asymptotic(const RateFunction& b, const LifetimeKernel& K, std::vector<double> scan) {
  require(scan.size() >= 4, Errc::domain, "classify_asymptotic needs at least 4 scan points");
  std::sort(scan.begin(), scan.end());
  CriticalityReport r;
  r.scan = scan;
  bool infinite_mean = false, infinite_second = false;
  for (double x : scan) {
    const double m = K.moment(x, 1);
    const double m2 = K.moment(x, 2);
    r.drift.push_back(b(x) * m);
    r.second.push_back(x > 0.0 ? b(x) * m2 / x : std::numeric_limits<double>::infinity());
    infinite_mean |= !std::isfinite(m);
    infinite_second |= !std::isfinite(m2);
  }
  const std::size_t half = scan.size() / 2, quarter = half + (scan.size() - half) / 2;
  r.limsup = *std::max_element(r.drift.begin() + half, r.drift.end());
  r.liminf = *std::min_element(r.drift.begin() + half, r.drift.end());
  r.second_moment_check = *std::max_element(r.second.begin() + half, r.second.end());
  auto mean = [](auto a, auto b) {
    double s = 0.0;
    for (auto it = a; it != b; ++it) s += *it;
    return s / static_cast<double>(b - a);
  };
  const double q1 = mean(r.drift.begin() + half, r.drift.begin() + quarter);
  const double q2 = mean(r.drift.begin() + quarter, r.drift.end());
  r.stabilization = std::abs(q2 - q1) / std::max(std::abs(q2), 1e-300);
  r.stabilized = r.stabilization < 0.01;

  if (infinite_mean) {
    r.verdict = Verdict::Inconclusive;
    r.reason = "m(x) = inf at some scan point";
  } else if (r.limsup < 1.0 - kVerdictMargin) {
    r.verdict = Verdict::SubcriticalSufficient;
    r.reason = "limsup b m < 1";
  } else if (r.liminf > 1.0 + kVerdictMargin && !infinite_second && std::isfinite(r.second_moment_check)) {
    r.verdict = Verdict::SupercriticalSufficient;
    r.reason = "liminf b m > 1 and sup b m_2 / x finite";
  } else if (r.liminf > 1.0 + kVerdictMargin) {
    r.verdict = Verdict::Inconclusive;
    r.reason = "liminf b m > 1 but b m_2 / x is unbounded";
  } else {
    r.verdict = Verdict::Inconclusive;
    r.reason = "b m within the margin of 1";
  }
  return r;
}

/// Psi(x) = int_0^x (m(s) b(s) - 1) e^{-int_s^x b} ds on the grid 0, dx, 2dx, ...
inline std::vector<double> integral_drift_profile(const RateFunction& b, const std::function<double(double)>& m,
                                                  double x_max, double dx) {
  require(x_max > 0.0 && dx > 0.0, Errc::domain, "integral_drift_scan needs x_max > 0 and mesh > 0");
  const auto n = static_cast<std::size_t>(std::ceil(x_max / dx));
  std::vector<double> psi(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double a = static_cast<double>(i) * dx, c = std::min(x_max, a + dx);
    const double inc = quad::integrate_abs(
        [&](double s) { return (m(s) * b(s) - 1.0) * std::exp(-b.cumulative(s, c)); }, a, c, 1e-15 * (c - a));
    psi[i + 1] = std::exp(-b.cumulative(a, c)) * psi[i] + inc;
  }
  return psi;
}

/// Max of Psi over the tail half of [0, x_max]; negative with margin means
/// the integral drift condition for extinction holds.
inline double integral_drift_scan(const RateFunction& b, const std::function<double(double)>& m, double x_max,
                                  double mesh) {
  const auto psi = integral_drift_profile(b, m, x_max, mesh);
  return *std::max_element(psi.begin() + static_cast<std::ptrdiff_t>(psi.size() / 2), psi.end());
}

inline double integral_drift_scan(const RateFunction& b, const LifetimeKernel& K, double x_max, double mesh) {
  return integral_drift_scan(b, [&](double s) { return K.moment(s, 1); }, x_max, mesh);
}

/// PV(x) - V(x) for the embedded kernel
///   PV(x) = int_0^x (K V(y + .))(y) b(y) e^{-int_y^x b} dy + V(0) e^{-int_0^x b}.
template <class V>
double discrete_drift(const RateFunction& b, const LifetimeKernel& K, V&& v, double x) {
  require(x >= 0.0, Errc::domain, "discrete_drift needs x >= 0");
  if (x == 0.0) return 0.0;
  auto integrand = [&](double y) {
    const double w = b(y) * std::exp(-b.cumulative(y, x));
    if (w == 0.0) return 0.0;
    return w * K.expect(y, [&](double z) { return v(y + z); });
  };
  const double pv = quad::integrate(integrand, 0.0, x, 1e-11) + v(0.0) * std::exp(-b.cumulative(0.0, x));
  return pv - v(x);
}

/// The periodic display for psi(t) = cos t + c, b = beta:
///   (1/(1+beta^2)) [-beta e^{-beta t}(1 + e^{-2 pi beta}) + beta cos t + sin t] + c/beta.
inline double periodic_phi(double beta, double c, double t) {
  require(beta > 0.0, Errc::domain, "periodic_phi needs beta > 0");
  const double pi = std::numbers::pi;
  return (-beta * std::exp(-beta * t) * (1.0 + std::exp(-2.0 * pi * beta)) + beta * std::cos(t) + std::sin(t)) /
             (1.0 + beta * beta) +
         c / beta;
}

/// Long-run limit of Psi(x) for the same environment:
///   (beta cos x + sin x)/(1 + beta^2) + c/beta.
inline double periodic_drift_asymptote(double beta, double c, double t) {
  require(beta > 0.0, Errc::domain, "periodic_drift_asymptote needs beta > 0");
  return (beta * std::cos(t) + std::sin(t)) / (1.0 + beta * beta) + c / beta;
}

namespace detail {
template <class F>
double sup_on_period(F&& f, double phase, std::size_t n = 4096) {
  const double two_pi = 2.0 * std::numbers::pi;
  const double step = two_pi / static_cast<double>(n);
  double best = -std::numeric_limits<double>::infinity(), arg = 0.0;
  std::vector<double> pts;
  for (std::size_t i = 0; i <= n; ++i) pts.push_back(std::fmod(phase + static_cast<double>(i) * step, two_pi));
  pts.push_back(0.0);
  pts.push_back(two_pi);
  for (double t : pts) {
    const double v = f(t);
    if (v > best) best = v, arg = t;
  }
  // golden-section refinement in the neighbouring cells
  double a = std::max(0.0, arg - step), c = std::min(two_pi, arg + step);
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = c - g * (c - a), x2 = a + g * (c - a), f1 = f(x1), f2 = f(x2);
  for (int it = 0; it < 200 && c - a > 1e-14; ++it) {
    if (f1 < f2) {
      a = x1, x1 = x2, f1 = f2, x2 = a + g * (c - a), f2 = f(x2);
    } else {
      c = x2, x2 = x1, f2 = f1, x1 = c - g * (c - a), f1 = f(x1);
    }
  }
  return std::max({best, f1, f2});
}
}  // namespace detail

/// sup of periodic_phi over [0, 2 pi]; `phase` shifts the scan grid.
inline double periodic_sup_phi(double beta, double c, double phase = 0.0) {
  return detail::sup_on_period([&](double t) { return periodic_phi(beta, c, t); }, phase);
}

inline double periodic_sup_asymptote(double beta, double c, double phase = 0.0) {
  return detail::sup_on_period([&](double t) { return periodic_drift_asymptote(beta, c, t); }, phase);
}

struct TailPoint {
  double threshold = 0.0;
  double estimate = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double bound_value = std::numeric_limits<double>::quiet_NaN();
};

struct TailReport {
  std::vector<TailPoint> points;
  std::size_t replicas = 0;
  std::size_t censored = 0;  // runs stopped at the length cap
  double decay_rate = std::numeric_limits<double>::quiet_NaN();  // fitted lambda in P(L >= t) ~ C e^{-lambda t}
  double decay_intercept = std::numeric_limits<double>::quiet_NaN();
  bool heavy_tail = false;
  double fitted_constant = std::numeric_limits<double>::quiet_NaN();  // smallest C with estimate <= C t^{-1/p+1/p^2}
  int envelope_order = 0;  // p used for the polynomial envelope
};

struct TailOptions {
  double max_length = std::numeric_limits<double>::infinity();  // lengths beyond this are censored
};

/// Monte Carlo estimate of P_x(L(T) >= t): the tree length is the absorption
/// time of the contour PDMP capped at T.
inline TailReport length_tail_estimate(const RateFunction& b, const LifetimeKernel& K, double x0, double T,
                                       std::size_t N, std::vector<double> thresholds, std::uint64_t seed,
                                       const TailOptions& opt = {}) {
  require(x0 > 0.0 && T > 0.0 && x0 <= T, Errc::domain, "length_tail_estimate needs 0 < x0 <= T");
  require(N >= 1, Errc::domain, "length_tail_estimate needs N >= 1");
  std::vector<double> scan;
  const double top = std::max(10.0, 4.0 * T);
  for (int i = 0; i <= 64; ++i) scan.push_back(top * (1.0 + i) / 65.0);
  const auto report = classify_asymptotic(b, K, scan);
  if (report.liminf > 1.0 + kVerdictMargin)
    throw Error(Errc::regime, "length_tail_estimate refuses supercritical parameters (liminf b m = " +
                                  std::to_string(report.liminf) + ")");
  std::sort(thresholds.begin(), thresholds.end());
  PdmpOptions po;
  po.cap = T;
  po.horizon = opt.max_length;
  const auto lengths = replicate<double>(N, seed, [&](std::size_t, Rng& rng) {
    const PdmpEnd end = run_pdmp(b, K, x0, rng, po, [](const Jump&) { return true; });
    return end.absorbed ? end.s : std::numeric_limits<double>::infinity();
  });
  TailReport r;
  r.replicas = N;
  r.censored = static_cast<std::size_t>(std::count_if(lengths.begin(), lengths.end(), [](double v) { return std::isinf(v); }));
  r.heavy_tail = std::holds_alternative<ParetoKernel>(K.variant());
  for (double t : thresholds) {
    const double k = static_cast<double>(std::count_if(lengths.begin(), lengths.end(), [&](double v) { return v >= t; }));
    const auto ci = stats::wilson(k, static_cast<double>(N));
    TailPoint p{t, k / static_cast<double>(N), ci.low, ci.high};
    if (const auto* par = std::get_if<ParetoKernel>(&K.variant()); par && t >= 1.0) {
      // P(at least one child of the root lives >= t) = (1 - e^{-b x0}) t^{-k} for constant b.
      const double bx = b.cumulative(0.0, x0);
      p.bound_value = -std::expm1(-bx) * std::pow(t, -par->k);
    }
    r.points.push_back(p);
  }
  // Log-linear fit on points with at least 20 exceedances.
  std::vector<double> xs, ys;
  for (const auto& p : r.points)
    if (p.estimate * static_cast<double>(N) >= 20.0 && p.estimate < 1.0) {
      xs.push_back(p.threshold);
      ys.push_back(std::log(p.estimate));
    }
  if (xs.size() >= 3) {
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) mx += xs[i], my += ys[i];
    mx /= static_cast<double>(xs.size());
    my /= static_cast<double>(xs.size());
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) sxy += (xs[i] - mx) * (ys[i] - my), sxx += (xs[i] - mx) * (xs[i] - mx);
    const double slope = sxy / sxx;
    r.decay_rate = -slope;
    r.decay_intercept = my - slope * mx;
  }
  if (r.heavy_tail) {
    const double k = std::get<ParetoKernel>(K.variant()).k;
    int p = 1;
    while (p + 1 < k) ++p;  // largest p with m_p finite (k >= p + 1)
    r.envelope_order = p;
    const double e = -1.0 / p + 1.0 / (static_cast<double>(p) * p);
    double C = 0.0;
    for (const auto& pt : r.points)
      if (pt.threshold > 0.0) C = std::max(C, pt.estimate / std::pow(pt.threshold, e));
    r.fitted_constant = C;
  }
  return r;
}

}  // namespace istlab

#endif
