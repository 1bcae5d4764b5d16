#ifndef ISTLAB_RATE_HPP
#define ISTLAB_RATE_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "istlab/error.hpp"

namespace istlab {

/// b(t) = beta.
struct ConstantRate {
  double beta = 1.0;
};

/// b(t) = 1 + c / (1 + t); requires c >= -1 so that b >= 0.
struct AsymptoticallyCriticalRate {
  double c = 0.0;
};

/// b(t) = beta. The periodic mean driver psi(t) = cos t + offset lives in
/// the criticality module; the rate itself is flat.
struct PeriodicRate {
  double beta = 1.0;
  double offset = 0.0;
};

/// b(t) = base + amplitude * sin(omega t + phase); requires base >= |amplitude|.
struct SinusoidalRate {
  double base = 1.0;
  double amplitude = 0.0;
  double omega = 1.0;
  double phase = 0.0;
};

/// values[i] on [breakpoints[i], breakpoints[i+1]); the last value extends to
/// infinity. breakpoints[0] must be 0.
struct PiecewiseConstantRate {
  std::vector<double> breakpoints;
  std::vector<double> values;
};

/// Linear interpolation of (grid, values); flat beyond the last node.
/// Cumulative integrals are exact for the interpolant, so against a smooth
/// underlying rate they carry the trapezoid error h^2 (t1 - t0) sup|b''| / 12.
struct TabulatedRate {
  std::vector<double> grid;
  std::vector<double> values;
  std::vector<double> cumulative;  // integral from grid[0] to grid[i]
  double pole = 0.0;               // > 0: rate is pole_coeff / t on (0, pole)
  double pole_coeff = 0.0;
};

/// Birth rate t -> b(t) on [0, inf) with exact cumulative integrals.
class RateFunction {
 public:
  using Variant = std::variant<ConstantRate, AsymptoticallyCriticalRate, PeriodicRate, SinusoidalRate,
                               PiecewiseConstantRate, TabulatedRate>;

  RateFunction() : v_(ConstantRate{0.0}) {}

  static RateFunction constant(double beta) {
    require(beta >= 0.0 && std::isfinite(beta), Errc::domain, "constant rate must be finite and >= 0");
    return RateFunction(ConstantRate{beta});
  }

  static RateFunction asymptotically_critical(double c) {
    require(c >= -1.0 && std::isfinite(c), Errc::domain, "asymptotically critical rate needs c >= -1");
    return RateFunction(AsymptoticallyCriticalRate{c});
  }

  static RateFunction periodic(double beta, double offset) {
    require(beta >= 0.0 && std::isfinite(beta), Errc::domain, "periodic rate needs beta >= 0");
    return RateFunction(PeriodicRate{beta, offset});
  }

  static RateFunction sinusoidal(double base, double amplitude, double omega = 1.0, double phase = 0.0) {
    require(std::isfinite(base) && std::isfinite(amplitude) && std::isfinite(omega) && std::isfinite(phase),
            Errc::domain, "sinusoidal rate parameters must be finite");
    require(base >= std::abs(amplitude), Errc::domain, "sinusoidal rate needs base >= |amplitude|");
    return RateFunction(SinusoidalRate{base, amplitude, omega, phase});
  }

  static RateFunction piecewise_constant(std::vector<double> breakpoints, std::vector<double> values) {
    require(!breakpoints.empty() && breakpoints.size() == values.size(), Errc::domain,
            "piecewise constant rate needs matching, non-empty breakpoints and values");
    require(breakpoints.front() == 0.0, Errc::domain, "piecewise constant rate must start at t = 0");
    for (std::size_t i = 0; i < values.size(); ++i) {
      require(values[i] >= 0.0 && std::isfinite(values[i]), Errc::domain, "rate values must be finite and >= 0");
      if (i > 0) require(breakpoints[i] > breakpoints[i - 1], Errc::domain, "breakpoints must increase");
    }
    return RateFunction(PiecewiseConstantRate{std::move(breakpoints), std::move(values)});
  }

  static RateFunction tabulated(std::vector<double> grid, std::vector<double> values) {
    require(grid.size() >= 2 && grid.size() == values.size(), Errc::domain,
            "tabulated rate needs at least two matching nodes");
    require(grid.front() == 0.0, Errc::domain, "tabulated rate grid must start at t = 0");
    std::vector<double> cum(grid.size(), 0.0);
    for (std::size_t i = 0; i < grid.size(); ++i) {
      require(values[i] >= 0.0 && std::isfinite(values[i]), Errc::domain, "rate values must be finite and >= 0");
      if (i > 0) {
        require(grid[i] > grid[i - 1], Errc::domain, "tabulated grid must increase");
        cum[i] = cum[i - 1] + 0.5 * (grid[i] - grid[i - 1]) * (values[i] + values[i - 1]);
      }
    }
    return RateFunction(TabulatedRate{std::move(grid), std::move(values), std::move(cum)});
  }

  /// Tabulated rate replaced on (0, pole) by c / t, continuous at `pole`.
  /// The integral diverges at 0, so a path descending under it never reaches 0.
  static RateFunction tabulated_with_pole(std::vector<double> grid, std::vector<double> values, double pole) {
    RateFunction r = tabulated(std::move(grid), std::move(values));
    auto& t = std::get<TabulatedRate>(r.v_);
    require(pole > 0.0 && pole < t.grid.back(), Errc::domain, "rate pole must lie inside the grid");
    t.pole_coeff = value(t, pole) * pole;
    t.pole = pole;
    return r;
  }

  const Variant& variant() const { return v_; }

  double operator()(double t) const {
    return std::visit([t](const auto& r) { return value(r, t); }, v_);
  }

  /// Antiderivative from 0.
  double antiderivative(double t) const {
    return std::visit([t](const auto& r) { return anti(r, t); }, v_);
  }

  /// Integral of b over [t0, t1].
  double cumulative(double t0, double t1) const {
    require(t1 >= t0, Errc::ordering, "cumulative_rate needs t0 <= t1");
    require(t0 >= 0.0, Errc::domain, "cumulative_rate needs t0 >= 0");
    if (t1 == t0) return 0.0;
    if (const auto* c = std::get_if<ConstantRate>(&v_)) return c->beta * (t1 - t0);
    if (const auto* p = std::get_if<PeriodicRate>(&v_)) return p->beta * (t1 - t0);
    return antiderivative(t1) - antiderivative(t0);
  }

  /// An upper bound of b on [t0, t1] (used for thinning).
  double sup_on(double t0, double t1) const {
    return std::visit([&](const auto& r) { return sup(r, t0, t1); }, v_);
  }

  /// Smallest value b takes on [t, inf) in the limit; > 0 means the
  /// cumulative integral diverges.
  double tail_infimum() const {
    return std::visit([](const auto& r) { return tail_inf(r); }, v_);
  }

  /// Level y in [0, x] with cumulative(y, x) = e, or nullopt when
  /// cumulative(0, x) <= e (no event before reaching 0).
  std::optional<double> invert_backward(double x, double e) const {
    const double target = antiderivative(x) - e;
    if (target <= antiderivative(0.0)) return std::nullopt;
    if (const auto* tr = std::get_if<TabulatedRate>(&v_); tr && tr->pole > 0.0 && target < 0.0)
      return tr->pole * std::exp(target / tr->pole_coeff);
    if (const auto* c = std::get_if<ConstantRate>(&v_)) return std::clamp(x - e / c->beta, 0.0, x);
    if (const auto* p = std::get_if<PeriodicRate>(&v_)) return std::clamp(x - e / p->beta, 0.0, x);
    if (const auto* pc = std::get_if<PiecewiseConstantRate>(&v_)) return invert_piecewise(*pc, target);
    return solve_antiderivative(target, 0.0, x);
  }

  /// Time z >= t with cumulative(t, z) = e. Throws Errc::unsupported when the
  /// cumulative integral stays below e (an infinite waiting time).
  double invert_forward(double t, double e) const {
    const double target = antiderivative(t) + e;
    if (const auto* c = std::get_if<ConstantRate>(&v_)) {
      require(c->beta > 0.0, Errc::unsupported, "infinite waiting time under a zero rate");
      return t + e / c->beta;
    }
    if (const auto* p = std::get_if<PeriodicRate>(&v_)) {
      require(p->beta > 0.0, Errc::unsupported, "infinite waiting time under a zero rate");
      return t + e / p->beta;
    }
    if (const auto* pc = std::get_if<PiecewiseConstantRate>(&v_)) return invert_piecewise(*pc, target);
    double hi = t + std::max(1e-3, e / std::max((*this)(t), 1e-3));
    while (antiderivative(hi) < target) {
      hi = t + 2.0 * (hi - t);
      require(hi < 1e12, Errc::unsupported, "infinite waiting time under a vanishing rate");
    }
    return solve_antiderivative(target, t, hi);
  }

 private:
  explicit RateFunction(Variant v) : v_(std::move(v)) {}

  static double value(const ConstantRate& r, double) { return r.beta; }
  static double value(const AsymptoticallyCriticalRate& r, double t) { return 1.0 + r.c / (1.0 + t); }
  static double value(const PeriodicRate& r, double) { return r.beta; }
  static double value(const SinusoidalRate& r, double t) {
    return r.base + r.amplitude * std::sin(r.omega * t + r.phase);
  }
  static double value(const PiecewiseConstantRate& r, double t) {
    return r.values[segment(r.breakpoints, t)];
  }
  static double value(const TabulatedRate& r, double t) {
    if (t < r.pole) return t > 0.0 ? r.pole_coeff / t : std::numeric_limits<double>::infinity();
    if (t >= r.grid.back()) return r.values.back();
    if (t <= r.grid.front()) return r.values.front();
    const std::size_t i = segment(r.grid, t);
    const double w = (t - r.grid[i]) / (r.grid[i + 1] - r.grid[i]);
    return r.values[i] + w * (r.values[i + 1] - r.values[i]);
  }

  static double anti(const ConstantRate& r, double t) { return r.beta * t; }
  static double anti(const AsymptoticallyCriticalRate& r, double t) { return t + r.c * std::log1p(t); }
  static double anti(const PeriodicRate& r, double t) { return r.beta * t; }
  static double anti(const SinusoidalRate& r, double t) {
    if (r.omega == 0.0) return (r.base + r.amplitude * std::sin(r.phase)) * t;
    return r.base * t - r.amplitude / r.omega * (std::cos(r.omega * t + r.phase) - std::cos(r.phase));
  }
  static double anti(const PiecewiseConstantRate& r, double t) {
    double acc = 0.0;
    for (std::size_t i = 0; i < r.breakpoints.size(); ++i) {
      const double lo = r.breakpoints[i];
      if (t <= lo) break;
      const double hi = i + 1 < r.breakpoints.size() ? std::min(t, r.breakpoints[i + 1]) : t;
      acc += r.values[i] * (hi - lo);
    }
    return acc;
  }
  static double anti(const TabulatedRate& r, double t) {
    if (r.pole > 0.0) {
      // anchored at the pole: anti(pole) = 0, anti(0) = -inf
      if (t < r.pole) return t > 0.0 ? r.pole_coeff * std::log(t / r.pole) : -std::numeric_limits<double>::infinity();
      return anti_table(r, t) - anti_table(r, r.pole);
    }
    return anti_table(r, t);
  }
  static double anti_table(const TabulatedRate& r, double t) {
    if (t <= 0.0) return 0.0;
    if (t >= r.grid.back()) return r.cumulative.back() + r.values.back() * (t - r.grid.back());
    const std::size_t i = segment(r.grid, t);
    const double w = (t - r.grid[i]) / (r.grid[i + 1] - r.grid[i]);
    const double v = r.values[i] + w * (r.values[i + 1] - r.values[i]);
    return r.cumulative[i] + 0.5 * (t - r.grid[i]) * (r.values[i] + v);
  }

  static double sup(const ConstantRate& r, double, double) { return r.beta; }
  static double sup(const PeriodicRate& r, double, double) { return r.beta; }
  static double sup(const AsymptoticallyCriticalRate& r, double t0, double t1) {
    return std::max(value(r, t0), value(r, t1));
  }
  static double sup(const SinusoidalRate& r, double, double) { return r.base + std::abs(r.amplitude); }
  static double sup(const PiecewiseConstantRate& r, double t0, double t1) {
    double m = 0.0;
    for (std::size_t i = segment(r.breakpoints, t0); i < r.breakpoints.size(); ++i) {
      if (r.breakpoints[i] > t1) break;
      m = std::max(m, r.values[i]);
    }
    return m;
  }
  static double sup(const TabulatedRate& r, double t0, double t1) {
    double m = std::max(value(r, t0), value(r, t1));
    if (t0 < r.pole) m = std::max(m, value(r, std::max(t0, 0.0)));
    for (std::size_t i = 0; i < r.grid.size(); ++i)
      if (r.grid[i] > t0 && r.grid[i] < t1) m = std::max(m, r.values[i]);
    return m;
  }

  static double tail_inf(const ConstantRate& r) { return r.beta; }
  static double tail_inf(const PeriodicRate& r) { return r.beta; }
  static double tail_inf(const AsymptoticallyCriticalRate&) { return 1.0; }
  static double tail_inf(const SinusoidalRate& r) {
    return r.omega == 0.0 ? r.base + r.amplitude * std::sin(r.phase) : r.base - std::abs(r.amplitude);
  }
  static double tail_inf(const PiecewiseConstantRate& r) { return r.values.back(); }
  static double tail_inf(const TabulatedRate& r) { return r.values.back(); }

  // Index i with knots[i] <= t < knots[i+1], clamped to [0, n-1].
  static std::size_t segment(const std::vector<double>& knots, double t) {
    const auto it = std::upper_bound(knots.begin(), knots.end(), t);
    if (it == knots.begin()) return 0;
    return static_cast<std::size_t>(it - knots.begin()) - 1;
  }

  static double invert_piecewise(const PiecewiseConstantRate& r, double target) {
    double acc = 0.0;
    for (std::size_t i = 0; i < r.breakpoints.size(); ++i) {
      const double lo = r.breakpoints[i];
      const bool last = i + 1 == r.breakpoints.size();
      const double hi = last ? std::numeric_limits<double>::infinity() : r.breakpoints[i + 1];
      const double piece = r.values[i] * (hi - lo);
      if (acc + piece >= target && r.values[i] > 0.0) return lo + (target - acc) / r.values[i];
      acc += last ? 0.0 : piece;
    }
    throw Error(Errc::unsupported, "infinite waiting time under a vanishing rate");
  }

  // Safeguarded Newton for antiderivative(y) = target on [lo, hi], 1e-12 in time.
  double solve_antiderivative(double target, double lo, double hi) const {
    double y = 0.5 * (lo + hi);
    for (int it = 0; it < 200; ++it) {
      const double f = antiderivative(y) - target;
      if (f > 0.0) hi = y; else lo = y;
      if (hi - lo <= 1e-12 * std::max(1.0, std::abs(hi))) break;
      const double slope = (*this)(y);
      double next = slope > 0.0 ? y - f / slope : 0.5 * (lo + hi);
      if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
      if (std::abs(next - y) <= 1e-13 * std::max(1.0, std::abs(y))) {
        y = next;
        break;
      }
      y = next;
    }
    return y;
  }

  Variant v_;
};

/// Integral of b over [t0, t1]; throws Errc::ordering when t1 < t0.
inline double cumulative_rate(const RateFunction& b, double t0, double t1) { return b.cumulative(t0, t1); }

}  // namespace istlab

#endif
