#ifndef ISTLAB_QUADRATURE_HPP
#define ISTLAB_QUADRATURE_HPP

// Thin wrappers over Boost.Math quadrature that turn silent inaccuracy into
// Errc::integration.

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include "istlab/error.hpp"

namespace istlab::quad {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Adaptive Gauss-Kronrod on [a, b]; b may be +inf.
template <class F>
double integrate(F&& f, double a, double b, double rel_tol = 1e-10, double abs_tol = 1e-14) {
  if (!(b > a)) return 0.0;
  double error = 0.0;
  double l1 = 0.0;
  double value = 0.0;
  try {
    value = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, a, b, 20, rel_tol, &error,
                                                                           &l1);
  } catch (const std::exception& e) {
    throw Error(Errc::integration, std::string("gauss-kronrod failed: ") + e.what());
  }
  if (!std::isfinite(value) || error > std::max(abs_tol, 1e3 * rel_tol * std::max(l1, 1e-300)))
    throw Error(Errc::integration, "gauss-kronrod did not reach tolerance on [" + std::to_string(a) + ", " +
                                       std::to_string(b) + "], error estimate " + std::to_string(error));
  return value;
}

/// Bisection over the 31-point Gauss-Kronrod rule on a finite [a, b],
/// stopping once |K - G| <= max(abs_tol, rel_tol * int|f|) on each piece.
/// For integrands near zero whose values carry cancellation noise, where no
/// relative target is reachable.
template <class F>
double integrate_abs(F&& f, double a, double b, double abs_tol, double rel_tol = 1e-10, int depth = 30) {
  if (!(b > a)) return 0.0;
  double error = 0.0, l1 = 0.0;
  const double value =
      boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, a, b, 0, rel_tol, &error, &l1);
  error *= 0.5 * (b - a);  // the depth-0 estimate is on [-1, 1]
  require(std::isfinite(value), Errc::integration, "gauss-kronrod produced a non-finite value");
  if (error <= std::max(abs_tol, rel_tol * l1)) return value;
  if (depth == 0)
    throw Error(Errc::integration, "gauss-kronrod did not reach tolerance on [" + std::to_string(a) + ", " +
                                       std::to_string(b) + "], error estimate " + std::to_string(error));
  const double m = 0.5 * (a + b);
  return integrate_abs(f, a, m, 0.5 * abs_tol, rel_tol, depth - 1) +
         integrate_abs(f, m, b, 0.5 * abs_tol, rel_tol, depth - 1);
}

/// Same as integrate() but splits [a, b] at the given interior points.
template <class F>
double integrate_split(F&& f, double a, double b, std::span<const double> cuts, double rel_tol = 1e-10) {
  std::vector<double> edges{a};
  for (double c : cuts)
    if (c > a && c < b) edges.push_back(c);
  std::sort(edges.begin() + 1, edges.end());
  edges.push_back(b);
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < edges.size(); ++i) total += integrate(f, edges[i], edges[i + 1], rel_tol);
  return total;
}

/// tanh-sinh on a finite interval; tolerates integrable endpoint singularities.
template <class F>
double integrate_singular(F&& f, double a, double b, double rel_tol = 1e-10) {
  if (!(b > a)) return 0.0;
  static thread_local boost::math::quadrature::tanh_sinh<double> engine;
  double error = 0.0;
  double l1 = 0.0;
  std::size_t levels = 0;
  double value = 0.0;
  try {
    value = engine.integrate(f, a, b, rel_tol, &error, &l1, &levels);
  } catch (const std::exception& e) {
    throw Error(Errc::integration, std::string("tanh-sinh failed: ") + e.what());
  }
  if (!std::isfinite(value) || error > 1e3 * rel_tol * std::max(l1, 1e-300))
    throw Error(Errc::integration, "tanh-sinh did not converge (integrand not integrable?)");
  return value;
}

/// Trapezoid rule on a uniform grid of step h.
inline double trapezoid(std::span<const double> y, double h) {
  if (y.size() < 2) return 0.0;
  double s = 0.5 * (y.front() + y.back());
  for (std::size_t i = 1; i + 1 < y.size(); ++i) s += y[i];
  return s * h;
}

}  // namespace istlab::quad

#endif
