#ifndef ISTLAB_KERNEL_HPP
#define ISTLAB_KERNEL_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include "istlab/error.hpp"
#include "istlab/quadrature.hpp"
#include "istlab/random.hpp"
#include "istlab/rate.hpp"

namespace istlab {

/// Point mass at a.
struct DiracKernel {
  double a = 1.0;
};

/// K(t, du) = d(t+u) exp(-int_t^{t+u} d) du: death at rate d(.) in absolute time.
struct ExponentialKernel {
  RateFunction death;
};

/// Density k / y^{k+1} on [1, inf).
struct ParetoKernel {
  double k = 2.0;
};

/// Death at the next integer time strictly after birth: lifetime 1 - t on
/// [0, 1), 2 - t on [1, 2), and so on. Not weakly continuous at integers.
struct TwoPointDeathKernel {};

/// Time-independent lifetime law with piecewise-uniform density between the
/// nodes of a CDF table (grid[0] >= 0, cdf[0] = 0, cdf.back() = 1).
struct TabulatedKernel {
  std::vector<double> grid;
  std::vector<double> cdf;
};

/// Lifetime kernel t -> K(t, .). All shipped variants are finite-valued; an
/// infinite lifetime is never produced.
class LifetimeKernel {
 public:
  using Variant = std::variant<DiracKernel, ExponentialKernel, ParetoKernel, TwoPointDeathKernel, TabulatedKernel>;

  LifetimeKernel() : v_(DiracKernel{1.0}) {}

  static LifetimeKernel dirac(double a) {
    require(a > 0.0 && std::isfinite(a), Errc::domain, "dirac lifetime must be finite and > 0");
    return LifetimeKernel(DiracKernel{a});
  }

  static LifetimeKernel exponential(RateFunction death) {
    require(death.tail_infimum() > 0.0, Errc::unsupported,
            "death rate must stay bounded away from 0 (infinite lifetimes are unsupported)");
    return LifetimeKernel(ExponentialKernel{std::move(death)});
  }

  static LifetimeKernel exponential(double d) { return exponential(RateFunction::constant(d)); }

  static LifetimeKernel pareto(double k) {
    require(k > 0.0 && std::isfinite(k), Errc::domain, "pareto index must be finite and > 0");
    return LifetimeKernel(ParetoKernel{k});
  }

  static LifetimeKernel two_point_death() { return LifetimeKernel(TwoPointDeathKernel{}); }

  static LifetimeKernel tabulated(std::vector<double> grid, std::vector<double> cdf) {
    require(grid.size() >= 2 && grid.size() == cdf.size(), Errc::domain,
            "tabulated kernel needs at least two matching nodes");
    require(grid.front() >= 0.0 && cdf.front() == 0.0 && cdf.back() == 1.0, Errc::domain,
            "tabulated kernel cdf must run from 0 to 1 on nonnegative lifetimes");
    for (std::size_t i = 1; i < grid.size(); ++i) {
      require(grid[i] > grid[i - 1], Errc::domain, "tabulated kernel grid must increase");
      require(cdf[i] >= cdf[i - 1], Errc::domain, "tabulated kernel cdf must be nondecreasing");
    }
    return LifetimeKernel(TabulatedKernel{std::move(grid), std::move(cdf)});
  }

  const Variant& variant() const { return v_; }

  bool weakly_continuous() const { return !std::holds_alternative<TwoPointDeathKernel>(v_); }

  /// Exponential kernel with a constant death rate, if that is what this is.
  std::optional<double> constant_death_rate() const {
    if (const auto* e = std::get_if<ExponentialKernel>(&v_)) {
      if (const auto* c = std::get_if<ConstantRate>(&e->death.variant())) return c->beta;
      if (const auto* p = std::get_if<PeriodicRate>(&e->death.variant())) return p->beta;
    }
    return std::nullopt;
  }

  /// Draw a lifetime from K(t, .).
  double sample(double t, Rng& rng) const {
    return std::visit(
        [&](const auto& k) -> double {
          using K = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<K, DiracKernel>) {
            return k.a;
          } else if constexpr (std::is_same_v<K, ExponentialKernel>) {
            const double e = standard_exponential(rng);
            if (auto d = constant_death_rate()) return e / *d;
            return k.death.invert_forward(t, e) - t;
          } else if constexpr (std::is_same_v<K, ParetoKernel>) {
            return std::pow(uniform_open(rng), -1.0 / k.k);
          } else if constexpr (std::is_same_v<K, TwoPointDeathKernel>) {
            return two_point_lifetime(t);
          } else {
            const double u = uniform_open(rng);
            const auto it = std::upper_bound(k.cdf.begin(), k.cdf.end(), u);
            const std::size_t i = std::min<std::size_t>(static_cast<std::size_t>(it - k.cdf.begin()), k.cdf.size() - 1);
            const double w = (u - k.cdf[i - 1]) / (k.cdf[i] - k.cdf[i - 1]);
            return k.grid[i - 1] + w * (k.grid[i] - k.grid[i - 1]);
          }
        },
        v_);
  }

  /// m_p(t) = int y^p K(t, dy); +inf when the moment diverges.
  double moment(double t, int p) const {
    require(p >= 1, Errc::domain, "moment order must be >= 1");
    return std::visit(
        [&](const auto& k) -> double {
          using K = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<K, DiracKernel>) {
            return std::pow(k.a, p);
          } else if constexpr (std::is_same_v<K, ExponentialKernel>) {
            if (auto d = constant_death_rate()) return std::tgamma(p + 1.0) / std::pow(*d, p);
            // int p u^{p-1} P(xi > u) du
            return quad::integrate(
                [&](double u) { return p * std::pow(u, p - 1) * survival(k, t, u); }, 0.0, quad::kInf, 1e-11);
          } else if constexpr (std::is_same_v<K, ParetoKernel>) {
            return k.k > p ? k.k / (k.k - p) : std::numeric_limits<double>::infinity();
          } else if constexpr (std::is_same_v<K, TwoPointDeathKernel>) {
            return std::pow(two_point_lifetime(t), p);
          } else {
            double m = 0.0;
            for (std::size_t i = 1; i < k.grid.size(); ++i) {
              const double a = k.grid[i - 1], b = k.grid[i];
              m += (k.cdf[i] - k.cdf[i - 1]) * (std::pow(b, p + 1) - std::pow(a, p + 1)) / ((p + 1) * (b - a));
            }
            return m;
          }
        },
        v_);
  }

  /// (Kf)(t) = int f(y) K(t, dy). `cuts` are lifetimes where f has kinks.
  template <class F>
  double expect(double t, F&& f, std::span<const double> cuts = {}) const {
    return std::visit(
        [&](const auto& k) -> double {
          using K = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<K, DiracKernel>) {
            return f(k.a);
          } else if constexpr (std::is_same_v<K, ExponentialKernel>) {
            auto g = [&](double u) {
              const double w = k.death(t + u) * survival(k, t, u);
              return w == 0.0 ? 0.0 : f(u) * w;
            };
            std::vector<double> edges(cuts.begin(), cuts.end());
            std::sort(edges.begin(), edges.end());
            double total = 0.0, lo = 0.0;
            for (double c : edges) {
              if (c <= lo) continue;
              total += quad::integrate(g, lo, c, 1e-11);
              lo = c;
            }
            return total + quad::integrate(g, lo, quad::kInf, 1e-11);
          } else if constexpr (std::is_same_v<K, ParetoKernel>) {
            // y = u^{-1/k} maps (0, 1] onto [1, inf) with unit density.
            auto g = [&](double u) { return f(std::pow(u, -1.0 / k.k)); };
            std::vector<double> edges{0.0};
            for (double c : cuts)
              if (c > 1.0) edges.push_back(std::pow(c, -k.k));
            edges.push_back(1.0);
            std::sort(edges.begin(), edges.end());
            double total = 0.0;
            for (std::size_t i = 0; i + 1 < edges.size(); ++i)
              total += edges[i] == 0.0 ? quad::integrate_singular(g, edges[i], edges[i + 1], 1e-10)
                                       : quad::integrate(g, edges[i], edges[i + 1], 1e-11);
            return total;
          } else if constexpr (std::is_same_v<K, TwoPointDeathKernel>) {
            return f(two_point_lifetime(t));
          } else {
            double total = 0.0;
            for (std::size_t i = 1; i < k.grid.size(); ++i) {
              const double mass = k.cdf[i] - k.cdf[i - 1];
              if (mass == 0.0) continue;
              const double a = k.grid[i - 1], b = k.grid[i];
              total += mass / (b - a) * quad::integrate_split(f, a, b, cuts, 1e-11);
            }
            return total;
          }
        },
        v_);
  }

  /// K(t, [0, v)) and int_{[0, v)} y K(t, dy) at v = 0, h, 2h, ..., n h.
  /// The scale solver builds its exact piecewise-linear weights from these.
  void profile(double t, double h, std::size_t n, std::vector<double>& mass, std::vector<double>& mean) const {
    mass.assign(n + 1, 0.0);
    mean.assign(n + 1, 0.0);
    if (const auto* e = std::get_if<ExponentialKernel>(&v_); e && !constant_death_rate()) {
      // Incremental: int_{[0,v)} y dF = int_0^v G - v G(v).
      double int_g = 0.0;
      for (std::size_t j = 1; j <= n; ++j) {
        const double a = (j - 1) * h, b = j * h;
        int_g += quad::integrate([&](double u) { return survival(*e, t, u); }, a, b, 1e-12);
        const double g = survival(*e, t, b);
        mass[j] = 1.0 - g;
        mean[j] = int_g - b * g;
      }
      return;
    }
    for (std::size_t j = 1; j <= n; ++j) {
      const auto [m, y] = below(t, j * h);
      mass[j] = m;
      mean[j] = y;
    }
  }

  /// (K(t, [0, v)), int_{[0, v)} y K(t, dy)).
  std::pair<double, double> below(double t, double v) const {
    return std::visit(
        [&](const auto& k) -> std::pair<double, double> {
          using K = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<K, DiracKernel>) {
            return k.a < v ? std::pair{1.0, k.a} : std::pair{0.0, 0.0};
          } else if constexpr (std::is_same_v<K, ExponentialKernel>) {
            if (v <= 0.0) return {0.0, 0.0};
            if (auto d = constant_death_rate()) {
              const double g = std::exp(-*d * v);
              return {-std::expm1(-*d * v), (-std::expm1(-*d * v)) / *d - v * g};
            }
            const double g = survival(k, t, v);
            const double int_g = quad::integrate([&](double u) { return survival(k, t, u); }, 0.0, v, 1e-12);
            return {1.0 - g, int_g - v * g};
          } else if constexpr (std::is_same_v<K, ParetoKernel>) {
            if (v <= 1.0) return {0.0, 0.0};
            const double m = 1.0 - std::pow(v, -k.k);
            const double y = k.k == 1.0 ? std::log(v) : k.k / (k.k - 1.0) * (1.0 - std::pow(v, 1.0 - k.k));
            return {m, y};
          } else if constexpr (std::is_same_v<K, TwoPointDeathKernel>) {
            const double a = two_point_lifetime(t);
            return a < v ? std::pair{1.0, a} : std::pair{0.0, 0.0};
          } else {
            double m = 0.0, y = 0.0;
            for (std::size_t i = 1; i < k.grid.size(); ++i) {
              const double a = k.grid[i - 1], b = std::min(k.grid[i], v);
              if (b <= a) break;
              const double dens = (k.cdf[i] - k.cdf[i - 1]) / (k.grid[i] - a);
              m += dens * (b - a);
              y += dens * 0.5 * (b * b - a * a);
            }
            return {m, y};
          }
        },
        v_);
  }

  /// Lifetime with K(t, .) = delta_a, if the kernel is a point mass at t.
  std::optional<double> point_mass(double t) const {
    if (const auto* d = std::get_if<DiracKernel>(&v_)) return d->a;
    if (std::holds_alternative<TwoPointDeathKernel>(v_)) return two_point_lifetime(t);
    return std::nullopt;
  }

  /// Upper bound of the support of K(t, .) (inf when unbounded).
  double support_max(double t) const {
    if (auto a = point_mass(t)) return *a;
    if (const auto* tab = std::get_if<TabulatedKernel>(&v_)) return tab->grid.back();
    return std::numeric_limits<double>::infinity();
  }

  static double two_point_lifetime(double t) { return std::floor(t) + 1.0 - t; }

 private:
  explicit LifetimeKernel(Variant v) : v_(std::move(v)) {}

  static double survival(const ExponentialKernel& k, double t, double u) {
    return std::exp(-k.death.cumulative(t, t + u));
  }

  Variant v_;
};

/// m_p(t); +inf is a valid result.
inline double kernel_moment(const LifetimeKernel& K, double t, int p) { return K.moment(t, p); }

/// (Kf)(t).
template <class F>
double kernel_expect(const LifetimeKernel& K, double t, F&& f, std::span<const double> cuts = {}) {
  return K.expect(t, std::forward<F>(f), cuts);
}

}  // namespace istlab

#endif
