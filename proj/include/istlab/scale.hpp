#ifndef ISTLAB_SCALE_HPP
#define ISTLAB_SCALE_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "istlab/error.hpp"
#include "istlab/kernel.hpp"
#include "istlab/quadrature.hpp"
#include "istlab/rate.hpp"
#include "istlab/tree.hpp"

namespace istlab {

/// S_T on the uniform grid t_j = j T / M. values[M] holds the left limit
/// S_T(T-); S_T itself is 0 from T on.
struct ScaleTable {
  double T = 0.0;
  std::size_t M = 0;
  double h = 0.0;
  std::vector<double> values;
  double tol = 0.0;
  std::size_t sweeps = 0;
  double final_change = 0.0;
  double residual = 0.0;

  double grid(std::size_t j) const { return j == M ? T : static_cast<double>(j) * h; }

  /// Linear interpolation; 0 for t >= T.
  double at(double t) const {
    require(t >= 0.0, Errc::domain, "scale table queried at t < 0");
    if (t >= T) return 0.0;
    const double u = t / h;
    const std::size_t j = std::min(static_cast<std::size_t>(u), M - 1);
    const double w = u - static_cast<double>(j);
    return values[j] + w * (values[j + 1] - values[j]);
  }

  double left_limit() const { return values[M]; }
};

namespace detail {

// Linear map S -> I with I_j = int_{[0, T - t_j)} S(t_j + v) K(t_j, dv) for
// piecewise-linear S, plus the kernel mass beyond T - t_j.
class ScaleWeights {
 public:
  ScaleWeights(const LifetimeKernel& K, double h, std::size_t M) : M_(M) {
    const bool homogeneous = !std::holds_alternative<TwoPointDeathKernel>(K.variant()) &&
                             (!std::holds_alternative<ExponentialKernel>(K.variant()) || K.constant_death_rate());
    homogeneous_ = homogeneous;
    std::vector<double> F, G;
    if (homogeneous_) {
      K.profile(0.0, h, M, F, G);
      L_.resize(M);
      R_.resize(M);
      tail_.resize(M + 1);
      for (std::size_t k = 0; k < M; ++k) split(F, G, k, h, L_[k], R_[k]);
      for (std::size_t j = 0; j <= M; ++j) tail_[j] = std::max(0.0, 1.0 - F[M - j]);
    } else {
      offset_.resize(M + 2);
      tail_.resize(M + 1);
      for (std::size_t j = 0; j <= M; ++j) offset_[j + 1] = offset_[j] + (M - j + 1);
      coeff_.assign(offset_[M + 1], 0.0);
      for (std::size_t j = 0; j <= M; ++j) {
        const std::size_t n = M - j;
        K.profile(static_cast<double>(j) * h, h, n, F, G);
        double* c = coeff_.data() + offset_[j];
        for (std::size_t k = 0; k < n; ++k) {
          double l, r;
          split(F, G, k, h, l, r);
          c[k] += l;
          c[k + 1] += r;
        }
        tail_[j] = std::max(0.0, 1.0 - F[n]);
      }
    }
  }

  /// I_j for all j; `beyond` is the value S is given on [T, inf).
  void apply(const std::vector<double>& S, std::vector<double>& I, double beyond = 0.0) const {
    I.assign(M_ + 1, 0.0);
    for (std::size_t j = 0; j <= M_; ++j) {
      double acc = 0.0;
      const std::size_t n = M_ - j;
      if (homogeneous_) {
        const double* s = S.data() + j;
        for (std::size_t k = 0; k < n; ++k) acc += L_[k] * s[k] + R_[k] * s[k + 1];
      } else {
        const double* c = coeff_.data() + offset_[j];
        const double* s = S.data() + j;
        for (std::size_t k = 0; k <= n; ++k) acc += c[k] * s[k];
      }
      I[j] = acc + beyond * tail_[j];
    }
  }

 private:
  // Interval [k h, (k+1) h): S = S_k + (S_{k+1} - S_k)(v - k h)/h.
  static void split(const std::vector<double>& F, const std::vector<double>& G, std::size_t k, double h, double& l,
                    double& r) {
    const double m = std::max(0.0, F[k + 1] - F[k]);
    const double mu = G[k + 1] - G[k];
    const double frac = m > 0.0 ? std::clamp((mu - static_cast<double>(k) * h * m) / h, 0.0, m) : 0.0;
    l = m - frac;
    r = frac;
  }

  std::size_t M_;
  bool homogeneous_ = true;
  std::vector<double> L_, R_, tail_, coeff_;
  std::vector<std::size_t> offset_;
};

// One application of the fixed-point operator:
//   S(t) = e^{-B(t)} [1 + int_0^t b(s) e^{B(s)} I(s) ds]
// via J_{j+1} = e^{-dB} J_j + w0_j I_j + w1_j I_{j+1}, I linear on each cell.
// w0 + w1 = 1 - e^{-dB} exactly, so I == 1 gives S == 1 exactly; the split
// treats b as its cell average.
class ScaleOperator {
 public:
  ScaleOperator(const RateFunction& b, const LifetimeKernel& K, double T, std::size_t M)
      : T_(T), M_(M), h_(T / static_cast<double>(M)), weights_(K, T / static_cast<double>(M), M) {
    bval_.resize(M + 1);
    expB_.resize(M + 1);
    decay_.assign(M + 1, 1.0);
    w0_.assign(M + 1, 0.0);
    w1_.assign(M + 1, 0.0);
    double prev = 0.0, B = 0.0;
    for (std::size_t j = 0; j <= M; ++j) {
      const double t = j == M ? T : static_cast<double>(j) * h_;
      bval_[j] = b(t);
      if (j > 0) {
        const double dB = b.cumulative(prev, t);
        B += dB;
        decay_[j] = std::exp(-dB);
        const double total = -std::expm1(-dB);
        // int_0^1 dB e^{-dB u} (1 - u) du
        const double g = dB < 1e-3 ? dB * (0.5 - dB * (1.0 / 3.0 - dB * (0.125 - dB / 30.0)))
                                   : (total - dB * decay_[j]) / dB;
        w1_[j] = total - g;
        w0_[j] = g;
      }
      expB_[j] = std::exp(-B);
      prev = t;
    }
  }

  double h() const { return h_; }
  const std::vector<double>& no_birth() const { return expB_; }

  void apply(const std::vector<double>& S, std::vector<double>& out, double beyond = 0.0) const {
    weights_.apply(S, I_, beyond);
    out.resize(M_ + 1);
    double J = 0.0;
    out[0] = 1.0;
    for (std::size_t j = 0; j < M_; ++j) {
      J = decay_[j + 1] * J + w0_[j + 1] * I_[j] + w1_[j + 1] * I_[j + 1];
      out[j + 1] = expB_[j + 1] + J;
    }
  }

  /// I_j of the last apply() call.
  const std::vector<double>& inner() const { return I_; }
  const std::vector<double>& rates() const { return bval_; }

 private:
  double T_;
  std::size_t M_;
  double h_;
  ScaleWeights weights_;
  std::vector<double> bval_, expB_, decay_, w0_, w1_;
  mutable std::vector<double> I_;
};

}  // namespace detail

struct ScaleOptions {
  std::size_t max_sweeps = 10'000;
};

/// Picard iteration of the scale-function fixed point from S^0 = e^{-int_0^t b}
/// until the sup-change drops below tol.
inline ScaleTable solve_scale(const RateFunction& b, const LifetimeKernel& K, double T, std::size_t M, double tol,
                              const ScaleOptions& opt = {}) {
  require(T > 0.0 && std::isfinite(T), Errc::domain, "solve_scale needs 0 < T < inf");
  require(M >= 16, Errc::domain, "solve_scale needs M >= 16");
  require(tol > 0.0, Errc::domain, "solve_scale needs tol > 0");
  const detail::ScaleOperator A(b, K, T, M);
  std::vector<double> S = A.no_birth(), next;
  S[0] = 1.0;
  ScaleTable table;
  table.T = T;
  table.M = M;
  table.h = A.h();
  table.tol = tol;
  double change = std::numeric_limits<double>::infinity();
  std::size_t sweep = 0;
  while (sweep < opt.max_sweeps) {
    A.apply(S, next);
    ++sweep;
    change = 0.0;
    for (std::size_t j = 0; j <= M; ++j) change = std::max(change, std::abs(next[j] - S[j]));
    S.swap(next);
    if (change < tol) break;
  }
  if (!(change < tol))
    throw Error(Errc::convergence, "solve_scale did not converge in " + std::to_string(opt.max_sweeps) +
                                       " sweeps; final sup-change " + std::to_string(change));
  A.apply(S, next);
  double residual = 0.0;
  for (std::size_t j = 0; j <= M; ++j) residual = std::max(residual, std::abs(next[j] - S[j]));
  table.values = std::move(S);
  table.sweeps = sweep;
  table.final_change = change;
  table.residual = residual;
  return table;
}

/// sup_j |S'(t_j) - b(t_j)(I_j - S(t_j))| over interior nodes, S' by central
/// differences: the integro-differential form S' = b (K S - S).
inline double scale_ode_residual(const ScaleTable& table, const RateFunction& b, const LifetimeKernel& K) {
  const detail::ScaleOperator A(b, K, table.T, table.M);
  std::vector<double> out;
  A.apply(table.values, out);
  const auto& I = A.inner();
  double r = 0.0;
  for (std::size_t j = 1; j + 1 <= table.M - 1; ++j) {
    const double d = (table.values[j + 1] - table.values[j - 1]) / (2.0 * table.h);
    r = std::max(r, std::abs(d - A.rates()[j] * (I[j] - table.values[j])));
  }
  return r;
}

/// (S_T(s) - S_T(t)) / S_T(s): probability that the contour started at t
/// reaches [T, inf) before [0, s].
inline double hitting_probability(const ScaleTable& table, double s, double t) {
  require(0.0 <= s && s <= t && t <= table.T, Errc::domain, "hitting_probability needs 0 <= s <= t <= T");
  const double Ss = table.at(s);
  require(Ss > 0.0, Errc::degenerate, "hitting_probability: S_T(s) = 0");
  return (Ss - table.at(t)) / Ss;
}

/// Markovian case K(t, du) = d(t+u) e^{-int_t^{t+u} d} du:
///   S_T(t) = (1 + int_t^T b(s) e^{-int_s^T (d-b)} ds) / (1 + int_0^T ...).
inline double scale_markov_closed_form(const RateFunction& b, const RateFunction& d, double T, double t) {
  require(0.0 <= t && t <= T, Errc::domain, "scale_markov_closed_form needs 0 <= t <= T");
  const auto* bc = std::get_if<ConstantRate>(&b.variant());
  const auto* dc = std::get_if<ConstantRate>(&d.variant());
  if (bc && dc) {
    const double bb = bc->beta, dd = dc->beta;
    if (bb == dd) return (1.0 + bb * (T - t)) / (1.0 + bb * T);
    return (dd - bb * std::exp((bb - dd) * (T - t))) / (dd - bb * std::exp((bb - dd) * T));
  }
  auto integrand = [&](double s) {
    return b(s) * std::exp(-(d.cumulative(s, T) - b.cumulative(s, T)));
  };
  const double tail = quad::integrate(integrand, t, T, 1e-12);
  const double head = quad::integrate(integrand, 0.0, t, 1e-12);
  return (1.0 + tail) / (1.0 + head + tail);
}

/// W(t) = (d - b e^{(b-d)t}) / (d - b), or 1 + b t when b = d.
inline double scale_W_constant(double b, double d, double t) {
  if (b == d) return 1.0 + b * t;
  return (d - b * std::exp((b - d) * t)) / (d - b);
}

struct ExtinctionOptions {
  double h = 0.01;        // fixed mesh width
  double T_start = 0.0;   // 0: max(4, 2 t0)
  double T_max = 64.0;
  std::size_t max_sweeps = 100'000;
};

struct ExtinctionResult {
  double value = 0.0;         // best estimate of P_{t0}(Ext)
  double last = 0.0;          // S_T(t0) at the largest T solved
  bool converged = false;     // successive T agreed within tol
  bool extrapolated = false;  // value is the geometric (Aitken) limit of the T sequence
  std::vector<double> T_values;
  std::vector<double> S_values;
  double functional_residual = 0.0;  // T = inf equation on the last table, S held at S_T(T-) beyond T
};

/// lim_T S_T(t0), approached from below along T = T_1, 2 T_1, 4 T_1, ...
inline ExtinctionResult extinction_probability(const RateFunction& b, const LifetimeKernel& K, double t0, double tol,
                                               const ExtinctionOptions& opt = {}) {
  require(t0 >= 0.0 && std::isfinite(t0), Errc::domain, "extinction_probability needs t0 >= 0");
  require(tol > 0.0, Errc::domain, "extinction_probability needs tol > 0");
  ExtinctionResult r;
  if (t0 == 0.0) {
    r.value = r.last = 1.0;
    r.converged = true;
    return r;
  }
  double T = opt.T_start > 0.0 ? opt.T_start : std::max(4.0, 2.0 * t0);
  T = std::ceil(T / opt.h) * opt.h;
  ScaleTable last;
  ScaleOptions so;
  so.max_sweeps = opt.max_sweeps;
  for (;;) {
    const auto M = static_cast<std::size_t>(std::llround(T / opt.h));
    last = solve_scale(b, K, T, M, std::min(1e-12, 0.01 * tol), so);
    const double v = last.at(t0);
    if (!r.S_values.empty() && v < r.S_values.back() - 1e-9)
      throw Error(Errc::consistency, "S_T(t0) decreased in T (" + std::to_string(r.S_values.back()) + " -> " +
                                         std::to_string(v) + ")");
    r.T_values.push_back(T);
    r.S_values.push_back(v);
    if (r.S_values.size() >= 2 && std::abs(v - r.S_values[r.S_values.size() - 2]) < tol) {
      r.converged = true;
      break;
    }
    if (2.0 * T > opt.T_max) break;
    T *= 2.0;
  }
  r.last = r.S_values.back();
  r.value = r.last;
  const std::size_t n = r.S_values.size();
  if (!r.converged && n >= 3) {
    const double d1 = r.S_values[n - 2] - r.S_values[n - 3];
    const double d2 = r.S_values[n - 1] - r.S_values[n - 2];
    if (d1 > 0.0 && d2 >= 0.0 && d2 < d1) {
      r.value = std::min(1.0, r.last + d2 * d2 / (d1 - d2));
      r.extrapolated = true;
    }
  }
  const detail::ScaleOperator A(b, K, last.T, last.M);
  std::vector<double> out;
  A.apply(last.values, out, last.left_limit());
  for (std::size_t j = 0; j <= last.M; ++j)
    r.functional_residual = std::max(r.functional_residual, std::abs(out[j] - last.values[j]));
  return r;
}

struct PopulationLaw {
  double p0 = 0.0;        // P_{t0}(Xi_t = 0)
  double q = 0.0;         // success parameter of the geometric law on {1, 2, ...}
  bool root_alive = false;  // t <= t0: the ancestor is still alive, p0 = 0 by convention
  double q_coarse = 0.0;  // S_t(t-) on the M mesh
  double q_fine = 0.0;    // on the 2M mesh

  /// P(Xi_t = k).
  double pmf(std::size_t k) const {
    if (k == 0) return p0;
    return (1.0 - p0) * q * std::pow(1.0 - q, static_cast<double>(k - 1));
  }
};

/// p0 = S_t(t0); q = S_t(t-), both Richardson-extrapolated over meshes M and 2M.
inline PopulationLaw population_law(const RateFunction& b, const LifetimeKernel& K, double t0, double t, double tol,
                                    std::size_t M = 1024) {
  require(t > 0.0 && t0 >= 0.0, Errc::domain, "population_law needs t > 0 and t0 >= 0");
  const ScaleTable coarse = solve_scale(b, K, t, M, tol);
  const ScaleTable fine = solve_scale(b, K, t, 2 * M, tol);
  PopulationLaw law;
  law.q_coarse = coarse.left_limit();
  law.q_fine = fine.left_limit();
  law.q = std::clamp((4.0 * law.q_fine - law.q_coarse) / 3.0, 0.0, 1.0);
  if (t <= t0) {
    law.root_alive = true;
    law.p0 = 0.0;
  } else {
    law.p0 = std::clamp((4.0 * fine.at(t0) - coarse.at(t0)) / 3.0, 0.0, 1.0);
  }
  return law;
}

inline void write_scale_csv(std::ostream& os, const ScaleTable& table) {
  os << "t,S\n";
  for (std::size_t j = 0; j <= table.M; ++j)
    os << format_double(table.grid(j)) << ',' << format_double(table.values[j]) << '\n';
}

}  // namespace istlab

#endif
