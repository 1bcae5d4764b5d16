#ifndef ISTLAB_CONDITIONING_HPP
#define ISTLAB_CONDITIONING_HPP

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <limits>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include "istlab/contour.hpp"
#include "istlab/error.hpp"
#include "istlab/kernel.hpp"
#include "istlab/random.hpp"
#include "istlab/rate.hpp"
#include "istlab/scale.hpp"

namespace istlab {

enum class ConditionEvent { Ext, ExtC, HeightLE, HeightGT };

constexpr const char* condition_event_name(ConditionEvent e) {
  switch (e) {
    case ConditionEvent::Ext: return "Ext";
    case ConditionEvent::ExtC: return "ExtC";
    case ConditionEvent::HeightLE: return "HeightLE";
    case ConditionEvent::HeightGT: return "HeightGT";
  }
  return "?";
}

/// S on [0, X] as the limit in T of S_T: solves S_T for T = 2X, 4X, ... until
/// the restriction to [0, X] moves by less than tol.
inline ScaleTable limit_scale_table(const RateFunction& b, const LifetimeKernel& K, double X, double h, double tol,
                                    double T_max = 128.0) {
  require(X > 0.0 && h > 0.0 && tol > 0.0, Errc::domain, "limit_scale_table needs X, h, tol > 0");
  const auto Mx = static_cast<std::size_t>(std::llround(X / h));
  require(Mx >= 16, Errc::domain, "limit_scale_table needs X / h >= 16");
  ScaleTable out;
  out.T = static_cast<double>(Mx) * h;
  out.M = Mx;
  out.h = h;
  std::vector<double> prev;
  for (double T = 2.0 * out.T;; T *= 2.0) {
    const ScaleTable full = solve_scale(b, K, T, 2 * static_cast<std::size_t>(std::llround(T / (2.0 * h))),
                                        std::min(1e-12, 0.01 * tol));
    std::vector<double> cur(full.values.begin(), full.values.begin() + static_cast<std::ptrdiff_t>(Mx + 1));
    double change = std::numeric_limits<double>::infinity();
    if (!prev.empty()) {
      change = 0.0;
      for (std::size_t j = 0; j <= Mx; ++j) change = std::max(change, std::abs(cur[j] - prev[j]));
    }
    prev = std::move(cur);
    out.sweeps = full.sweeps;
    out.residual = full.residual;
    out.final_change = change;
    if (change < tol) break;
    require(2.0 * T <= T_max, Errc::convergence,
            "limit_scale_table: S_T on [0, X] still moving by " + std::to_string(change) + " at T = " + std::to_string(T));
  }
  out.values = std::move(prev);
  out.tol = tol;
  return out;
}

/// The harmonic function h of a conditioning event, built from a grid table
/// with linear interpolation. For Ext/ExtC the table is S on [0, X] and is
/// continued beyond X by a log-linear fit on the last tenth of the grid; for
/// HeightLE/HeightGT it is S_T, which vanishes from T on.
class Harmonic {
 public:
  Harmonic() = default;
  Harmonic(const ScaleTable& table, ConditionEvent event) : event_(event), X_(table.T), dx_(table.h), s_(table.values) {
    const bool limit = event == ConditionEvent::Ext || event == ConditionEvent::ExtC;
    if (limit) {
      const std::size_t M = table.M, first = M - std::max<std::size_t>(2, M / 10);
      double mx = 0, my = 0, n = 0;
      bool positive = true;
      for (std::size_t j = first; j <= M; ++j) positive &= s_[j] > 0.0;
      if (positive) {
        for (std::size_t j = first; j <= M; ++j) mx += table.grid(j), my += std::log(s_[j]), n += 1;
        mx /= n, my /= n;
        double sxy = 0, sxx = 0;
        for (std::size_t j = first; j <= M; ++j) {
          const double dxj = table.grid(j) - mx;
          sxy += dxj * (std::log(s_[j]) - my);
          sxx += dxj * dxj;
        }
        tail_c_ = std::min(0.0, sxy / sxx);
        tail_a_ = my - tail_c_ * mx;
        for (std::size_t j = first; j <= M; ++j)
          fit_error_ = std::max(fit_error_, std::abs(std::exp(tail_a_ + tail_c_ * table.grid(j)) - s_[j]));
        // continue from the last node so h stays continuous at X
        tail_a_ = std::log(s_[M]) - tail_c_ * X_;
      } else {
        tail_a_ = -std::numeric_limits<double>::infinity();
      }
    }
    values_.resize(s_.size());
    for (std::size_t j = 0; j < s_.size(); ++j) values_[j] = from_s(s_[j]);
    suffix_.resize(values_.size());
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t j = values_.size(); j-- > 0;) suffix_[j] = m = std::max(m, values_[j]);
  }

  ConditionEvent event() const { return event_; }
  double extent() const { return X_; }
  double mesh() const { return dx_; }
  const std::vector<double>& values() const { return values_; }
  /// Max deviation of the log-linear tail model on the points it was fitted to.
  double extrapolation_error() const { return fit_error_; }
  double tail_rate() const { return -tail_c_; }

  double operator()(double x) const {
    if (x < 0.0) x = 0.0;
    if (x >= X_) return beyond(x);
    const double u = x / dx_;
    const std::size_t j = std::min(static_cast<std::size_t>(u), values_.size() - 2);
    const double w = u - static_cast<double>(j);
    return values_[j] + w * (values_[j + 1] - values_[j]);
  }

  /// sup of h on [x, inf).
  double sup_from(double x) const {
    double m = (*this)(x);
    if (x < X_) {
      const std::size_t j = static_cast<std::size_t>(x / dx_) + 1;
      if (j < suffix_.size()) m = std::max(m, suffix_[j]);
    }
    return std::max(m, beyond_sup());
  }

 private:
  double from_s(double s) const {
    const bool one_minus = event_ == ConditionEvent::ExtC || event_ == ConditionEvent::HeightGT;
    return one_minus ? 1.0 - s : s;
  }

  double beyond(double x) const {
    switch (event_) {
      case ConditionEvent::Ext: return std::exp(tail_a_ + tail_c_ * x);
      case ConditionEvent::ExtC: return 1.0 - std::exp(tail_a_ + tail_c_ * x);
      case ConditionEvent::HeightLE: return 0.0;
      case ConditionEvent::HeightGT: return 1.0;
    }
    return 0.0;
  }

  double beyond_sup() const {
    switch (event_) {
      case ConditionEvent::Ext: return std::exp(tail_a_ + tail_c_ * X_);
      case ConditionEvent::ExtC: return tail_c_ < 0.0 ? 1.0 : 1.0 - std::exp(tail_a_);
      case ConditionEvent::HeightLE: return 0.0;
      case ConditionEvent::HeightGT: return 1.0;
    }
    return 0.0;
  }

  ConditionEvent event_ = ConditionEvent::Ext;
  double X_ = 0.0, dx_ = 1.0;
  std::vector<double> s_, values_, suffix_;
  double tail_a_ = 0.0, tail_c_ = 0.0, fit_error_ = 0.0;
};

/// K^h(x, dy) = h(x + y) K(x, dy) / (K h)(x), sampled by rejection against
/// K(x, .) with acceptance h(x + y) / sup_{z >= x} h(z).
class ConditionedKernel {
 public:
  ConditionedKernel() = default;
  ConditionedKernel(LifetimeKernel base, std::shared_ptr<const Harmonic> h, std::shared_ptr<const std::vector<double>> kh,
                    double dx, bool identity)
      : base_(std::move(base)), h_(std::move(h)), kh_(std::move(kh)), dx_(dx), identity_(identity),
        fallbacks_(std::make_shared<std::atomic<std::size_t>>(0)) {}

  const LifetimeKernel& base() const { return base_; }
  bool identity() const { return identity_; }
  std::size_t fallback_count() const { return fallbacks_ ? fallbacks_->load() : 0; }

  /// (K h)(x), interpolated on the grid.
  double kh(double x) const {
    const auto& v = *kh_;
    const double u = std::max(0.0, x) / dx_;
    const std::size_t j = static_cast<std::size_t>(u);
    if (j + 1 >= v.size()) return v.back();
    const double w = u - static_cast<double>(j);
    return v[j] + w * (v[j + 1] - v[j]);
  }

  double acceptance_rate(double x) const {
    const double s = h_->sup_from(x);
    return s > 0.0 ? kh(x) / s : 0.0;
  }

  double sample(double x, Rng& rng) const {
    if (identity_) return base_.sample(x, rng);
    if (auto a = base_.point_mass(x)) return *a;
    const double sup = h_->sup_from(x);
    if (sup > 0.0 && acceptance_rate(x) >= 1e-4) {
      for (int it = 0; it < 1'000'000; ++it) {
        const double y = base_.sample(x, rng);
        if (uniform_open(rng) * sup <= (*h_)(x + y)) return y;
      }
    }
    return sample_grid(x, rng);
  }

  template <class F>
  double expect(double x, F&& f, std::span<const double> cuts = {}) const {
    if (identity_) return base_.expect(x, std::forward<F>(f), cuts);
    const double num = base_.expect(x, [&](double y) { return f(y) * (*h_)(x + y); }, cuts);
    const double den = base_.expect(x, [&](double y) { return (*h_)(x + y); }, cuts);
    require(den > 0.0, Errc::degenerate, "conditioned kernel: K h vanishes");
    return num / den;
  }

  /// Split at the grid nodes of h, where it is only piecewise linear.
  double moment(double x, int p) const {
    std::vector<double> kinks;
    if (!identity_)
      for (double v = std::ceil(x / dx_) * dx_; v < h_->extent(); v += dx_)
        if (v > x) kinks.push_back(v - x);
    return expect(x, [p](double y) { return std::pow(y, p); }, kinks);
  }

 private:
  // Inverse CDF over cells of the base kernel weighted by h at the cell midpoint.
  double sample_grid(double x, Rng& rng) const {
    if (fallbacks_->fetch_add(1) == 0)
      std::fprintf(stderr, "warning: conditioned kernel acceptance below 1e-4 at x = %g; using grid inverse CDF\n", x);
    double vmax = base_.support_max(x);
    if (!std::isfinite(vmax)) {
      vmax = 1.0;
      while (base_.below(x, vmax).first < 1.0 - 1e-12 && vmax < 1e12) vmax *= 2.0;
    }
    const std::size_t n = 4096;
    const double w = vmax / static_cast<double>(n);
    std::vector<double> cum(n + 1, 0.0);
    double prev = 0.0;
    for (std::size_t k = 1; k <= n; ++k) {
      const double m = base_.below(x, static_cast<double>(k) * w).first;
      cum[k] = cum[k - 1] + (m - prev) * (*h_)(x + (static_cast<double>(k) - 0.5) * w);
      prev = m;
    }
    require(cum[n] > 0.0, Errc::degenerate, "conditioned kernel has no mass at x = " + std::to_string(x));
    const double u = uniform_open(rng) * cum[n];
    const std::size_t k = static_cast<std::size_t>(std::upper_bound(cum.begin(), cum.end(), u) - cum.begin());
    const std::size_t cell = std::clamp<std::size_t>(k, 1, n);
    const double frac = (u - cum[cell - 1]) / std::max(cum[cell] - cum[cell - 1], 1e-300);
    return (static_cast<double>(cell - 1) + std::clamp(frac, 0.0, 1.0)) * w;
  }

  LifetimeKernel base_;
  std::shared_ptr<const Harmonic> h_;
  std::shared_ptr<const std::vector<double>> kh_;
  double dx_ = 1.0;
  bool identity_ = false;
  std::shared_ptr<std::atomic<std::size_t>> fallbacks_;
};

struct ConditionedParams {
  ConditionEvent event = ConditionEvent::Ext;
  RateFunction base_rate;
  LifetimeKernel base_kernel;
  std::shared_ptr<const Harmonic> h;
  std::vector<double> grid;
  std::vector<double> kh;  // (K h)(x) on the grid
  RateFunction rate;       // b' = b K h / h, tabulated on the grid
  ConditionedKernel kernel;
  double x_min = 0.0;           // start-level floor for ExtC / HeightGT
  double normalization_error = 0.0;  // max |int K'(x, dy) - 1| over checked grid points
  bool identity = false;        // h constant: parameters returned unchanged
};

struct ConditionOptions {
  double x_min = 0.05;
  std::size_t normalization_points = 64;
};

/// Doob transform of (b, K) by the harmonic function of `event`:
/// Ext h = S, ExtC h = 1 - S, HeightLE h = S_T, HeightGT h = 1 - S_T.
/// `table` is S on [0, X] for Ext/ExtC and S_T for the height events.
inline ConditionedParams condition_params(const RateFunction& b, const LifetimeKernel& K, const ScaleTable& table,
                                          ConditionEvent event, const ConditionOptions& opt = {}) {
  require(table.M >= 2 && table.values.size() == table.M + 1, Errc::domain, "condition_params needs a solved table");
  ConditionedParams p;
  p.event = event;
  p.base_rate = b;
  p.base_kernel = K;
  auto h = std::make_shared<const Harmonic>(table, event);
  p.h = h;
  const std::size_t M = table.M;
  const double dx = table.h;
  p.grid.resize(M + 1);
  for (std::size_t j = 0; j <= M; ++j) p.grid[j] = table.grid(j);

  const bool one_minus = event == ConditionEvent::ExtC || event == ConditionEvent::HeightGT;
  if (one_minus) {
    require(opt.x_min > 0.0, Errc::domain, "conditioning on ExtC / HeightGT needs x_min > 0");
    p.x_min = opt.x_min;
  }
  const auto& hv = h->values();
  const bool constant_h =
      std::all_of(hv.begin(), hv.end(), [&](double v) { return std::abs(v - hv.front()) <= table.tol; }) &&
      hv.front() > 0.0 &&
      (event == ConditionEvent::Ext ? h->tail_rate() == 0.0 : event == ConditionEvent::ExtC && h->tail_rate() == 0.0);
  if (constant_h) {
    p.identity = true;
    p.rate = b;
    p.kh.assign(M + 1, hv.front());
    auto kh = std::make_shared<const std::vector<double>>(p.kh);
    p.kernel = ConditionedKernel(K, h, kh, dx, true);
    return p;
  }
  if (event == ConditionEvent::ExtC)
    require(*std::max_element(hv.begin(), hv.end()) > 1e-12, Errc::degenerate,
            "1 - S vanishes: the base is almost surely extinct, conditioning on survival is degenerate");
  if (event == ConditionEvent::HeightGT)
    require(std::all_of(hv.begin() + 1, hv.end(), [](double v) { return v > 0.0; }), Errc::degenerate,
            "HeightGT needs S_T(x) < 1 for x > 0");

  // K h on the grid: exact for piecewise-linear h on the cells inside [0, X],
  // quadrature against the tail model beyond.
  const bool homogeneous = !std::holds_alternative<TwoPointDeathKernel>(K.variant()) &&
                           (!std::holds_alternative<ExponentialKernel>(K.variant()) || K.constant_death_rate());
  std::vector<double> F, G;
  if (homogeneous) K.profile(0.0, dx, M, F, G);
  p.kh.assign(M + 1, 0.0);
  const double X = table.T;
  for (std::size_t j = 0; j <= M; ++j) {
    const double x = p.grid[j];
    const std::size_t n = M - j;
    std::vector<double> Fj, Gj;
    if (!homogeneous) K.profile(x, dx, n, Fj, Gj);
    const auto& FF = homogeneous ? F : Fj;
    const auto& GG = homogeneous ? G : Gj;
    double acc = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const double m = std::max(0.0, FF[k + 1] - FF[k]);
      if (m == 0.0) continue;
      const double frac = std::clamp((GG[k + 1] - GG[k] - static_cast<double>(k) * dx * m) / dx, 0.0, m);
      acc += (m - frac) * hv[j + k] + frac * hv[j + k + 1];
    }
    const double reach = X - x;
    switch (event) {
      case ConditionEvent::HeightLE: break;
      case ConditionEvent::HeightGT: acc += std::max(0.0, 1.0 - FF[n]); break;
      default: {
        const double cut[] = {reach};
        if (1.0 - FF[n] > 0.0)
          acc += K.expect(x, [&](double y) { return y >= reach ? (*h)(x + y) : 0.0; }, std::span<const double>(cut));
      }
    }
    p.kh[j] = acc;
  }

  // b' on the grid; below x_min, where h vanishes, it continues as c / x.
  std::vector<double> bprime(M + 1, 0.0);
  std::size_t first = 0;
  if (one_minus)
    while (first < M && p.grid[first] < opt.x_min) ++first;
  for (std::size_t j = first; j <= M; ++j) {
    const double hj = hv[j];
    if (hj <= 0.0) {
      require(event == ConditionEvent::HeightLE && j == M, Errc::degenerate,
              "h vanishes at x = " + std::to_string(p.grid[j]) + " inside the conditioning range");
      bprime[j] = bprime[j - 1];
      continue;
    }
    bprime[j] = b(p.grid[j]) * p.kh[j] / hj;
  }
  for (std::size_t j = 0; j < first; ++j) bprime[j] = bprime[first];
  p.rate = one_minus && first > 0 ? RateFunction::tabulated_with_pole(p.grid, bprime, p.grid[first])
                                   : RateFunction::tabulated(p.grid, bprime);
  auto kh = std::make_shared<const std::vector<double>>(p.kh);
  p.kernel = ConditionedKernel(K, h, kh, dx, false);

  // Normalization: int K'(x, dy) = (quadrature of h against K) / (tabulated K h).
  const std::size_t stride = std::max<std::size_t>(1, (M + 1) / std::max<std::size_t>(1, opt.normalization_points));
  std::vector<double> kinks;
  for (std::size_t j = first; j <= M; j += stride) {
    const double x = p.grid[j];
    if (p.kh[j] <= 1e-300) continue;
    kinks.clear();
    for (std::size_t k = j + 1; k <= M; ++k) kinks.push_back(p.grid[k] - x);
    const double num = K.expect(x, [&](double y) { return (*h)(x + y); }, kinks);
    p.normalization_error = std::max(p.normalization_error, std::abs(num / p.kh[j] - 1.0));
  }
  return p;
}

/// CSV (x, b', first three moments of K'(x, .)).
inline void write_conditioned_csv(std::ostream& os, const ConditionedParams& p, std::size_t stride = 1) {
  os << "x,rate,m1,m2,m3\n";
  for (std::size_t j = 0; j < p.grid.size(); j += std::max<std::size_t>(1, stride)) {
    const double x = p.grid[j];
    if (x < p.x_min || p.kh[j] <= 0.0) continue;
    os << format_double(x) << ',' << format_double(p.rate(x));
    for (int k = 1; k <= 3; ++k) {
      double m = std::numeric_limits<double>::quiet_NaN();
      try {
        m = p.kernel.moment(x, k);
      } catch (const Error&) {
      }
      os << ',' << format_double(m);
    }
    os << '\n';
  }
}

/// Per-path summaries used to compare conditioned and filtered simulations.
struct PathSummary {
  double length = 0.0;      // absorption time
  double height = 0.0;      // running max of the path
  double population = 0.0;  // upcrossings of the reference level
  bool absorbed = false;
  bool exceeded = false;    // landed at or above the barrier
  double final_value = 0.0;
};

struct SummaryOptions {
  double cap = std::numeric_limits<double>::infinity();
  double horizon = std::numeric_limits<double>::infinity();
  double barrier = std::numeric_limits<double>::infinity();  // stop once a jump lands >= barrier
  double level = 1.5;                                        // reference level for the population count
  std::size_t max_jumps = 10'000'000;
};

template <class Rate, class Kernel>
PathSummary summarize_pdmp(const Rate& b, const Kernel& K, double x0, Rng& rng, const SummaryOptions& opt) {
  PathSummary s;
  s.height = x0;
  s.population = x0 >= opt.level ? 1.0 : 0.0;
  PdmpOptions po;
  po.cap = opt.cap;
  po.horizon = opt.horizon;
  po.max_jumps = opt.max_jumps;
  const PdmpEnd end = run_pdmp(b, K, x0, rng, po, [&](const Jump& j) {
    s.height = std::max(s.height, j.to);
    s.population += (j.from < opt.level && opt.level <= j.to) ? 1.0 : 0.0;
    if (j.to >= opt.barrier) {
      s.exceeded = true;
      return false;
    }
    return true;
  });
  s.absorbed = end.absorbed;
  s.length = end.s;
  s.final_value = end.value;
  return s;
}

struct ConditionedReport {
  std::size_t N = 0;
  std::vector<PathSummary> paths;
  double absorbed_fraction = 0.0;
  std::vector<double> barriers;
  std::vector<double> absorbed_before_barrier;  // fraction absorbed before landing >= barrier, per barrier
  std::size_t violations = 0;    // ExtC / HeightGT: absorbed paths; HeightLE: landings >= T
  double below_eps_fraction = 0.0;  // value < x_min at the horizon
  std::size_t kernel_fallbacks = 0;
};

/// N PDMP paths under (b', K') from x0 (floored at x_min for ExtC / HeightGT).
inline ConditionedReport simulate_conditioned(const ConditionedParams& p, double x0, double T, double horizon,
                                              std::size_t N, std::uint64_t seed,
                                              std::vector<double> barriers = {5.0, 10.0, 20.0}, double level = 1.5) {
  require(x0 > 0.0 && N > 0, Errc::domain, "simulate_conditioned needs x0 > 0 and N > 0");
  const double start = std::max(x0, p.x_min);
  SummaryOptions so;
  so.cap = T;
  so.horizon = horizon;
  so.level = level;
  ConditionedReport r;
  r.N = N;
  r.barriers = barriers;
  r.paths = replicate<PathSummary>(N, seed, [&](std::size_t, Rng& rng) {
    return summarize_pdmp(p.rate, p.kernel, start, rng, so);
  });
  std::size_t absorbed = 0, below = 0;
  for (const auto& s : r.paths) {
    absorbed += s.absorbed;
    below += s.absorbed || s.final_value < p.x_min;
  }
  r.absorbed_fraction = static_cast<double>(absorbed) / static_cast<double>(N);
  r.below_eps_fraction = static_cast<double>(below) / static_cast<double>(N);
  for (double B : barriers) {
    std::size_t ok = 0;
    for (const auto& s : r.paths) ok += s.absorbed && s.height < B;
    r.absorbed_before_barrier.push_back(static_cast<double>(ok) / static_cast<double>(N));
  }
  switch (p.event) {
    case ConditionEvent::ExtC:
    case ConditionEvent::HeightGT: r.violations = absorbed; break;
    case ConditionEvent::HeightLE:
      for (const auto& s : r.paths) r.violations += s.height >= p.h->extent();
      break;
    case ConditionEvent::Ext: break;
  }
  r.kernel_fallbacks = p.kernel.fallback_count();
  return r;
}

}  // namespace istlab

#endif
