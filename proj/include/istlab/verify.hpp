#ifndef ISTLAB_VERIFY_HPP
#define ISTLAB_VERIFY_HPP

// Acceptance checks. Every tolerance is pinned here; each check returns one
// pass/fail line with the measured numbers.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "istlab/conditioning.hpp"
#include "istlab/contour.hpp"
#include "istlab/criticality.hpp"
#include "istlab/runner.hpp"
#include "istlab/scale.hpp"
#include "istlab/scaling.hpp"
#include "istlab/stats.hpp"
#include "istlab/tree.hpp"

namespace istlab::verify {

struct Result {
  int id = 0;
  std::string name;
  bool pass = false;
  std::string detail;
  double seconds = 0.0;
};

struct Options {
  std::uint64_t seed = 1;
  std::filesystem::path scratch = std::filesystem::temp_directory_path() / "istlab-verify";
};

namespace detail {

class Stopwatch {
 public:
  double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count(); }

 private:
  std::chrono::steady_clock::time_point t0_ = std::chrono::steady_clock::now();
};

inline std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", x);
  return buf;
}

inline std::string verdict(bool ok) { return ok ? "ok" : "FAIL"; }

}  // namespace detail

using detail::fmt;

/// solve_scale against the constant-coefficient Markovian formula.
inline Result closed_form_scale(const Options&) {
  Result r{1, "closed-form scale oracle", false, {}, 0.0};
  detail::Stopwatch sw;
  const double b = 1.0, d = 2.0, T = 1.0;
  const auto tab = solve_scale(RateFunction::constant(b), LifetimeKernel::exponential(d), T, 512, 1e-10);
  const double secs = sw.seconds();
  double err = 0.0;
  for (std::size_t j = 0; j <= tab.M; ++j) {
    const double t = tab.grid(j);
    const double exact = (d - b * std::exp((b - d) * (T - t))) / (d - b * std::exp((b - d) * T));
    err = std::max(err, std::abs(tab.values[j] - exact));
  }
  r.pass = err < 5e-5 && secs < 5.0;
  r.detail = "max error " + fmt(err) + " (< 5e-05), " + fmt(secs) + " s (< 5)";
  r.seconds = sw.seconds();
  return r;
}

/// Time-varying birth rate, Markovian lifetimes: solver against the
/// quadrature-evaluated ratio.
inline Result markov_time_varying(const Options&) {
  Result r{2, "time-varying Markovian oracle", false, {}, 0.0};
  detail::Stopwatch sw;
  const auto b = RateFunction::sinusoidal(1.0, 0.5);
  const auto d = RateFunction::constant(2.0);
  const double T = 2.0;
  const auto tab = solve_scale(b, LifetimeKernel::exponential(d), T, 1024, 1e-10);
  double err = 0.0;
  for (std::size_t j = 0; j <= tab.M; ++j)
    err = std::max(err, std::abs(tab.values[j] - scale_markov_closed_form(b, d, T, tab.grid(j))));
  r.pass = err < 2e-4;
  r.detail = "sup error " + fmt(err) + " (< 2e-04)";
  r.seconds = sw.seconds();
  return r;
}

inline Result periodic_constant(const Options&) {
  Result r{3, "periodic criticality constant", false, {}, 0.0};
  detail::Stopwatch sw;
  const double v = periodic_sup_phi(1.0, 0.0);
  const double secs = sw.seconds();
  r.pass = std::abs(v - 0.5072555) <= 1e-4 && secs < 1.0;
  char buf[96];
  std::snprintf(buf, sizeof buf, "sup = %.7f (target 0.5072555 +- 1e-4), %.3g s (< 1)", v, secs);
  r.detail = buf;
  r.seconds = secs;
  return r;
}

/// Tree contour and stand-alone PDMP have the same law; upcrossings of a level
/// count the individuals alive there.
inline Result law_equivalence(const Options& o) {
  Result r{4, "tree contour vs PDMP law", false, {}, 0.0};
  detail::Stopwatch sw;
  const auto b = RateFunction::constant(1.0);
  const auto K = LifetimeKernel::dirac(1.0);
  const double x0 = 2.0, T = 5.0;
  const std::size_t N = 10'000;
  struct Obs {
    double absorb, value;
  };
  auto value_at_one = [](const ContourPath& p) { return p.duration() >= 1.0 ? p.value_at(1.0) : 0.0; };
  const auto tree_obs = replicate<Obs>(N, replica_seed(o.seed, 40), [&](std::size_t i, Rng& rng) {
    const auto tree = simulate_tree(b, K, x0, T, rng, i);
    const auto p = contour_of_tree(tree);
    return Obs{p.duration(), value_at_one(p)};
  });
  PdmpOptions po;
  po.cap = T;
  const auto pdmp_obs = replicate<Obs>(N, replica_seed(o.seed, 41), [&](std::size_t, Rng& rng) {
    const auto p = simulate_pdmp(b, K, x0, rng, po);
    return Obs{p.duration(), value_at_one(p)};
  });
  std::vector<double> a1, a2, v1, v2;
  for (std::size_t i = 0; i < N; ++i) {
    a1.push_back(tree_obs[i].absorb), a2.push_back(pdmp_obs[i].absorb);
    v1.push_back(tree_obs[i].value), v2.push_back(pdmp_obs[i].value);
  }
  const double da = stats::ks_two_sample(a1, a2), dv = stats::ks_two_sample(v1, v2);
  const double pa = stats::ks_two_sample_pvalue(da, N, N), pv = stats::ks_two_sample_pvalue(dv, N, N);

  std::size_t mismatches = 0, checks = 0;
  std::vector<std::size_t> bad(1000, 0);
  parallel_for(1000, [&](std::size_t i) {
    const auto tree = simulate_tree(b, K, x0, T, replica_seed(o.seed ^ 0x5151, i));
    const auto p = contour_of_tree(tree);
    for (int k = 0; k < 20; ++k) {
      const double level = T * (k + 0.5) / 20.0;
      bad[i] += upcrossing_count(p, level) != population_at(tree, level);
    }
  });
  for (auto m : bad) mismatches += m;
  checks = 1000 * 20;
  const double secs = sw.seconds();
  r.pass = pa > 0.01 && pv > 0.01 && mismatches == 0 && secs < 60.0;
  r.detail = "KS absorption p = " + fmt(pa) + ", KS value(s=1) p = " + fmt(pv) + " (> 0.01); upcrossing mismatches " +
             std::to_string(mismatches) + "/" + std::to_string(checks) + "; " + fmt(secs) + " s (< 60)";
  r.seconds = secs;
  return r;
}

/// Two-barrier exit frequency against (S_T(s) - S_T(t)) / S_T(s).
inline Result hitting_formula(const Options& o) {
  Result r{5, "hitting-probability formula", false, {}, 0.0};
  detail::Stopwatch sw;
  const auto b = RateFunction::constant(1.0);
  const auto K = LifetimeKernel::exponential(2.0);
  const double T = 1.0;
  const auto tab = solve_scale(b, K, T, 1024, 1e-12);
  const std::pair<double, double> pairs[] = {{0.2, 0.6}, {0.1, 0.3}, {0.3, 0.9}, {0.05, 0.5}, {0.5, 0.8}};
  const std::size_t N = 100'000;
  bool ok = true;
  std::string det;
  for (std::size_t k = 0; k < 5; ++k) {
    const auto [s, t] = pairs[k];
    const double p = hitting_probability(tab, s, t);
    PdmpOptions po;
    po.cap = T;
    const auto high = replicate<char>(N, replica_seed(o.seed, 50 + k), [&](std::size_t, Rng& rng) {
      char hit = 0;
      run_pdmp(b, K, t, rng, po, [&](const Jump& j) {
        if (j.from <= s) return false;
        if (j.to >= T) {
          hit = 1;
          return false;
        }
        return true;
      });
      return hit;
    });
    double f = 0.0;
    for (char h : high) f += h;
    f /= static_cast<double>(N);
    const double se = std::sqrt(p * (1.0 - p) / static_cast<double>(N));
    const double z = std::abs(f - p) / se;
    ok &= z <= 3.0;
    det += "(" + fmt(s) + "," + fmt(t) + "): mc " + fmt(f) + " vs " + fmt(p) + " z=" + fmt(z) + "; ";
  }
  const double secs = sw.seconds();
  r.pass = ok && secs < 120.0;
  r.detail = det + "|z| <= 3, " + fmt(secs) + " s (< 120)";
  r.seconds = secs;
  return r;
}

inline Result population_gof(const Options& o) {
  Result r{6, "population law", false, {}, 0.0};
  detail::Stopwatch sw;
  const auto b = RateFunction::constant(2.0);
  const auto K = LifetimeKernel::exponential(1.0);
  const double t0 = 0.5, t = 3.0;
  const std::size_t N = 100'000, kmax = 200;
  const auto law = population_law(b, K, t0, t, 1e-10);
  const auto xi = replicate<std::size_t>(N, replica_seed(o.seed, 60), [&](std::size_t i, Rng& rng) {
    return population_at(simulate_tree(b, K, t0, t, rng, i), t);
  });
  std::vector<double> counts(kmax + 2, 0.0), probs(kmax + 2, 0.0);
  for (auto k : xi) counts[std::min(k, kmax + 1)] += 1.0;
  double acc = 0.0;
  for (std::size_t k = 0; k <= kmax; ++k) acc += probs[k] = law.pmf(k);
  probs[kmax + 1] = std::max(0.0, 1.0 - acc);
  const auto chi = stats::chi_square_gof(counts, probs);
  r.pass = chi.p_value > 0.01;
  r.detail = "p0 = " + fmt(law.p0) + ", q = " + fmt(law.q) + ", chi2 = " + fmt(chi.statistic) + " on " +
             std::to_string(chi.dof) + " dof, p = " + fmt(chi.p_value) + " (> 0.01)";
  r.seconds = sw.seconds();
  return r;
}

/// Extinction duality for b = 2, d = 1: P_t(Ext) = e^{-t}, and the
/// Ext-conditioned tree has b' = 1, d' = 2.
inline Result extinction_duality(const Options& o) {
  Result r{7, "extinction duality", false, {}, 0.0};
  detail::Stopwatch sw;
  const auto b = RateFunction::constant(2.0);
  const auto K = LifetimeKernel::exponential(1.0);
  double err = 0.0;
  for (double t0 : {0.5, 1.0, 2.0})
    err = std::max(err, std::abs(extinction_probability(b, K, t0, 1e-5).value - std::exp(-t0)));

  const auto table = limit_scale_table(b, K, 8.0, 0.01, 1e-10);
  const auto p = condition_params(b, K, table, ConditionEvent::Ext);
  const std::size_t N = 10'000;
  const auto ys = replicate<double>(N, replica_seed(o.seed, 70),
                                    [&](std::size_t, Rng& rng) { return p.kernel.sample(1.0, rng); });
  const double dk = stats::ks_one_sample(ys, [](double y) { return 1.0 - std::exp(-2.0 * y); });
  const double pk = stats::ks_pvalue(dk, static_cast<double>(N));

  const double x0 = 0.5;
  const auto cond = simulate_conditioned(p, x0, std::numeric_limits<double>::infinity(),
                                         std::numeric_limits<double>::infinity(), N, replica_seed(o.seed, 71));
  SummaryOptions so;
  so.barrier = 30.0;
  const auto base = replicate<PathSummary>(2 * N, replica_seed(o.seed, 72),
                                           [&](std::size_t, Rng& rng) { return summarize_pdmp(b, K, x0, rng, so); });
  std::vector<double> l1, h1, l2, h2;
  for (const auto& s : cond.paths) l1.push_back(s.length), h1.push_back(s.height);
  for (const auto& s : base)
    if (s.absorbed && !s.exceeded) l2.push_back(s.length), h2.push_back(s.height);
  const double dl = stats::ks_two_sample(l1, l2), dh = stats::ks_two_sample(h1, h2);
  const double pl = stats::ks_two_sample_pvalue(dl, l1.size(), l2.size());
  const double ph = stats::ks_two_sample_pvalue(dh, h1.size(), h2.size());
  r.pass = err < 1e-3 && pk > 0.01 && pl > 0.01 && ph > 0.01;
  r.detail = "max |P(Ext) - e^-t0| = " + fmt(err) + " (< 1e-3); kernel KS p = " + fmt(pk) +
             "; conditioned vs filtered (" + std::to_string(l2.size()) + " kept) length p = " + fmt(pl) +
             ", height p = " + fmt(ph) + " (> 0.01)";
  r.seconds = sw.seconds();
  return r;
}

inline Result drift_verdicts(const Options&) {
  Result r{8, "drift verdicts", false, {}, 0.0};
  detail::Stopwatch sw;
  std::vector<double> scan(64);
  for (std::size_t i = 0; i < scan.size(); ++i) scan[i] = std::pow(10.0, 4.0 * static_cast<double>(i) / 63.0);

  const auto one = RateFunction::constant(1.0);
  const auto pareto = LifetimeKernel::pareto(3.0);
  const auto sup = classify_asymptotic(one, pareto, scan);
  const double ext_sup = extinction_probability(one, pareto, 1.0, 1e-4).value;

  const auto half = RateFunction::constant(0.5);
  const auto dirac = LifetimeKernel::dirac(1.0);
  const auto sub = classify_asymptotic(half, dirac, scan);
  const double ext_sub = extinction_probability(half, dirac, 1.0, 1e-5).value;

  // Psi and PV - V for V = id agree; constant coefficients give
  // (b m - 1)(1 - e^{-b x}) / b.
  double gap = 0.0;
  for (auto [bb, d] : {std::pair{2.0, 1.0}, std::pair{0.5, 2.0}}) {
    const auto rate = RateFunction::constant(bb);
    const auto K = LifetimeKernel::exponential(d);
    const double dx = 0.05;
    const auto psi = integral_drift_profile(rate, [&](double) { return 1.0 / d; }, 4.0, dx);
    for (std::size_t i : {10u, 20u, 40u, 80u}) {
      const double x = static_cast<double>(i) * dx;
      const double closed = (bb / d - 1.0) * (1.0 - std::exp(-bb * x)) / bb;
      const double disc = discrete_drift(rate, K, [](double y) { return y; }, x);
      gap = std::max({gap, std::abs(psi[i] - disc), std::abs(psi[i] - closed), std::abs(disc - closed)});
    }
  }
  r.pass = sup.verdict == Verdict::SupercriticalSufficient && ext_sup < 0.95 &&
           sub.verdict == Verdict::SubcriticalSufficient && std::abs(ext_sub - 1.0) <= 1e-3 && gap < 1e-6;
  r.detail = std::string("Pareto(3), b=1: ") + verdict_name(sup.verdict) + ", P(Ext) = " + fmt(ext_sup) +
             " (< 0.95); b=0.5, Dirac(1): " + verdict_name(sub.verdict) + ", P(Ext) = " + fmt(ext_sub) +
             " (1 +- 1e-3); integral vs discrete drift gap " + fmt(gap) + " (< 1e-6)";
  r.seconds = sw.seconds();
  return r;
}

inline Result scaling_limit(const Options& o) {
  Result r{9, "Bessel scaling limit", false, {}, 0.0};
  detail::Stopwatch sw;
  const auto K = LifetimeKernel::dirac(1.0);
  bool ok = true;
  std::string det;
  for (double c : {0.0, 1.0}) {
    const auto b = RateFunction::asymptotically_critical(c);
    const auto rep = compare_scaling_limit({16.0, 64.0, 256.0}, b, K, c, 1.0, 0.5, 10'000,
                                           replica_seed(o.seed, 90 + static_cast<std::uint64_t>(c)));
    const auto run = simulate_rescaled(256.0, b, K, 1.0, 50.0, {}, 10'000,
                                       replica_seed(o.seed, 95 + static_cast<std::uint64_t>(c)));
    const bool absorb_ok = c <= 0.5 ? run.absorbed_fraction > 0.99 : run.absorbed_fraction < 0.9;
    ok &= rep.decreasing && rep.last_below_critical && absorb_ok;
    det += "c=" + fmt(c) + ": KS";
    for (const auto& e : rep.entries) det += " " + fmt(e.ks);
    const auto& last = rep.entries.back();
    det += " (decreasing " + detail::verdict(rep.decreasing) + "; n=256 crit " + fmt(last.critical_value) + " " +
           detail::verdict(rep.last_below_critical) + ", largest atom " + fmt(last.max_atom) +
           "); absorbed by 50: " + fmt(run.absorbed_fraction) + (c <= 0.5 ? " (> 0.99) " : " (< 0.9) ") +
           detail::verdict(absorb_ok) + "; ";
  }
  const double secs = sw.seconds();
  ok &= secs < 600.0;
  r.pass = ok;
  r.detail = det + fmt(secs) + " s (< 600)";
  r.seconds = secs;
  return r;
}

struct GeneratorCase {
  std::string name;
  std::function<double(double)> f;
};

/// Pinned generator-rate check: residual(h, N) <= 2 (h + N^{-1/2}) with
/// N = 10 / h^3 for h = 0.1, 0.05, 0.025, and the residual at the finest h
/// below the residual at the coarsest.
inline bool generator_rate_ok(const GeneratorCase& g, std::uint64_t seed, std::string& det) {
  const auto b = RateFunction::constant(1.0);
  const auto K = LifetimeKernel::exponential(2.0);
  const double T = 3.0, x = 1.0;
  std::vector<double> res;
  bool ok = true;
  int k = 0;
  for (double h : {0.1, 0.05, 0.025}) {
    const auto N = static_cast<std::size_t>(std::llround(10.0 / (h * h * h)));
    const auto gr = generator_residual(b, K, T, g.f, x, h, N, replica_seed(seed, static_cast<std::uint64_t>(k++)));
    ok &= gr.residual <= 2.0 * (h + 1.0 / std::sqrt(static_cast<double>(N)));
    res.push_back(gr.residual);
  }
  ok &= res.back() < res.front();
  det += g.name + " " + fmt(res[0]) + "/" + fmt(res[1]) + "/" + fmt(res[2]) + (ok ? "" : " FAIL") + "; ";
  return ok;
}

inline Result invariants(const Options& o) {
  Result r{10, "invariant suite", false, {}, 0.0};
  detail::Stopwatch sw;
  std::vector<std::string> failed;
  std::string det;

  // S_T: non-increasing in t, non-decreasing in T, fixed-point residual.
  {
    bool mono = true, resid = true;
    const double tol = 1e-10;
    for (auto [bb, d] : {std::pair{1.0, 2.0}, std::pair{2.0, 1.0}, std::pair{1.0, 1.0}}) {
      const auto b = RateFunction::constant(bb);
      const auto K = LifetimeKernel::exponential(d);
      std::vector<ScaleTable> tabs;
      for (double T : {1.0, 2.0, 4.0}) {
        tabs.push_back(solve_scale(b, K, T, static_cast<std::size_t>(256 * T), tol));
        const auto& v = tabs.back().values;
        for (std::size_t j = 1; j < v.size(); ++j) mono &= v[j] <= v[j - 1] + 1e-12;
        resid &= tabs.back().residual < 10.0 * tol;
      }
      for (std::size_t a = 0; a + 1 < tabs.size(); ++a)
        for (std::size_t j = 0; j < tabs[a].M; ++j) mono &= tabs[a].values[j] <= tabs[a + 1].values[j] + 1e-12;
    }
    if (!mono) failed.push_back("S_T monotonicity");
    if (!resid) failed.push_back("fixed-point residual");
  }

  // V_- on [a, b] equals f(a) - f(b) + sum of jump sizes in (a, b] and is at
  // most slope (b - a).
  {
    const auto b = RateFunction::constant(1.0);
    const auto K = LifetimeKernel::dirac(1.0);
    PdmpOptions po;
    po.cap = 5.0;
    std::vector<char> bad(1000, 0);
    parallel_for(1000, [&](std::size_t i) {
      Rng rng = replica_rng(o.seed ^ 0xA11CE, i);
      const double n = i % 2 ? 16.0 : 1.0;
      const ContourPath p = n == 1.0 ? simulate_pdmp(b, K, 2.0, rng, po)
                                     : simulate_rescaled_path(n, RateFunction::asymptotically_critical(1.0), K, 1.0,
                                                              2.0, rng);
      const double D = p.duration();
      for (int k = 0; k < 10; ++k) {
        double a = uniform_open(rng) * D, e = uniform_open(rng) * D;
        if (a > e) std::swap(a, e);
        double v = p.value_at(a) - p.value_at(e);
        for (const auto& j : p.jumps)
          if (j.s > a && j.s <= e) v += j.to - j.from;
        const double nv = p.negative_variation(a, e);
        if (nv > p.slope * (e - a) * (1.0 + 1e-12) || std::abs(nv - v) > 1e-9 * std::max(1.0, nv)) bad[i] = 1;
      }
    });
    if (std::count(bad.begin(), bad.end(), 1)) failed.push_back("negative variation");
  }

  // K^h integrates to one.
  {
    double worst = 0.0;
    const auto b2 = RateFunction::constant(2.0);
    const auto e1 = LifetimeKernel::exponential(1.0);
    const auto lim = limit_scale_table(b2, e1, 8.0, 0.01, 1e-10);
    worst = std::max(worst, condition_params(b2, e1, lim, ConditionEvent::Ext).normalization_error);
    worst = std::max(worst, condition_params(b2, e1, lim, ConditionEvent::ExtC).normalization_error);
    const auto b1 = RateFunction::constant(1.0);
    const auto e2 = LifetimeKernel::exponential(2.0);
    const auto st = solve_scale(b1, e2, 2.0, 200, 1e-12);
    worst = std::max(worst, condition_params(b1, e2, st, ConditionEvent::HeightLE).normalization_error);
    worst = std::max(worst, condition_params(b1, e2, st, ConditionEvent::HeightGT).normalization_error);
    if (!(worst < 1e-8)) failed.push_back("K^h normalization");
    det += "K^h normalization " + fmt(worst) + "; ";
  }

  // Generator residual rate.
  {
    const std::vector<GeneratorCase> cases = {
        {"x", [](double x) { return x; }},
        {"x^2", [](double x) { return x * x; }},
        {"sin", [](double x) { return std::sin(x); }},
        {"exp(-x)", [](double x) { return std::exp(-x); }},
        {"1/(1+x)", [](double x) { return 1.0 / (1.0 + x); }},
        {"cos(2x)", [](double x) { return std::cos(2.0 * x); }},
    };
    bool ok = true;
    det += "generator residuals ";
    for (std::size_t i = 0; i < cases.size(); ++i) ok &= generator_rate_ok(cases[i], replica_seed(o.seed, 100 + i), det);
    if (!ok) failed.push_back("generator residual rate");
  }

  // n = 1 rescaling reproduces the base simulator bit for bit.
  {
    const auto b = RateFunction::asymptotically_critical(1.0);
    const auto K = LifetimeKernel::dirac(1.0);
    bool same = true;
    for (std::uint64_t s = 0; s < 100; ++s) {
      Rng r1(replica_seed(o.seed, 200 + s)), r2(replica_seed(o.seed, 200 + s));
      const auto p = simulate_rescaled_path(1.0, b, K, 1.0, 20.0, r1);
      PdmpOptions po;
      po.horizon = 20.0;
      const auto q = simulate_pdmp(b, K, 1.0, r2, po);
      same &= p.jumps.size() == q.jumps.size() && p.absorption == q.absorption && p.horizon == q.horizon;
      for (std::size_t k = 0; same && k < p.jumps.size(); ++k)
        same &= p.jumps[k].s == q.jumps[k].s && p.jumps[k].from == q.jumps[k].from && p.jumps[k].to == q.jumps[k].to;
    }
    if (!same) failed.push_back("n=1 bit-exactness");
  }

  // Manifest replay gives identical artifacts, with a different thread count.
  {
    namespace fs = std::filesystem;
    const fs::path a = o.scratch / "run", bdir = o.scratch / "replay";
    fs::remove_all(a);
    fs::remove_all(bdir);
    const Json cfg = Json::parse(R"({"rate": {"type": "constant", "beta": 2}, "kernel": {"type": "exponential", "d": 1},
                                     "t0": 0.5, "t": 2, "replicas": 2000, "M": 256})");
    RunOptions ro;
    ro.seed = o.seed;
    ro.out = a;
    ro.quiet = true;
    const unsigned saved_threads = istlab::detail::thread_setting().load(), threads = thread_count();
    set_thread_count(1);
    const Json m1 = run("population", cfg, ro);
    set_thread_count(std::max(2u, threads));
    const Json saved = read_json_file((a / "manifest.json").string());
    RunOptions ro2 = ro;
    ro2.out = bdir;
    ro2.seed = saved["seed"].get<std::uint64_t>();
    const Json m2 = run(saved["subcommand"].get<std::string>(), saved["config"], ro2);
    set_thread_count(saved_threads);
    bool same = m1["artifacts"] == m2["artifacts"] && !m1["artifacts"].empty();
    for (const auto& [name, hash] : m2["artifacts"].items())
      same &= sha256_hex(read_file(a / name)) == hash.get<std::string>() &&
              sha256_hex(read_file(bdir / name)) == hash.get<std::string>();
    if (!same) failed.push_back("manifest determinism");
  }

  r.pass = failed.empty();
  std::string f;
  for (const auto& s : failed) f += (f.empty() ? "" : ", ") + s;
  r.detail = det + (failed.empty() ? "all invariants hold" : "failed: " + f);
  r.seconds = sw.seconds();
  return r;
}

using Check = Result (*)(const Options&);

inline const std::vector<Check>& checks() {
  static const std::vector<Check> all = {closed_form_scale, markov_time_varying, periodic_constant, law_equivalence,
                                         hitting_formula,   population_gof,      extinction_duality, drift_verdicts,
                                         scaling_limit,     invariants};
  return all;
}

inline Result run_check(int id, const Options& o) {
  require(id >= 1 && id <= static_cast<int>(checks().size()), Errc::usage, "no acceptance check " + std::to_string(id));
  return checks()[static_cast<std::size_t>(id - 1)](o);
}

inline std::string line(const Result& r) {
  return std::string(r.pass ? "PASS" : "FAIL") + " c" + std::to_string(r.id) + " " + r.name + ": " + r.detail;
}

}  // namespace istlab::verify

#endif
