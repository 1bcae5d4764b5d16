#ifndef ISTLAB_CONTOUR_HPP
#define ISTLAB_CONTOUR_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "istlab/error.hpp"
#include "istlab/random.hpp"
#include "istlab/tree.hpp"

namespace istlab {

struct Jump {
  double s;     // path time
  double from;  // left limit
  double to;    // landing level
};

enum class Exit { Low, High, Neither };

struct ExitResult {
  Exit side = Exit::Neither;
  double s = 0.0;
};

/// Cadlag path descending at constant speed `slope` between upward jumps,
/// absorbed at 0. slope is 1 for contours and sqrt(n) for rescaled contours.
struct ContourPath {
  double x0 = 0.0;
  std::vector<Jump> jumps;
  std::optional<double> absorption;
  double horizon = 0.0;
  double slope = 1.0;

  /// Value at path time s, 0 <= s <= horizon.
  double value_at(double s) const {
    require(s >= 0.0 && s <= horizon, Errc::out_of_range, "path_value_at: s outside [0, horizon]");
    if (absorption && s >= *absorption) return 0.0;
    const auto it = std::upper_bound(jumps.begin(), jumps.end(), s, [](double v, const Jump& j) { return v < j.s; });
    const double base_s = it == jumps.begin() ? 0.0 : std::prev(it)->s;
    const double base_v = it == jumps.begin() ? x0 : std::prev(it)->to;
    return std::max(0.0, base_v - slope * (s - base_s));
  }

  /// Which barrier the path touches first. Reaching `low` while descending is
  /// Low; landing at or above `high` is High.
  ExitResult first_exit(double low, double high) const {
    require(low < high, Errc::ordering, "first_exit needs low < high");
    if (x0 <= low) return {Exit::Low, 0.0};
    if (x0 >= high) return {Exit::High, 0.0};
    double s0 = 0.0, v0 = x0;
    for (const auto& j : jumps) {
      if (j.from <= low) return {Exit::Low, s0 + (v0 - low) / slope};
      if (j.to >= high) return {Exit::High, j.s};
      s0 = j.s;
      v0 = j.to;
    }
    const double hit = s0 + (v0 - low) / slope;
    if (hit <= horizon) return {Exit::Low, hit};
    return {Exit::Neither, horizon};
  }

  /// Number of times the path reaches level t from below, counting the start:
  /// #{jumps with from < t <= to} + [x0 >= t].
  std::size_t upcrossing_count(double t) const {
    std::size_t n = x0 >= t ? 1 : 0;
    for (const auto& j : jumps) n += (j.from < t && t <= j.to);
    return n;
  }

  /// Total downward movement on [a, b].
  double negative_variation(double a, double b) const {
    require(0.0 <= a && a <= b && b <= horizon, Errc::out_of_range, "negative_variation: window outside [0, horizon]");
    const double end = absorption ? std::min(b, *absorption) : b;
    return slope * std::max(0.0, end - a);
  }

  double duration() const { return absorption ? *absorption : horizon; }
};

inline ExitResult first_exit(const ContourPath& p, double low, double high) { return p.first_exit(low, high); }
inline double path_value_at(const ContourPath& p, double s) { return p.value_at(s); }
inline std::size_t upcrossing_count(const ContourPath& p, double t) { return p.upcrossing_count(t); }
inline double negative_variation(const ContourPath& p, double a, double b) { return p.negative_variation(a, b); }

/// Exploration process of a finished tree: descend each life from its death
/// toward its birth; on reaching the birth level of an unvisited child
/// (latest-born first) jump up to the child's death and explore it.
inline ContourPath contour_of_tree(const ChronoTree& tree) {
  const auto& n = tree.nodes();
  const auto ch = tree.children();
  ContourPath path;
  path.x0 = n[0].death;
  path.jumps.reserve(n.size() - 1);
  struct Frame {
    std::size_t node;
    std::size_t remaining;  // children still to visit, taken from the back
  };
  std::vector<Frame> stack{{0, ch[0].size()}};
  double s = 0.0, level = n[0].death;
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.remaining == 0) {
      s += level - n[f.node].birth;
      level = n[f.node].birth;
      stack.pop_back();
      continue;
    }
    const std::size_t c = ch[f.node][--f.remaining];
    s += level - n[c].birth;
    path.jumps.push_back({s, n[c].birth, n[c].death});
    level = n[c].death;
    stack.push_back({c, ch[c].size()});
  }
  path.absorption = s;
  path.horizon = s;
  return path;
}

struct PdmpOptions {
  double cap = std::numeric_limits<double>::infinity();  // level T
  double horizon = std::numeric_limits<double>::infinity();
  std::size_t max_jumps = 10'000'000;
};

/// Outcome of run_pdmp.
struct PdmpEnd {
  double s = 0.0;      // time the run ended
  double value = 0.0;  // value at s
  bool absorbed = false;
  bool stopped = false;  // observer asked to stop
  std::size_t jumps = 0;
};

/// Simulates the contour PDMP from x0. At level x the next jump happens at
/// level y < x with P(no jump down to y) = exp(-int_y^x b); the landing level
/// is (y + xi) ^ cap with xi ~ K(y, .). observer(const Jump&) is called at
/// every jump and may return false to end the run.
template <class Rate, class Kernel, class Observer>
PdmpEnd run_pdmp(const Rate& b, const Kernel& K, double x0, Rng& rng, const PdmpOptions& opt, Observer&& observer) {
  require(x0 >= 0.0 && std::isfinite(x0), Errc::domain, "simulate_pdmp needs a finite x0 >= 0");
  require(x0 <= opt.cap, Errc::domain, "simulate_pdmp needs x0 <= T");
  double s = 0.0, x = x0;
  std::size_t count = 0;
  for (;;) {
    const std::optional<double> y = x > 0.0 ? b.invert_backward(x, standard_exponential(rng)) : std::nullopt;
    if (!y) {
      if (s + x <= opt.horizon) return {s + x, 0.0, true, false, count};
      return {opt.horizon, x - (opt.horizon - s), false, false, count};
    }
    const double sj = s + (x - *y);
    if (sj > opt.horizon) return {opt.horizon, x - (opt.horizon - s), false, false, count};
    const double to = std::min(*y + K.sample(*y, rng), opt.cap);
    require(++count <= opt.max_jumps, Errc::explosion,
            "more than " + std::to_string(opt.max_jumps) + " jumps before the horizon");
    s = sj;
    x = to;
    if (!observer(Jump{sj, *y, to})) return {s, x, false, true, count};
  }
}

/// Full path of the PDMP up to absorption or horizon.
template <class Rate, class Kernel>
ContourPath simulate_pdmp(const Rate& b, const Kernel& K, double x0, Rng& rng, const PdmpOptions& opt = {}) {
  ContourPath path;
  path.x0 = x0;
  const PdmpEnd end = run_pdmp(b, K, x0, rng, opt, [&](const Jump& j) {
    path.jumps.push_back(j);
    return true;
  });
  if (end.absorbed) path.absorption = end.s;
  path.horizon = std::isfinite(opt.horizon) ? opt.horizon : end.s;
  return path;
}

template <class Rate, class Kernel>
ContourPath simulate_pdmp(const Rate& b, const Kernel& K, double x0, std::uint64_t seed, const PdmpOptions& opt = {}) {
  Rng rng(seed);
  return simulate_pdmp(b, K, x0, rng, opt);
}

struct GeneratorResidual {
  double estimate = 0.0;   // (E_x f(X_h) - f(x)) / h
  double generator = 0.0;  // L^(T) f(x)
  double residual = 0.0;   // |estimate - generator|
  double std_error = 0.0;  // Monte Carlo standard error of estimate
};

/// L^(T) f(x) = -f'(x) + b(x) int (f((x+y) ^ T) - f(x)) K(x, dy), with f'
/// from a five-point stencil.
template <class Rate, class Kernel, class F>
double generator_value(const Rate& b, const Kernel& K, double T, F&& f, double x) {
  const double e = 1e-3 * std::max(1.0, std::abs(x));
  const double df = (f(x - 2 * e) - 8 * f(x - e) + 8 * f(x + e) - f(x + 2 * e)) / (12 * e);
  const double fx = f(x);
  const double cut[] = {T - x};
  const double jump =
      std::isfinite(T) ? K.expect(x, [&](double y) { return f(std::min(x + y, T)) - fx; }, std::span<const double>(cut))
                       : K.expect(x, [&](double y) { return f(x + y) - fx; });
  return -df + b(x) * jump;
}

/// Monte Carlo check of the generator: compares the one-step difference
/// quotient over N replicas against L^(T) f(x).
template <class Rate, class Kernel, class F>
GeneratorResidual generator_residual(const Rate& b, const Kernel& K, double T, F&& f, double x, double h,
                                     std::size_t N, std::uint64_t seed) {
  require(h > 0.0 && N >= 2, Errc::domain, "generator_residual needs h > 0 and N >= 2");
  const double fx = f(x);
  PdmpOptions opt;
  opt.cap = T;
  opt.horizon = h;
  const auto q = replicate<double>(N, seed, [&](std::size_t, Rng& rng) {
    const PdmpEnd end = run_pdmp(b, K, x, rng, opt, [](const Jump&) { return true; });
    return (f(end.value) - fx) / h;
  });
  double mean = 0.0, m2 = 0.0;
  for (std::size_t i = 0; i < N; ++i) {
    const double d = q[i] - mean;
    mean += d / static_cast<double>(i + 1);
    m2 += d * (q[i] - mean);
  }
  GeneratorResidual r;
  r.estimate = mean;
  r.generator = generator_value(b, K, T, f, x);
  r.residual = std::abs(mean - r.generator);
  r.std_error = std::sqrt(m2 / static_cast<double>(N - 1) / static_cast<double>(N));
  return r;
}

/// CSV (s, value, event). A jump is two rows at the same s: the left limit,
/// then the landing level. A path that ends unabsorbed closes with a
/// `horizon` row.
inline void write_path_csv(std::ostream& os, const ContourPath& p) {
  os << "s,value,event\n";
  os << format_double(0.0) << ',' << format_double(p.x0) << ",start\n";
  for (const auto& j : p.jumps) {
    os << format_double(j.s) << ',' << format_double(j.from) << ",jump\n";
    os << format_double(j.s) << ',' << format_double(j.to) << ",jump\n";
  }
  if (p.absorption)
    os << format_double(*p.absorption) << ',' << format_double(0.0) << ",absorb\n";
  if (!p.absorption || p.horizon > *p.absorption)
    os << format_double(p.horizon) << ',' << format_double(p.value_at(p.horizon)) << ",horizon\n";
}

inline ContourPath read_path_csv(std::istream& is, double slope = 1.0) {
  std::string line;
  require(static_cast<bool>(std::getline(is, line)) && line == "s,value,event", Errc::io,
          "path csv header must be s,value,event");
  ContourPath p;
  p.slope = slope;
  std::optional<Jump> pending;
  bool started = false;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string a, v, e;
    require(std::getline(ss, a, ',') && std::getline(ss, v, ',') && std::getline(ss, e), Errc::io,
            "path csv: expected 3 fields");
    const double s = std::stod(a), value = std::stod(v);
    if (e == "start") {
      p.x0 = value;
      started = true;
    } else if (e == "jump") {
      if (!pending) {
        pending = Jump{s, value, 0.0};
      } else {
        require(pending->s == s, Errc::io, "path csv: unpaired jump rows");
        pending->to = value;
        p.jumps.push_back(*pending);
        pending.reset();
      }
    } else if (e == "absorb") {
      p.absorption = s;
      p.horizon = s;
    } else if (e == "horizon") {
      p.horizon = s;
    } else {
      throw Error(Errc::io, "path csv: unknown event '" + e + "'");
    }
  }
  require(started && !pending, Errc::io, "path csv: missing start row or dangling jump");
  return p;
}

}  // namespace istlab

#endif
