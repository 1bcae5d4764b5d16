#ifndef ISTLAB_RUNNER_HPP
#define ISTLAB_RUNNER_HPP

// Batch workflows behind the command-line tool. Each subcommand reads a JSON
// block, writes its artifacts into an output directory and records a
// manifest from which the run can be replayed byte for byte.
//
// Link against istlab_digest for sha256_hex / read_file.

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "istlab/conditioning.hpp"
#include "istlab/contour.hpp"
#include "istlab/criticality.hpp"
#include "istlab/digest.hpp"
#include "istlab/error.hpp"
#include "istlab/io.hpp"
#include "istlab/model.hpp"
#include "istlab/random.hpp"
#include "istlab/scale.hpp"
#include "istlab/scaling.hpp"
#include "istlab/stats.hpp"
#include "istlab/tree.hpp"

#ifndef ISTLAB_VERSION
#define ISTLAB_VERSION "0.3.0"
#endif

namespace istlab {

inline constexpr const char* kManifestKind = "istlab-manifest";
inline constexpr std::uint64_t kDefaultSeed = 20240917;

enum class Format { Csv, Json };

struct RunOptions {
  std::uint64_t seed = kDefaultSeed;
  std::filesystem::path out = "out";
  Format format = Format::Csv;
  bool quiet = false;
};

/// Collects artifacts in memory; written and hashed by finish().
class RunContext {
 public:
  RunContext(std::string subcommand, RunOptions opt) : sub_(std::move(subcommand)), opt_(std::move(opt)) {}

  std::uint64_t seed() const { return opt_.seed; }
  Format format() const { return opt_.format; }
  const std::string& subcommand() const { return sub_; }

  /// Tabular artifact: `<stem>.csv` or `<stem>.json` depending on --format.
  void table(const std::string& stem, const Table& t) {
    if (opt_.format == Format::Csv) {
      std::ostringstream os;
      t.write_csv(os);
      put(stem + ".csv", os.str());
    } else {
      put(stem + ".json", dump_json(t.to_json()));
    }
  }

  void json(const std::string& stem, const Json& j) { put(stem + ".json", dump_json(j)); }

  /// One line for the terminal.
  void say(const std::string& line) {
    if (!opt_.quiet) std::cout << line << '\n';
  }

  const std::map<std::string, std::string>& artifacts() const { return files_; }

  /// Writes artifacts and the manifest; returns the manifest.
  Json finish(const Json& resolved) const {
    std::filesystem::create_directories(opt_.out);
    Json m = Json::object();
    m["kind"] = kManifestKind;
    m["version"] = ISTLAB_VERSION;
    m["subcommand"] = sub_;
    m["seed"] = opt_.seed;
    m["format"] = opt_.format == Format::Csv ? "csv" : "json";
    m["config"] = resolved;
    Json hashes = Json::object();
    for (const auto& [name, data] : files_) {
      std::ofstream os(opt_.out / name, std::ios::binary);
      require(static_cast<bool>(os), Errc::io, "cannot write " + (opt_.out / name).string());
      os << data;
      hashes[name] = sha256_hex(data);
    }
    m["artifacts"] = hashes;
    std::ofstream os(opt_.out / "manifest.json", std::ios::binary);
    require(static_cast<bool>(os), Errc::io, "cannot write manifest");
    os << dump_json(m);
    return m;
  }

 private:
  void put(const std::string& name, std::string data) {
    require(!files_.count(name), Errc::domain, "artifact " + name + " written twice");
    files_[name] = std::move(data);
  }

  std::string sub_;
  RunOptions opt_;
  std::map<std::string, std::string> files_;
};

namespace detail {

inline Model read_model(ConfigReader& cfg) {
  Model m{cfg.object("rate", parse_rate), cfg.object("kernel", parse_kernel)};
  return m;
}

inline std::vector<double> geometric_scan(double lo, double hi, std::size_t n) {
  std::vector<double> s(n);
  for (std::size_t i = 0; i < n; ++i)
    s[i] = lo * std::pow(hi / lo, static_cast<double>(i) / static_cast<double>(n - 1));
  return s;
}

inline void cmd_tree(ConfigReader& cfg, RunContext& ctx) {
  const Model m = read_model(cfg);
  const double x0 = cfg.number("x0");
  const double T = cfg.number("T");
  const std::size_t R = cfg.count("replicas", 1);
  const std::size_t max_nodes = cfg.count("max_nodes", 10'000'000);
  require(R >= 1, Errc::usage, "config: .replicas must be >= 1");
  TreeOptions to;
  to.max_nodes = max_nodes;
  Table summary;
  summary.columns = {"replica", "nodes", "length", "height"};
  std::vector<ChronoTree> trees(R);
  parallel_for(R, [&](std::size_t i) {
    const std::uint64_t s = replica_seed(ctx.seed(), i);
    trees[i] = simulate_tree(m.b, m.K, x0, T, s, to);
  });
  for (std::size_t i = 0; i < R; ++i)
    summary.add({cell(i), cell(trees[i].size()), cell(tree_length(trees[i])), cell(tree_height(trees[i]))});
  std::ostringstream os;
  write_tree_csv(os, trees[0]);
  Table t = table_from_csv(os.str());
  t.text_columns = {"label", "parent"};
  ctx.table("tree", t);
  ctx.table("trees", summary);
  ctx.say("tree: " + std::to_string(trees[0].size()) + " individuals, length " + format_double(tree_length(trees[0])));
}

inline void cmd_contour(ConfigReader& cfg, RunContext& ctx) {
  const Model m = read_model(cfg);
  const std::string source = cfg.choice("source", {"tree", "pdmp"}, "pdmp");
  const double x0 = cfg.number("x0");
  const double T = cfg.number("T", std::numeric_limits<double>::infinity());
  const double horizon = cfg.number("horizon", std::numeric_limits<double>::infinity());
  const std::size_t max_jumps = cfg.count("max_jumps", 10'000'000);
  ContourPath path;
  if (source == "tree") {
    require(std::isfinite(T), Errc::usage, "config: .T must be finite for source = tree");
    const auto tree = simulate_tree(m.b, m.K, x0, T, ctx.seed());
    path = contour_of_tree(tree);
  } else {
    PdmpOptions po;
    po.cap = T;
    po.horizon = horizon;
    po.max_jumps = max_jumps;
    path = simulate_pdmp(m.b, m.K, x0, ctx.seed(), po);
  }
  std::ostringstream os;
  write_path_csv(os, path);
  Table t = table_from_csv(os.str());
  t.text_columns = {"event"};
  ctx.table("path", t);
  Json j = Json::object();
  j["jumps"] = path.jumps.size();
  j["absorbed"] = path.absorption.has_value();
  j["duration"] = path.duration();
  ctx.json("contour", j);
  ctx.say("contour: " + std::to_string(path.jumps.size()) + " jumps, " +
          (path.absorption ? "absorbed at " + format_double(*path.absorption) : std::string("not absorbed")));
}

inline void cmd_scale(ConfigReader& cfg, RunContext& ctx) {
  const Model m = read_model(cfg);
  const double T = cfg.number("T");
  const std::size_t M = cfg.count("M", 1024);
  const double tol = cfg.number("tol", 1e-10);
  const auto table = solve_scale(m.b, m.K, T, M, tol);
  std::ostringstream os;
  write_scale_csv(os, table);
  ctx.table("scale", table_from_csv(os.str()));
  Json j = Json::object();
  j["T"] = table.T;
  j["M"] = table.M;
  j["sweeps"] = table.sweeps;
  j["final_change"] = table.final_change;
  j["residual"] = table.residual;
  j["ode_residual"] = scale_ode_residual(table, m.b, m.K);
  ctx.json("scale_report", j);
  ctx.say("scale: " + std::to_string(table.sweeps) + " sweeps, residual " + format_double(table.residual));
}

inline void cmd_extinction(ConfigReader& cfg, RunContext& ctx) {
  const Model m = read_model(cfg);
  const auto t0s = cfg.numbers("t0");
  const double tol = cfg.number("tol", 1e-6);
  ExtinctionOptions eo;
  eo.h = cfg.number("h", eo.h);
  eo.T_max = cfg.number("T_max", eo.T_max);
  Table t;
  t.columns = {"t0", "value", "last", "converged", "extrapolated", "functional_residual"};
  for (double t0 : t0s) {
    const auto r = extinction_probability(m.b, m.K, t0, tol, eo);
    t.add({cell(t0), cell(r.value), cell(r.last), cell(r.converged), cell(r.extrapolated), cell(r.functional_residual)});
    ctx.say("extinction: t0 = " + format_double(t0) + " -> " + format_double(r.value));
  }
  ctx.table("extinction", t);
}

inline void cmd_population(ConfigReader& cfg, RunContext& ctx) {
  const Model m = read_model(cfg);
  const double t0 = cfg.number("t0");
  const double t = cfg.number("t");
  const double tol = cfg.number("tol", 1e-10);
  const std::size_t M = cfg.count("M", 1024);
  const std::size_t R = cfg.count("replicas", 0);
  const std::size_t kmax = cfg.count("kmax", 30);
  const auto law = population_law(m.b, m.K, t0, t, tol, M);
  std::vector<double> counts(kmax + 2, 0.0);
  if (R > 0) {
    const auto xi = replicate<std::size_t>(R, ctx.seed(), [&](std::size_t i, Rng& rng) {
      const auto tree = simulate_tree(m.b, m.K, t0, t, rng, replica_seed(ctx.seed(), i));
      return population_at(tree, t);
    });
    for (auto k : xi) counts[std::min(k, kmax + 1)] += 1.0;
  }
  Table tab;
  tab.columns = {"k", "pmf", "empirical"};
  std::vector<double> probs(kmax + 2, 0.0);
  double acc = 0.0;
  for (std::size_t k = 0; k <= kmax; ++k) {
    probs[k] = law.pmf(k);
    acc += probs[k];
    tab.add({cell(k), cell(probs[k]), R ? cell(counts[k] / static_cast<double>(R)) : std::string()});
  }
  probs[kmax + 1] = std::max(0.0, 1.0 - acc);
  Json j = Json::object();
  j["p0"] = law.p0;
  j["q"] = law.q;
  j["root_alive"] = law.root_alive;
  j["q_coarse"] = law.q_coarse;
  j["q_fine"] = law.q_fine;
  if (R > 0) {
    const auto chi = stats::chi_square_gof(counts, probs);
    j["replicas"] = R;
    j["chi_square"] = chi.statistic;
    j["dof"] = chi.dof;
    j["p_value"] = chi.p_value;
  }
  ctx.table("population", tab);
  ctx.json("population_report", j);
  ctx.say("population: p0 = " + format_double(law.p0) + ", q = " + format_double(law.q));
}

inline void cmd_classify(ConfigReader& cfg, RunContext& ctx) {
  const Model m = read_model(cfg);
  const auto scan = cfg.numbers("scan", geometric_scan(1.0, 1e4, 64));
  const double x_max = cfg.number("integral_x_max", 0.0);
  const double mesh = cfg.number("integral_mesh", 0.05);
  auto r = classify_asymptotic(m.b, m.K, scan);
  if (x_max > 0.0) r.integral_condition_value = integral_drift_scan(m.b, m.K, x_max, mesh);
  Table t;
  t.columns = {"x", "b_m", "b_m2_over_x"};
  for (std::size_t i = 0; i < r.scan.size(); ++i) t.add({cell(r.scan[i]), cell(r.drift[i]), cell(r.second[i])});
  Json j = Json::object();
  j["verdict"] = verdict_name(r.verdict);
  j["reason"] = r.reason;
  j["limsup"] = r.limsup;
  j["liminf"] = r.liminf;
  j["second_moment_check"] = std::isfinite(r.second_moment_check) ? Json(r.second_moment_check) : Json("inf");
  j["stabilization"] = r.stabilization;
  j["stabilized"] = r.stabilized;
  if (x_max > 0.0) j["integral_condition"] = r.integral_condition_value;
  ctx.table("drift", t);
  ctx.json("classify", j);
  ctx.say(std::string("classify: ") + verdict_name(r.verdict) + " (" + r.reason + ")");
}

inline void cmd_tails(ConfigReader& cfg, RunContext& ctx) {
  const Model m = read_model(cfg);
  const double x0 = cfg.number("x0");
  const double T = cfg.number("T");
  const std::size_t N = cfg.count("N", 10'000);
  const auto thresholds = cfg.numbers("thresholds");
  TailOptions to;
  to.max_length = cfg.number("max_length", to.max_length);
  const auto r = length_tail_estimate(m.b, m.K, x0, T, N, thresholds, ctx.seed(), to);
  Table t;
  t.columns = {"threshold", "estimate", "ci_low", "ci_high", "bound"};
  for (const auto& p : r.points)
    t.add({cell(p.threshold), cell(p.estimate), cell(p.ci_low), cell(p.ci_high),
           std::isnan(p.bound_value) ? std::string() : cell(p.bound_value)});
  auto num = [](double x) { return std::isfinite(x) ? Json(x) : Json(nullptr); };
  Json j = Json::object();
  j["replicas"] = r.replicas;
  j["censored"] = r.censored;
  j["decay_rate"] = num(r.decay_rate);
  j["decay_intercept"] = num(r.decay_intercept);
  j["heavy_tail"] = r.heavy_tail;
  j["fitted_constant"] = num(r.fitted_constant);
  j["envelope_order"] = r.envelope_order;
  ctx.table("tails", t);
  ctx.json("tails_report", j);
  ctx.say("tails: " + std::to_string(r.points.size()) + " thresholds, " + std::to_string(r.censored) + " censored");
}

inline ConditionEvent parse_event(const std::string& s) {
  if (s == "Ext") return ConditionEvent::Ext;
  if (s == "ExtC") return ConditionEvent::ExtC;
  if (s == "HeightLE") return ConditionEvent::HeightLE;
  return ConditionEvent::HeightGT;
}

inline void cmd_condition(ConfigReader& cfg, RunContext& ctx) {
  const Model m = read_model(cfg);
  const auto event = parse_event(cfg.choice("event", {"Ext", "ExtC", "HeightLE", "HeightGT"}));
  const bool limit = event == ConditionEvent::Ext || event == ConditionEvent::ExtC;
  const double extent = cfg.number(limit ? "X" : "T", limit ? 8.0 : std::optional<double>{});
  const double h = cfg.number("h", 0.01);
  const double tol = cfg.number("tol", 1e-8);
  ConditionOptions co;
  co.x_min = cfg.number("x_min", co.x_min);
  const std::size_t stride = cfg.count("stride", 1);
  const std::size_t N = cfg.count("N", 0);
  const double x0 = cfg.number("x0", 1.0);
  const double horizon = cfg.number("horizon", std::numeric_limits<double>::infinity());
  const ScaleTable table =
      limit ? limit_scale_table(m.b, m.K, extent, h, tol)
            : solve_scale(m.b, m.K, extent, static_cast<std::size_t>(std::llround(extent / h)), std::min(tol, 1e-10));
  const auto p = condition_params(m.b, m.K, table, event, co);
  std::ostringstream os;
  write_conditioned_csv(os, p, std::max<std::size_t>(stride, 1));
  ctx.table("conditioned", table_from_csv(os.str()));
  Json j = Json::object();
  j["event"] = condition_event_name(event);
  j["normalization_error"] = p.normalization_error;
  j["identity"] = p.identity;
  j["x_min"] = p.x_min;
  j["tail_extrapolation_error"] = p.h->extrapolation_error();
  if (N > 0) {
    const auto rep = simulate_conditioned(p, x0, limit ? std::numeric_limits<double>::infinity() : extent, horizon, N,
                                          ctx.seed());
    j["N"] = rep.N;
    j["absorbed_fraction"] = rep.absorbed_fraction;
    j["below_x_min_fraction"] = rep.below_eps_fraction;
    j["violations"] = rep.violations;
    j["kernel_fallbacks"] = rep.kernel_fallbacks;
    Json bars = Json::array();
    for (std::size_t i = 0; i < rep.barriers.size(); ++i)
      bars.push_back({{"barrier", rep.barriers[i]}, {"absorbed_before", rep.absorbed_before_barrier[i]}});
    j["barriers"] = bars;
  }
  ctx.json("condition_report", j);
  ctx.say(std::string("condition: ") + condition_event_name(event) + ", normalization error " +
          format_double(p.normalization_error));
}

inline void cmd_scaling(ConfigReader& cfg, RunContext& ctx) {
  const Model m = read_model(cfg);
  const auto scan = cfg.numbers("scan", geometric_scan(10.0, 1e4, 32));
  const auto ns = cfg.numbers("n", std::vector<double>{16.0, 64.0, 256.0});
  const double x0 = cfg.number("x0", 1.0);
  const double t = cfg.number("t", 0.5);
  const std::size_t N = cfg.count("N", 10'000);
  const double alpha = cfg.number("alpha", 0.01);
  const double absorb_horizon = cfg.number("absorption_horizon", 0.0);
  const auto a = check_near_critical(m.b, m.K, scan);
  const double c = cfg.has("c") ? cfg.number("c") : a.c_estimate;
  if (!cfg.has("c")) cfg.resolved()["c"] = c;
  cfg.skip("c");
  const auto rep = compare_scaling_limit(ns, m.b, m.K, c, x0, t, N, ctx.seed(), alpha);
  Table at;
  at.columns = {"x", "x_bm_minus_1", "b_m2", "b_m3"};
  for (std::size_t i = 0; i < a.scan.size(); ++i)
    at.add({cell(a.scan[i]), cell(a.c_profile[i]), cell(a.m2_profile[i]), cell(a.m3_profile[i])});
  Table st;
  st.columns = {"n", "ks", "critical_value", "p_value", "absorbed_rescaled", "absorbed_oracle", "max_atom"};
  for (const auto& e : rep.entries)
    st.add({cell(e.n), cell(e.ks), cell(e.critical_value), cell(e.p_value), cell(e.absorbed_rescaled),
            cell(e.absorbed_oracle), cell(e.max_atom)});
  Json j = Json::object();
  j["c"] = c;
  j["assumption_passes"] = a.passes();
  j["violations"] = a.violations;
  j["decreasing"] = rep.decreasing;
  j["last_below_critical"] = rep.last_below_critical;
  if (absorb_horizon > 0.0) {
    const auto run = simulate_rescaled(ns.back(), m.b, m.K, x0, absorb_horizon, {}, N, replica_seed(ctx.seed(), 99));
    j["absorption_horizon"] = absorb_horizon;
    j["absorbed_fraction"] = run.absorbed_fraction;
  }
  ctx.table("assumption", at);
  ctx.table("scaling", st);
  ctx.json("scaling_report", j);
  ctx.say("scaling: c = " + format_double(c) + ", KS at n = " + format_double(rep.entries.back().n) + ": " +
          format_double(rep.entries.back().ks) + " (critical " + format_double(rep.entries.back().critical_value) +
          ")");
}

}  // namespace detail

using Command = std::function<void(ConfigReader&, RunContext&)>;

inline const std::map<std::string, Command>& commands() {
  static const std::map<std::string, Command> table = {
      {"tree", detail::cmd_tree},         {"contour", detail::cmd_contour},
      {"scale", detail::cmd_scale},       {"extinction", detail::cmd_extinction},
      {"population", detail::cmd_population}, {"classify", detail::cmd_classify},
      {"tails", detail::cmd_tails},       {"condition", detail::cmd_condition},
      {"scaling", detail::cmd_scaling},
  };
  return table;
}

/// A manifest is accepted wherever a config is: its config block is used.
inline bool is_manifest(const Json& j) { return j.is_object() && j.value("kind", "") == kManifestKind; }

/// Runs one subcommand on a config object; returns the manifest.
inline Json run(const std::string& subcommand, const Json& config, const RunOptions& opt) {
  const auto it = commands().find(subcommand);
  require(it != commands().end(), Errc::usage, "unknown subcommand '" + subcommand + "'");
  RunContext ctx(subcommand, opt);
  ConfigReader cfg(config, "config");
  it->second(cfg, ctx);
  cfg.finish();
  return ctx.finish(cfg.resolved());
}

}  // namespace istlab

#endif
