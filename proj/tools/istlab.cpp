// istlab: command-line front end.
//
//   istlab <subcommand> --config cfg.json [--seed N] [--out DIR] [--threads N] [--format csv|json]
//
// A manifest.json written by an earlier run is accepted as --config and
// replays that run (same subcommand, seed and format unless overridden).

#include <cstdint>
#include <exception>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "istlab/error.hpp"
#include "istlab/io.hpp"
#include "istlab/random.hpp"
#include "istlab/runner.hpp"
#include "istlab/verify.hpp"

namespace {

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = "out";
  unsigned threads = 0;
  std::optional<std::string> format;
  std::vector<int> checks;
};

void add_common(CLI::App* sub, Flags& f, bool config_required) {
  auto* c = sub->add_option("--config", f.config, "JSON config or a manifest.json from an earlier run");
  if (config_required) c->required()->check(CLI::ExistingFile);
  sub->add_option("--seed", f.seed, "64-bit seed");
  sub->add_option("--out", f.out, "output directory")->capture_default_str();
  sub->add_option("--threads", f.threads, "worker threads (default: IST_LAB_THREADS or hardware)");
  sub->add_option("--format", f.format, "tabular output format")->check(CLI::IsMember({"csv", "json"}));
}

int run_verify(const Flags& f) {
  using namespace istlab;
  verify::Options vo;
  if (f.seed) vo.seed = *f.seed;
  vo.scratch = std::filesystem::path(f.out) / "scratch";
  std::vector<int> ids = f.checks;
  if (ids.empty())
    for (int i = 1; i <= static_cast<int>(verify::checks().size()); ++i) ids.push_back(i);
  Table t;
  t.columns = {"id", "name", "pass", "seconds", "detail"};
  t.text_columns = {"name", "detail"};
  bool all = true;
  for (int id : ids) {
    const auto r = verify::run_check(id, vo);
    std::cout << verify::line(r) << std::endl;
    all &= r.pass;
    std::string detail = r.detail;
    for (auto& ch : detail)
      if (ch == ',') ch = ';';
    t.add({std::to_string(r.id), r.name, r.pass ? "true" : "false", format_double(r.seconds), detail});
  }
  std::filesystem::create_directories(f.out);
  std::ofstream os(std::filesystem::path(f.out) / "verify.csv", std::ios::binary);
  t.write_csv(os);
  return all ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulation and numerics for time-inhomogeneous splitting trees"};
  app.set_version_flag("--version", std::string(ISTLAB_VERSION));
  app.require_subcommand(1);
  Flags f;
  const std::vector<std::pair<std::string, std::string>> subs = {
      {"tree", "simulate a truncated chronological tree"},
      {"contour", "contour of a tree, or the stand-alone contour process"},
      {"scale", "solve the scale function S_T on a grid"},
      {"extinction", "extinction probability as the limit of S_T"},
      {"population", "law of the population size at time t"},
      {"classify", "drift-based criticality report"},
      {"tails", "Monte Carlo tail of the tree length"},
      {"condition", "conditioned birth rate and lifetime kernel"},
      {"scaling", "rescaled contour against the Bessel limit"},
  };
  for (const auto& [name, help] : subs) add_common(app.add_subcommand(name, help), f, true);
  auto* ver = app.add_subcommand("verify", "run the acceptance checks");
  add_common(ver, f, false);
  ver->add_option("--check", f.checks, "run only these checks (1-10)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    using namespace istlab;
    if (f.threads > 0) set_thread_count(f.threads);
    const std::string name = app.get_subcommands().front()->get_name();
    if (name == "verify") return run_verify(f);

    Json cfg = read_json_file(f.config);
    RunOptions ro;
    ro.out = f.out;
    std::string format = "csv";
    if (is_manifest(cfg)) {
      require(cfg.value("subcommand", "") == name, Errc::usage,
              "manifest is for '" + cfg.value("subcommand", "") + "', not '" + name + "'");
      ro.seed = cfg.at("seed").get<std::uint64_t>();
      format = cfg.value("format", "csv");
      Json inner = cfg.at("config");
      cfg = std::move(inner);
    } else if (cfg.is_object() && cfg.contains("seed") && !f.seed) {
      require(cfg["seed"].is_number_unsigned() || cfg["seed"].is_number_integer(), Errc::usage,
              "config: config.seed must be an unsigned integer");
      ro.seed = cfg["seed"].get<std::uint64_t>();
    }
    if (cfg.is_object()) cfg.erase("seed");
    if (f.seed) ro.seed = *f.seed;
    if (f.format) format = *f.format;
    ro.format = format == "json" ? Format::Json : Format::Csv;
    const Json manifest = run(name, cfg, ro);
    std::cout << "wrote " << manifest["artifacts"].size() << " artifacts and manifest.json to " << f.out << '\n';
    return 0;
  } catch (const istlab::Error& e) {
    std::cerr << "istlab: " << e.what() << '\n';
    return istlab::exit_status(e.code());
  } catch (const std::exception& e) {
    std::cerr << "istlab: " << e.what() << '\n';
    return 1;
  }
}
