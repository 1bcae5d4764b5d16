#include <filesystem>

#include <gtest/gtest.h>

#include "istlab/io.hpp"
#include "istlab/runner.hpp"

using namespace istlab;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("istlab-test-" + name);
  fs::remove_all(p);
  return p;
}

RunOptions quiet(const fs::path& out, std::uint64_t seed = 5) {
  RunOptions o;
  o.out = out;
  o.seed = seed;
  o.quiet = true;
  return o;
}

Errc code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return Errc::io;  // sentinel: nothing thrown
}

const char* kScale = R"({"rate": {"type": "constant", "beta": 1}, "kernel": {"type": "exponential", "d": 2}, "T": 1})";

}  // namespace

TEST(Config, FieldPathInErrors) {
  const Json j = Json::parse(R"({"rate": {"type": "constant", "beta": "x"}})");
  ConfigReader r(j, "config");
  try {
    r.object("rate", parse_rate);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::usage);
    EXPECT_NE(std::string(e.what()).find("config.rate.beta"), std::string::npos);
  }
}

TEST(Config, UnknownAndMissingFields) {
  auto bad = Json::parse(kScale);
  bad["Tt"] = 2;
  EXPECT_EQ(code_of([&] { run("scale", bad, quiet(scratch("unknown"))); }), Errc::usage);
  auto missing = Json::parse(kScale);
  missing.erase("T");
  EXPECT_EQ(code_of([&] { run("scale", missing, quiet(scratch("missing"))); }), Errc::usage);
  auto domain = Json::parse(kScale);
  domain["rate"]["beta"] = -1;
  EXPECT_EQ(code_of([&] { run("scale", domain, quiet(scratch("domain"))); }), Errc::usage);
  EXPECT_EQ(code_of([&] { run("nope", Json::parse(kScale), quiet(scratch("nope"))); }), Errc::usage);
}

TEST(Config, FuzzedFieldsNeverCrash) {
  // a value of the wrong kind is a usage error; a number out of range is the
  // module's domain error
  const Json base = Json::parse(kScale);
  const std::vector<Json> junk = {Json("abc"), Json(nullptr), Json::array(), Json::object(), Json(true)};
  for (const auto& [key, _] : base.items()) {
    for (const auto& v : junk) {
      Json j = base;
      j[key] = v;
      EXPECT_EQ(code_of([&] { run("scale", j, quiet(scratch("fuzz"))); }), Errc::usage) << key << " = " << v.dump();
    }
    Json j = base;
    j[key] = -3;
    const Errc c = code_of([&] { run("scale", j, quiet(scratch("fuzz"))); });
    EXPECT_TRUE(c == Errc::usage || c == Errc::domain) << key << " = -3";
  }
}

TEST(Runner, ScaleTableStartsAtOne) {
  const auto out = scratch("scale");
  run("scale", Json::parse(kScale), quiet(out));
  const std::string csv = read_file(out / "scale.csv");
  EXPECT_EQ(csv.rfind("t,S\n0,1\n", 0), 0u);
  EXPECT_TRUE(fs::exists(out / "manifest.json"));
}

TEST(Runner, ClassifyPareto) {
  const auto out = scratch("classify");
  run("classify", Json::parse(R"({"rate": {"type": "constant", "beta": 1}, "kernel": {"type": "pareto", "k": 3}})"),
      quiet(out));
  EXPECT_EQ(read_json_file((out / "classify.json").string())["verdict"], "SupercriticalSufficient");
}

TEST(Runner, ManifestReplayIsByteIdentical) {
  const Json cfg = Json::parse(
      R"({"rate": {"type": "constant", "beta": 1}, "kernel": {"type": "dirac", "a": 1}, "x0": 2, "T": 5,
          "source": "pdmp"})");
  const auto a = scratch("replay-a"), b = scratch("replay-b");
  const Json m1 = run("contour", cfg, quiet(a, 99));
  const Json saved = read_json_file((a / "manifest.json").string());
  const Json m2 = run(saved["subcommand"], saved["config"], quiet(b, saved["seed"].get<std::uint64_t>()));
  EXPECT_EQ(m1["artifacts"], m2["artifacts"]);
  for (const auto& [name, hash] : m1["artifacts"].items()) EXPECT_EQ(read_file(a / name), read_file(b / name));
}

TEST(Runner, DifferentSeedsDiffer) {
  const Json cfg = Json::parse(
      R"({"rate": {"type": "constant", "beta": 1}, "kernel": {"type": "dirac", "a": 1}, "x0": 2, "T": 5})");
  const Json m1 = run("tree", cfg, quiet(scratch("seed-a"), 1));
  const Json m2 = run("tree", cfg, quiet(scratch("seed-b"), 2));
  EXPECT_NE(m1["artifacts"]["tree.csv"], m2["artifacts"]["tree.csv"]);
}

TEST(Runner, JsonFormat) {
  auto o = quiet(scratch("json"));
  o.format = Format::Json;
  run("scale", Json::parse(kScale), o);
  const Json t = read_json_file((o.out / "scale.json").string());
  ASSERT_TRUE(t.is_array());
  EXPECT_EQ(t[0]["S"], 1.0);
}

TEST(Runner, ResolvedConfigEchoesDefaults) {
  const Json m = run("scale", Json::parse(kScale), quiet(scratch("defaults")));
  EXPECT_EQ(m["config"]["M"], 1024);
  EXPECT_EQ(m["config"]["tol"], 1e-10);
  EXPECT_EQ(m["version"], ISTLAB_VERSION);
}

TEST(Table, CsvRoundTrip) {
  const auto t = table_from_csv("a,b\n1,x\n2,\n");
  ASSERT_EQ(t.rows.size(), 2u);
  EXPECT_EQ(t.rows[1][1], "");
  std::ostringstream os;
  t.write_csv(os);
  EXPECT_EQ(os.str(), "a,b\n1,x\n2,\n");
}
