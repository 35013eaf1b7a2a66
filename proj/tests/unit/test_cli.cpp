#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "config.hpp"
#include "doctest.h"
#include "json.hpp"
#include "memscope/error.hpp"

namespace fs = std::filesystem;
using memscope::cli::Config;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  int code = memscope::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("memscope_cli_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("config parsing, overrides and echo") {
  std::istringstream in(
      "# run\n[synth]\nevents = 5000  # short\nmode = \"multiprocess\"\n[level.L2]\nsize = 1MiB\n");
  auto c = Config::parse(in);
  CHECK(c.u64("synth.events", 1) == 5000);
  CHECK(c.str("synth.mode", "") == "multiprocess");
  CHECK(c.bytes("level.L2.size", 0) == (1u << 20));
  CHECK(c.num("synth.code_zipf", 1.0) == 1.0);
  c.set("synth.events", "0x10");
  CHECK(c.u64("synth.events", 1) == 16);
  CHECK(c.subsections("level") == std::vector<std::string>{"L2"});
  auto echo = c.echo();
  CHECK(echo.find("[synth]\ncode_zipf = 1.0\nevents = 0x10\nmode = multiprocess\n") != std::string::npos);
  CHECK(echo.find("[level.L2]\nsize = 1MiB\n") != std::string::npos);

  std::istringstream bad("[synth\n");
  CHECK_THROWS_AS(Config::parse(bad), memscope::ConfigError);
  std::istringstream nokv("[a]\njunk\n");
  CHECK_THROWS_AS(Config::parse(nokv), memscope::ConfigError);
  Config d;
  d.set("x.n", "abc");
  CHECK_THROWS_AS(d.u64("x.n", 0), memscope::ConfigError);
  CHECK_THROWS_AS(memscope::cli::parse_bytes("5 parsecs"), memscope::ConfigError);
  CHECK(memscope::cli::parse_bytes("2K") == 2048);
}

TEST_CASE("unknown keys in a section the command reads are rejected") {
  Config c;
  c.set("tlb.walk_cost", "3");
  c.set("tlb.wallk_cost", "4");
  c.set("other.thing", "1");
  c.num("tlb.walk_cost", 20);
  CHECK_THROWS_AS(c.reject_unknown(), memscope::ConfigError);
}

TEST_CASE("usage errors exit 2, module errors exit 1 with the message") {
  CHECK(run({}).code == 2);
  CHECK(run({"frobnicate"}).code == 2);
  CHECK(run({"gen", "--bogus"}).code == 2);
  CHECK(run({"gen", "--format", "xml"}).code == 2);
  CHECK(run({"paperlab", "nope"}).code == 2);
  CHECK(run({"--help"}).code == 0);
  auto out = scratch("err");
  auto r = run({"cache", (out / "missing.bin").string(), "--out", out.string()});
  CHECK(r.code == 1);
  CHECK(r.err.find("missing.bin") != std::string::npos);
  r = run({"gen", "--out", out.string(), "--set", "synth.n_cores=0"});
  CHECK(r.code == 1);
  CHECK(r.err.find("n_cores") != std::string::npos);
  fs::remove_all(out);
}

TEST_CASE("gen writes a self-describing report directory") {
  auto out = scratch("gen");
  auto r = run({"gen", "--out", out.string(), "--seed", "5", "--set", "synth.events=3000"});
  REQUIRE(r.code == 0);
  CHECK(fs::exists(out / "trace.bin"));
  CHECK(fs::exists(out / "pagetable.csv"));
  CHECK(slurp(out / "config.toml").find("seed = 5") != std::string::npos);
  auto m = nlohmann::json::parse(slurp(out / "manifest.json"));
  CHECK(m["version"] == memscope::cli::version());
  CHECK(m["command"] == "gen");
  bool listed = false;
  for (const auto& f : m["files"]) listed |= f["name"] == "trace.bin";
  CHECK(listed);

  // The echoed config reproduces the run.
  auto again = scratch("gen2");
  REQUIRE(run({"gen", "--out", again.string(), "--config", (out / "config.toml").string()}).code == 0);
  CHECK(slurp(out / "trace.bin") == slurp(again / "trace.bin"));
  fs::remove_all(out);
  fs::remove_all(again);
}

TEST_CASE("tier report carries the Tiered relative cost") {
  auto out = scratch("tier");
  REQUIRE(run({"gen", "--out", (out / "g").string(), "--set", "synth.events=20000", "--set", "synth.n_cores=1"})
              .code == 0);
  auto r = run({"tier", (out / "g" / "trace.bin").string(), "--out", (out / "t").string(), "--format", "json"});
  REQUIRE(r.code == 0);
  auto j = nlohmann::json::parse(slurp(out / "t" / "report.json"));
  bool found = false;
  for (const auto& row : j)
    if (row["config"] == "tiered") {
      found = true;
      CHECK(row["cost_total"].get<double>() == 1.375);
    }
  CHECK(found);

  // A trailing positional after --set is an input, not a second override.
  r = run({"analyze", "corr", "--out", (out / "c").string(), "--set", "analyze.event=ifetch",
           (out / "g" / "trace.bin").string()});
  CHECK(r.code == 0);
  fs::remove_all(out);
}
