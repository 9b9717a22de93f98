#include <doctest.h>

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "v2xcosim/config.hpp"
#include "v2xcosim/metrics.hpp"
#include "v2xcosim/sweep.hpp"

using namespace v2x;
namespace fs = std::filesystem;

namespace {

struct CliResult {
  int code = -1;
  std::string output;
};

CliResult run_cli(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + (env.empty() ? "" : " ") + "\"" + V2X_CLI_PATH + "\" " + args + " 2>&1";
  CliResult r;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::array<char, 4096> buf{};
  while (const auto n = fread(buf.data(), 1, buf.size(), pipe)) r.output.append(buf.data(), n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::size_t count_lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("v2xcosim-cli-" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

ScenarioConfig config_from(std::optional<Scenario> s, const Settings& settings) {
  ScenarioConfig c;
  c.scenario = s;
  for (const auto& [k, v] : settings) apply_setting(c, k, v);
  return c;
}

}  // namespace

TEST_SUITE("cli-config") {
  TEST_CASE("ramp grid over four densities is four runs") {
    const auto plan = build_plan(config_from(Scenario::kRamp, {{"protocol", "cv2x"}, {"density", "250,750,1500,2000"}, {"seed", "1"}}));
    REQUIRE(plan.runs.size() == 4);
    const double want[] = {250, 750, 1500, 2000};
    for (std::size_t i = 0; i < 4; ++i) {
      CHECK(plan.runs[i].density == want[i]);
      CHECK(plan.runs[i].protocol == ProtocolModel::cv2x());
      CHECK(plan.runs[i].theta_deg == 24.0);
    }
  }

  TEST_CASE("sweep over one density and three seeds is 18 runs") {
    const auto plan = build_plan(config_from(std::nullopt, {{"density", "250"}, {"seed", "1,2,3"}}));
    CHECK(plan.runs.size() == 18);
    CHECK(plan.runs.front().scenario == Scenario::kRamp);
    CHECK(plan.runs.back().scenario == Scenario::kPlatoon);
    CHECK(plan.runs.back().seed == 3);
  }

  TEST_CASE("plan expansion order is scenario, protocol, density, theta, seed") {
    const auto plan = build_plan(config_from(
        Scenario::kRamp, {{"density", "250,500"}, {"theta-deg", "24,48"}, {"seed", "1,2"}, {"protocol", "dsrc,cv2x"}}));
    REQUIRE(plan.runs.size() == 16);
    CHECK(describe_run(plan.runs[0]) == "ramp DSRC density=250.0000 theta=24.0000 seed=1");
    CHECK(describe_run(plan.runs[1]) == "ramp DSRC density=250.0000 theta=24.0000 seed=2");
    CHECK(describe_run(plan.runs[2]) == "ramp DSRC density=250.0000 theta=48.0000 seed=1");
    CHECK(describe_run(plan.runs[4]) == "ramp DSRC density=500.0000 theta=24.0000 seed=1");
    CHECK(describe_run(plan.runs[8]) == "ramp CV2X density=250.0000 theta=24.0000 seed=1");
  }

  TEST_CASE("usage errors are raised before anything runs") {
    CHECK_THROWS_AS(build_plan(config_from(Scenario::kPlatoon, {{"protocol", "custom"}, {"custom-mhr-km", "0.01"}, {"density", "250"}, {"seed", "1"}})),
                    UsageError);
    CHECK_THROWS_AS(build_plan(config_from(Scenario::kRamp, {{"seed", "1"}})), UsageError);
    CHECK_THROWS_AS(build_plan(config_from(Scenario::kRamp, {{"density", "0"}, {"seed", "1"}})), UsageError);
    CHECK_THROWS_AS(build_plan(config_from(Scenario::kPlatoon, {{"theta-deg", "24"}, {"density", "250"}, {"seed", "1"}})),
                    UsageError);
    CHECK_THROWS_AS(build_plan(config_from(Scenario::kRamp, {{"custom-ipg-ms", "100"}, {"density", "250"}, {"seed", "1"}})),
                    UsageError);
    CHECK_THROWS_AS(build_plan(config_from(Scenario::kPlatoon, {{"ivd-m", "0.5"}, {"density", "250"}, {"seed", "1"}})),
                    UsageError);
    CHECK_THROWS_AS(build_plan(config_from(Scenario::kRamp, {{"theta-deg", "95"}, {"density", "250"}, {"seed", "1"}})),
                    UsageError);
  }

  TEST_CASE("malformed values and unknown keys") {
    ScenarioConfig c;
    CHECK_THROWS_AS(apply_setting(c, "density", "25O"), UsageError);
    CHECK_THROWS_AS(apply_setting(c, "density", "250,"), UsageError);
    CHECK_THROWS_AS(apply_setting(c, "seed", "-1"), UsageError);
    CHECK_THROWS_AS(apply_setting(c, "protocol", "lte"), UsageError);
    CHECK_THROWS_AS(apply_setting(c, "format", "xml"), UsageError);
    CHECK_THROWS_AS(apply_setting(c, "colour", "blue"), UsageError);
    CHECK_THROWS_AS(apply_setting(c, "jobs", "-2"), UsageError);
  }

  TEST_CASE("config text: comments, blanks, underscores and line numbers") {
    const auto s = parse_config_text("# grid\n\ndensity = 250,750\nTHETA_DEG=48\n  seed=4  \n");
    REQUIRE(s.size() == 3);
    CHECK(s[0] == std::pair<std::string, std::string>{"density", "250,750"});
    CHECK(s[1].first == "theta-deg");
    CHECK(s[2].second == "4");
    try {
      parse_config_text("density=250\njunk line\n");
      FAIL("expected UsageError");
    } catch (const UsageError& e) {
      CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
  }

  TEST_CASE("every listed key is accepted") {
    for (const auto& key : config_keys()) {
      ScenarioConfig c;
      std::string value = "1";
      if (key == "protocol") value = "dsrc";
      if (key == "out") value = "x";
      if (key == "format") value = "json";
      if (key == "relay") value = "broadcast";
      CAPTURE(key);
      CHECK_NOTHROW(apply_setting(c, key, value));
    }
  }

  TEST_CASE("property: the plan is a pure function of the settings") {
    const Settings s{{"density", "100,700"}, {"seed", "3,1"}, {"protocol", "cv2x,dsrc"}};
    const auto a = build_plan(config_from(Scenario::kIntersection, s));
    const auto b = build_plan(config_from(Scenario::kIntersection, s));
    REQUIRE(a.runs.size() == b.runs.size());
    for (std::size_t i = 0; i < a.runs.size(); ++i) CHECK(describe_run(a.runs[i]) == describe_run(b.runs[i]));
  }

  TEST_CASE("parallel results match serial results in plan order") {
    const auto plan = build_plan(config_from(std::nullopt, {{"density", "250,1000"}, {"seed", "1,2"}}));
    const auto serial = run_plan_serial(plan);
    const auto parallel = run_plan_parallel(plan, 4);
    REQUIRE(serial.size() == parallel.size());
    CHECK(to_csv(serial) == to_csv(parallel));
    for (std::size_t i = 0; i < serial.size(); ++i) {
      CHECK(serial[i].scenario == plan.runs[i].scenario);
      CHECK(parallel[i].seed == plan.runs[i].seed);
      CHECK(serial[i].primary_metric == parallel[i].primary_metric);
    }
  }

  TEST_CASE("cli dry run prints the plan") {
    const auto r = run_cli("ramp --protocol cv2x --density 250,750,1500,2000 --seed 1 --dry-run");
    CHECK(r.code == 0);
    CHECK(count_lines(r.output) == 4);
    const auto s = run_cli("sweep --density 250 --seed 1,2,3 --dry-run");
    CHECK(s.code == 0);
    CHECK(count_lines(s.output) == 18);
  }

  TEST_CASE("cli exit codes") {
    CHECK(run_cli("platoon --protocol custom --custom-mhr-km 0.01 --density 250 --dry-run").code == 1);
    CHECK(run_cli("ramp --density 250 --bogus 3").code == 1);
    CHECK(run_cli("ramp --density 2x0 --dry-run").code == 1);
    CHECK(run_cli("ramp --seed 1 --dry-run").code == 1);
    CHECK(run_cli("").code == 1);
    CHECK(run_cli("--help").code == 0);
    const auto dir = scratch_dir("flag");
    const auto g = run_cli("intersection --protocol custom --custom-mhr-km 0 --custom-ipg-ms 100 --density 100 --n-vehicles 2 "
                           "--horizon-s 20 --out \"" + dir.string() + "\"");
    CHECK(g.code == 2);
    CHECK(g.output.find("gridlock") != std::string::npos);
    // a directory nested under a regular file cannot be created, even by root
    { std::ofstream(dir / "plain-file") << "x"; }
    CHECK(run_cli("platoon --density 250 --out \"" + (dir / "plain-file" / "out").string() + "\"").code == 1);
  }

  TEST_CASE("flags override the config file and the env var seeds the default") {
    const auto dir = scratch_dir("conf");
    {
      std::ofstream f(dir / "grid.conf");
      f << "# platoon grid\nprotocol = dsrc\ndensity = 250,500\nseed = 9\n";
    }
    const auto a = run_cli("platoon --config \"" + (dir / "grid.conf").string() + "\" --density 1000 --dry-run");
    CHECK(a.code == 0);
    CHECK(a.output == "platoon DSRC density=1000.0000 seed=9\n");
    const auto b = run_cli("platoon --density 500 --dry-run", "V2XCOSIM_SEED=7");
    CHECK(b.output == "platoon CV2X density=500.0000 seed=7\nplatoon DSRC density=500.0000 seed=7\n");
    const auto c = run_cli("platoon --density 500 --seed 2 --dry-run", "V2XCOSIM_SEED=7");
    CHECK(c.output.find("seed=2") != std::string::npos);
    CHECK(run_cli("platoon --config \"" + (dir / "missing.conf").string() + "\" --density 500").code == 1);
  }

  TEST_CASE("five-density intersection sweep over both protocols writes 10 rows, the same bytes twice") {
    const auto d1 = scratch_dir("t2a");
    const auto d2 = scratch_dir("t2b");
    const std::string args = "intersection --density 100,250,400,550,700 --seed 1 --chart --jobs 2 --out ";
    const auto r1 = run_cli(args + "\"" + d1.string() + "\"");
    const auto r2 = run_cli(args + "\"" + d2.string() + "\"");
    CHECK(r1.code == 0);
    CHECK(r2.code == 0);
    CHECK(count_lines(slurp(d1 / "results.csv")) == 11);
    for (const char* f : {"results.csv", "summary.txt", "intersection_total_time.svg"}) {
      CAPTURE(f);
      REQUIRE(fs::exists(d1 / f));
      CHECK(slurp(d1 / f) == slurp(d2 / f));
    }
  }

  TEST_CASE("json output mirrors csv") {
    const auto dir = scratch_dir("json");
    CHECK(run_cli("platoon --density 250,500 --seed 1 --format json --out \"" + dir.string() + "\"").code == 0);
    CHECK(fs::exists(dir / "results.json"));
    CHECK_FALSE(fs::exists(dir / "results.csv"));
  }
}
