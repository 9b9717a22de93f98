// Command-line driver: builds a run plan from flags and an optional key=value
// file, runs it, and writes results, a summary and optional charts.

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "v2xcosim/config.hpp"
#include "v2xcosim/metrics.hpp"
#include "v2xcosim/sweep.hpp"

namespace fs = std::filesystem;
using namespace v2x;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitFlagged = 2;

struct Cli {
  Settings settings;  // in command-line order
  std::string config_path;
  bool chart = false;
  bool dry_run = false;
};

void add_common(CLI::App* sub, Cli& cli) {
  auto keep = [&cli](const char* key) {
    return [&cli, key](const std::string& v) { cli.settings.emplace_back(key, v); };
  };
  sub->add_option_function<std::string>("--protocol", keep("protocol"), "cv2x, dsrc or custom (comma list allowed)");
  sub->add_option_function<std::string>("--custom-mhr-km", keep("custom-mhr-km"), "hearing range for custom (km)");
  sub->add_option_function<std::string>("--custom-ipg-ms", keep("custom-ipg-ms"), "packet gap for custom (ms)");
  sub->add_option_function<std::string>("--density", keep("density"), "densities, veh/h, comma separated");
  sub->add_option_function<std::string>("--seed", keep("seed"), "seeds, comma separated (default $V2XCOSIM_SEED or 1)");
  sub->add_option_function<std::string>("--out", keep("out"), "output directory (default out)");
  sub->add_option_function<std::string>("--format", keep("format"), "csv or json");
  sub->add_option_function<std::string>("--jobs", keep("jobs"), "parallel runs (default 1, 0 = all cores)");
  sub->add_option_function<std::string>("--horizon-s", keep("horizon-s"), "arrival horizon (s)");
  sub->add_option("--config", cli.config_path, "key=value file; flags override it");
  sub->add_flag("--chart", cli.chart, "also write <scenario>_<metric>.svg");
  sub->add_flag("--dry-run", cli.dry_run, "print the run plan and exit");
}

void add_ramp(CLI::App* sub, Cli& cli) {
  auto keep = [&cli](const char* key) {
    return [&cli, key](const std::string& v) { cli.settings.emplace_back(key, v); };
  };
  sub->add_option_function<std::string>("--theta-deg", keep("theta-deg"), "ramp merge angles, comma separated");
  sub->add_option_function<std::string>("--n-warmup-s", keep("n-warmup-s"), "ramp warmup excluded from metrics (s)");
}

void add_intersection(CLI::App* sub, Cli& cli) {
  auto keep = [&cli](const char* key) {
    return [&cli, key](const std::string& v) { cli.settings.emplace_back(key, v); };
  };
  sub->add_option_function<std::string>("--n-vehicles", keep("n-vehicles"), "vehicles per run (default 20)");
  sub->add_option_function<std::string>("--box-side-m", keep("box-side-m"), "conflict box side (m)");
  sub->add_option_function<std::string>("--arrival-vph", keep("arrival-vph"), "arrivals per approach (veh/h)");
}

void add_platoon(CLI::App* sub, Cli& cli) {
  auto keep = [&cli](const char* key) {
    return [&cli, key](const std::string& v) { cli.settings.emplace_back(key, v); };
  };
  sub->add_option_function<std::string>("--n-platoon", keep("n-platoon"), "platoon size (default 8)");
  sub->add_option_function<std::string>("--v-p-ms", keep("v-p-ms"), "cruise speed (m/s)");
  sub->add_option_function<std::string>("--b-brake-ms2", keep("b-brake-ms2"), "brake deceleration (m/s^2)");
  sub->add_option_function<std::string>("--ivd-m", keep("ivd-m"), "inter-vehicle distance (m)");
  sub->add_option_function<std::string>("--relay", keep("relay"), "positional or broadcast");
  sub->add_option_function<std::string>("--fail-safe", keep("fail-safe"), "Krauss fallback on or off");
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read config '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

int execute(const ScenarioConfig& config, bool dry_run) {
  const RunPlan plan = build_plan(config);
  if (dry_run) {
    for (const auto& run : plan.runs) std::cout << describe_run(run) << "\n";
    return kExitOk;
  }

  const auto records = config.jobs == 1 ? run_plan_serial(plan) : run_plan_parallel(plan, config.jobs);

  const fs::path out_dir(config.out_dir);
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create output directory '" + out_dir.string() + "': " + ec.message());
  const bool json = config.format == OutputFormat::kJson;
  write_results(records, out_dir / (json ? "results.json" : "results.csv"), json);
  const std::string summary = summarize(records);
  write_text(out_dir / "summary.txt", summary);
  std::cout << summary;

  if (config.chart) {
    std::map<Scenario, std::vector<MetricsRecord>> by_scenario;
    for (const auto& r : records) by_scenario[r.scenario].push_back(r);
    for (const auto& [scenario, recs] : by_scenario) {
      std::vector<ChartMetric> metrics{ChartMetric::kPrimary};
      if (scenario == Scenario::kPlatoon && recs.front().mivd) metrics.push_back(ChartMetric::kMivd);
      for (ChartMetric m : metrics) {
        try {
          render_chart(recs, m, out_dir / (scenario_name(scenario) + "_" + chart_metric_name(scenario, m) + ".svg"));
        } catch (const DomainError& e) {
          throw UsageError(std::string("--chart: ") + e.what());
        }
      }
    }
  }

  for (const auto& r : records) {
    if (r.gridlock || r.fault) {
      std::cerr << "flagged: " << describe_run({r.scenario, r.protocol, r.density, r.theta_deg, r.seed})
                << (r.gridlock ? " gridlock" : "") << (r.fault ? " fault" : "") << "\n";
    }
  }
  const bool flagged = std::any_of(records.begin(), records.end(),
                                   [](const MetricsRecord& r) { return r.gridlock || r.fault; });
  return flagged ? kExitFlagged : kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"V2X protocol co-simulator: ramp merging, intersection crossing and platoon braking"};
  app.require_subcommand(1);
  Cli cli;

  auto* ramp = app.add_subcommand("ramp", "on-ramp merge, road time of ramp vehicles");
  auto* inter = app.add_subcommand("intersection", "reservation intersection, total crossing time");
  auto* plat = app.add_subcommand("platoon", "platoon emergency brake, brake time and MIVD");
  auto* sweep = app.add_subcommand("sweep", "all three scenarios over one grid");
  for (auto* sub : {ramp, inter, plat, sweep}) add_common(sub, cli);
  add_ramp(ramp, cli);
  add_ramp(sweep, cli);
  add_intersection(inter, cli);
  add_intersection(sweep, cli);
  add_platoon(plat, cli);
  add_platoon(sweep, cli);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    ScenarioConfig config;
    if (ramp->parsed()) config.scenario = Scenario::kRamp;
    if (inter->parsed()) config.scenario = Scenario::kIntersection;
    if (plat->parsed()) config.scenario = Scenario::kPlatoon;

    if (!cli.config_path.empty()) {
      for (const auto& [k, v] : parse_config_text(read_file(cli.config_path))) apply_setting(config, k, v);
    }
    for (const auto& [k, v] : cli.settings) apply_setting(config, k, v);
    if (cli.chart) config.chart = true;
    if (config.seeds.empty()) {
      const char* env = std::getenv("V2XCOSIM_SEED");
      apply_setting(config, "seed", env != nullptr && *env != '\0' ? env : "1");
    }
    return execute(config, cli.dry_run);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DomainError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
}
