// Acceptance run: one PASS/FAIL line per criterion, exit 1 if any fails.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "v2xcosim/config.hpp"
#include "v2xcosim/sweep.hpp"

using namespace v2x;
namespace fs = std::filesystem;

namespace {

// ---- pinned tolerances ----
constexpr double kMhrTolKm = 0.001;
constexpr double kIpgTolMs = 1.0;
constexpr double kRampLowMin = 9.0;
constexpr double kRampLowMax = 15.0;
constexpr double kRampGrowth = 2.0;
constexpr int kSeeds = 5;
constexpr int kPlatoonOracleCases = 24;
constexpr double kCv2xMivdRange = 0.5;
constexpr double kKraussRel = 1e-9;
constexpr long kCollisionSteps = 1000000;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double x, int prec = 2) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", prec, x);
  return buf;
}

using Cell = std::tuple<Scenario, int, double, double, double, double>;  // scenario, rank, mhr, ipg, density, theta

Cell cell_of(Scenario s, const ProtocolModel& p, double rho, std::optional<double> theta) {
  return {s, p.rank(), p.custom_mhr_km, p.custom_ipg_ms, rho, theta.value_or(-1.0)};
}

// Runs every cell over seeds 1..kSeeds on all cores and keeps the records by cell.
class Grid {
 public:
  void add(Scenario s, const ProtocolModel& p, double rho, std::optional<double> theta = std::nullopt) {
    for (int seed = 1; seed <= kSeeds; ++seed) plan_.runs.push_back({s, p, rho, theta, static_cast<std::uint64_t>(seed)});
  }
  void run() {
    const auto recs = run_plan_parallel(plan_, 0);
    for (std::size_t i = 0; i < recs.size(); ++i) {
      const auto& r = plan_.runs[i];
      by_cell_[cell_of(r.scenario, r.protocol, r.density, r.theta_deg)].push_back(recs[i]);
    }
  }
  const std::vector<MetricsRecord>& at(Scenario s, const ProtocolModel& p, double rho,
                                       std::optional<double> theta = std::nullopt) const {
    return by_cell_.at(cell_of(s, p, rho, theta));
  }
  double mean(Scenario s, const ProtocolModel& p, double rho, std::optional<double> theta = std::nullopt) const {
    const auto& v = at(s, p, rho, theta);
    double sum = 0.0;
    for (const auto& r : v) sum += r.primary_metric;
    return sum / static_cast<double>(v.size());
  }
  double mean_mivd(Scenario s, const ProtocolModel& p, double rho) const {
    const auto& v = at(s, p, rho);
    double sum = 0.0;
    for (const auto& r : v) sum += r.mivd.value_or(NAN);
    return sum / static_cast<double>(v.size());
  }
  std::vector<MetricsRecord> all(Scenario s) const {
    std::vector<MetricsRecord> out;
    for (const auto& [k, v] : by_cell_) {
      if (std::get<0>(k) == s) out.insert(out.end(), v.begin(), v.end());
    }
    return out;
  }

 private:
  RunPlan plan_;
  std::map<Cell, std::vector<MetricsRecord>> by_cell_;
};

const ProtocolModel kCv2x = ProtocolModel::cv2x();
const ProtocolModel kDsrc = ProtocolModel::dsrc();
const ProtocolModel kSlow = ProtocolModel::custom(0.010, 1000.0);
const double kIxDensities[] = {100, 250, 400, 550, 700};
const double kPlDensities[] = {250, 500, 1000, 1250, 1500};

Outcome protocol_fit() {
  int ok = 0;
  int by_rounding = 0;
  std::string bad;
  for (const auto& row : oracle::printed_params()) {
    const auto p = protocol_params(row.protocol == "CV2X" ? kCv2x : kDsrc, row.density);
    bool mhr_ok = oracle::matches_printed(p.mhr_km, row.mhr_km, row.mhr_decimals, kMhrTolKm);
    if (mhr_ok && std::abs(p.mhr_km - row.mhr_km) > kMhrTolKm) ++by_rounding;
    const bool ipg_ok = row.ipg_ms < 0.0 || std::abs(p.ipg_ms - row.ipg_ms) <= kIpgTolMs;
    if (mhr_ok && ipg_ok) {
      ++ok;
    } else {
      bad += " " + row.protocol + "@" + fmt(row.density, 0);
    }
  }
  const auto n = oracle::printed_params().size();
  return {ok == static_cast<int>(n), std::to_string(ok) + "/" + std::to_string(n) + " rows (" + std::to_string(by_rounding) +
                                         " equal at printed precision)" + (bad.empty() ? "" : "; off:" + bad)};
}

Outcome ramp_anchor(const Grid& g) {
  const double c = g.mean(Scenario::kRamp, kCv2x, 250, 24.0);
  const double d = g.mean(Scenario::kRamp, kDsrc, 250, 24.0);
  const bool pass = c >= kRampLowMin && c <= kRampLowMax && d >= kRampLowMin && d <= kRampLowMax;
  return {pass, "CV2X " + fmt(c) + " s, DSRC " + fmt(d) + " s at 250 veh/h"};
}

Outcome ramp_crossover(const Grid& g) {
  const double c250 = g.mean(Scenario::kRamp, kCv2x, 250, 24.0);
  const double d250 = g.mean(Scenario::kRamp, kDsrc, 250, 24.0);
  const double c2k = g.mean(Scenario::kRamp, kCv2x, 2000, 24.0);
  const double d2k = g.mean(Scenario::kRamp, kDsrc, 2000, 24.0);
  const double low = std::max(c250, d250);
  const bool pass = c2k < d2k && std::min(c2k, d2k) >= kRampGrowth * low;
  return {pass, "at 2000: CV2X " + fmt(c2k) + " < DSRC " + fmt(d2k) + "; ratio to 250 " + fmt(c2k / c250) + "x / " +
                    fmt(d2k / d250) + "x"};
}

Outcome slow_dominance(const Grid& g) {
  const double s = g.mean(Scenario::kRamp, kSlow, 2000, 24.0);
  const double c = g.mean(Scenario::kRamp, kCv2x, 2000, 24.0);
  const double d = g.mean(Scenario::kRamp, kDsrc, 2000, 24.0);
  return {s > c && s > d, "CUSTOM(0.010,1000) " + fmt(s) + " vs CV2X " + fmt(c) + ", DSRC " + fmt(d)};
}

Outcome angle_order(const Grid& g) {
  const double a = g.mean(Scenario::kRamp, kCv2x, 1500, 24.0);
  const double b = g.mean(Scenario::kRamp, kCv2x, 1500, 48.0);
  const double c = g.mean(Scenario::kRamp, kCv2x, 1500, 72.0);
  return {a <= b && b <= c && a < c, "CV2X at 1500: 24deg " + fmt(a) + ", 48deg " + fmt(b) + ", 72deg " + fmt(c)};
}

Outcome ix_equivalence(const Grid& g) {
  const auto& c = g.at(Scenario::kIntersection, kCv2x, 100);
  const auto& d = g.at(Scenario::kIntersection, kDsrc, 100);
  bool same = c.size() == d.size();
  for (std::size_t i = 0; same && i < c.size(); ++i) {
    same = c[i].primary_metric == d[i].primary_metric && c[i].vehicles.size() == d[i].vehicles.size();
    for (std::size_t k = 0; same && k < c[i].vehicles.size(); ++k) {
      same = c[i].vehicles[k].finish_time == d[i].vehicles[k].finish_time;
    }
  }
  return {same, std::to_string(c.size()) + " matched seeds, mean " + fmt(g.mean(Scenario::kIntersection, kCv2x, 100), 4) +
                    " s both"};
}

Outcome ix_crossover(const Grid& g) {
  bool pass = true;
  std::string detail;
  for (double rho : {400.0, 550.0, 700.0}) {
    const double c = g.mean(Scenario::kIntersection, kCv2x, rho);
    const double d = g.mean(Scenario::kIntersection, kDsrc, rho);
    pass = pass && d < c;
    detail += fmt(rho, 0) + ": DSRC " + fmt(d, 3) + (d < c ? " < " : " >= ") + "CV2X " + fmt(c, 3) + "; ";
  }
  for (const auto& p : {kCv2x, kDsrc}) {
    double prev = 0.0;
    bool mono = true;
    for (double rho : kIxDensities) {
      const double m = g.mean(Scenario::kIntersection, p, rho);
      mono = mono && m >= prev;
      prev = m;
    }
    pass = pass && mono;
    detail += p.name() + (mono ? " nondecreasing" : " NOT nondecreasing") + (p == kCv2x ? ", " : "");
  }
  return {pass, detail};
}

Outcome ix_safety(const Grid& g) {
  int conflicts = 0;
  int gridlocks = 0;
  const auto recs = g.all(Scenario::kIntersection);
  for (const auto& r : recs) {
    conflicts += r.fault ? 1 : 0;
    gridlocks += r.gridlock ? 1 : 0;
  }
  return {conflicts == 0 && gridlocks == 0, std::to_string(recs.size()) + " runs, " + std::to_string(conflicts) +
                                                " with box co-occupancy, " + std::to_string(gridlocks) + " gridlocked"};
}

Outcome platoon_oracle() {
  // fail-safe disabled through the same key=value path the CLI uses
  ScenarioConfig cfg;
  apply_setting(cfg, "fail-safe", "off");
  RngStream r(20240611);
  double worst_mivd = 0.0;
  double worst_btime = 0.0;
  int pass_cases = 0;
  for (int i = 0; i < kPlatoonOracleCases; ++i) {
    auto c = cfg.knobs.platoon;
    c.n = 2 + static_cast<int>(r.uniform() * 9.0);
    c.v_p = 8.0 + 12.0 * r.uniform();
    c.protocol = r.uniform() < 0.5 ? kCv2x : kDsrc;
    c.density_vph = kPlDensities[static_cast<int>(r.uniform() * 5.0)];
    c.seed = r.next_u64() % 100000;
    const auto run = platoon::simulate_platoon(c);
    std::vector<double> delays;
    for (const auto& e : run.timeline) delays.push_back(e.brake_start.value_or(NAN) - run.t0);
    const double em = std::abs(run.record.mivd.value_or(NAN) - oracle::platoon_mivd(delays, c.ivd, c.v_p));
    const double eb = std::abs(run.record.primary_metric - oracle::platoon_btime(delays, c.v_p, c.b_brake));
    worst_mivd = std::max(worst_mivd, em / (c.v_p * c.dt));
    worst_btime = std::max(worst_btime, eb / (2.0 * c.dt));
    if (em <= c.v_p * c.dt && eb <= 2.0 * c.dt) ++pass_cases;
  }
  return {pass_cases == kPlatoonOracleCases,
          std::to_string(pass_cases) + "/" + std::to_string(kPlatoonOracleCases) + " cases; worst error " +
              fmt(worst_mivd, 3) + " of v_p*dt (MIVD), " + fmt(worst_btime, 3) + " of 2*dt (B-Time)"};
}

Outcome platoon_trends(const Grid& g) {
  bool btime_ok = true;
  bool dsrc_falls = true;
  double prev = INFINITY;
  double lo = INFINITY;
  double hi = -INFINITY;
  std::string dsrc_line;
  for (double rho : kPlDensities) {
    btime_ok = btime_ok && g.mean(Scenario::kPlatoon, kCv2x, rho) < g.mean(Scenario::kPlatoon, kDsrc, rho);
    const double md = g.mean_mivd(Scenario::kPlatoon, kDsrc, rho);
    dsrc_falls = dsrc_falls && md < prev;
    prev = md;
    dsrc_line += (dsrc_line.empty() ? "" : "/") + fmt(md);
    const double mc = g.mean_mivd(Scenario::kPlatoon, kCv2x, rho);
    lo = std::min(lo, mc);
    hi = std::max(hi, mc);
  }
  const bool pass = btime_ok && dsrc_falls && hi - lo < kCv2xMivdRange;
  return {pass, std::string("b_time CV2X<DSRC ") + (btime_ok ? "everywhere" : "NOT everywhere") + "; DSRC MIVD " +
                    dsrc_line + "; CV2X MIVD range " + fmt(hi - lo, 3) + " m"};
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string("\"") + V2X_CLI_PATH + "\" " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome cli_determinism() {
  const auto base = fs::temp_directory_path() / "v2xcosim-acceptance";
  fs::remove_all(base);
  const std::vector<std::string> invocations = {
      "sweep --density 250,1500 --seed 1,2 --chart --jobs 0",
      "ramp --protocol cv2x --density 250,750 --theta-deg 24,72 --seed 3 --chart",
      "platoon --protocol dsrc,cv2x --density 250,500,1000 --seed 1 --chart --format json",
  };
  int compared = 0;
  for (std::size_t i = 0; i < invocations.size(); ++i) {
    const auto a = base / ("a" + std::to_string(i));
    const auto b = base / ("b" + std::to_string(i));
    if (run_cli(invocations[i] + " --out \"" + a.string() + "\"") != 0) return {false, "run failed: " + invocations[i]};
    if (run_cli(invocations[i] + " --out \"" + b.string() + "\"") != 0) return {false, "run failed: " + invocations[i]};
    for (const auto& entry : fs::directory_iterator(a)) {
      const auto name = entry.path().filename();
      const auto ext = name.extension().string();
      if (ext != ".csv" && ext != ".svg" && ext != ".json") continue;
      if (!fs::exists(b / name) || slurp(a / name) != slurp(b / name)) return {false, "differs: " + name.string()};
      ++compared;
    }
  }
  fs::remove_all(base);
  return {compared > 0, std::to_string(invocations.size()) + " invocations, " + std::to_string(compared) +
                            " CSV/JSON/SVG files byte-identical"};
}

bool rel_close(double a, double b) { return std::abs(a - b) <= kKraussRel * std::max(1.0, std::abs(b)); }

Outcome krauss_suite() {
  int ok = 0;
  int total = 0;
  auto check = [&](double got, double want) {
    ++total;
    ok += rel_close(got, want) ? 1 : 0;
  };
  check(safe_velocity(10, 10, 1, 4.5, 10), 10.0);
  check(safe_velocity(0, 0, 1, 4.5, 0), 0.0);
  check(safe_velocity(10, 20, 1, 4.5, 10), 10.0 + 10.0 / (10.0 / 4.5 + 1.0));
  check(desired_speed(5, 10, 2, 30, 1.0), 5.0);
  check(desired_speed(100, 29.9, 2, 30, 1.0), 30.0);
  check(desired_speed(13.103, 10, 2.5, 30, 1.0), 12.5);

  RngStream r(7331);
  constexpr double dt = 0.1;
  long steps = 0;
  long collisions = 0;
  while (steps < kCollisionSteps) {
    VehicleState lead;
    VehicleState fol;
    lead.v_max = fol.v_max = 5.0 + 25.0 * r.uniform();
    fol.tau = dt + 1.9 * r.uniform();
    fol.b_decel = lead.b_decel = 2.0 + 7.0 * r.uniform();
    fol.a_max = lead.a_max = 1.0 + 3.0 * r.uniform();
    lead.v = lead.v_max * r.uniform();
    fol.v = fol.v_max * r.uniform();
    fol.s = -lead.length - (fol.v * fol.tau + 0.1 + 30.0 * r.uniform());
    for (int k = 0; k < 1000; ++k, ++steps) {
      const auto next = step_vehicle(fol, LeaderInfo{lead.v, lead.s - lead.length - fol.s}, dt);
      const double u = r.uniform();
      lead.v = std::clamp(lead.v + (u * (lead.a_max + lead.b_decel) - lead.b_decel) * dt, 0.0, lead.v_max);
      lead.s += lead.v * dt;
      fol = next;
      if (lead.s - lead.length - fol.s <= 0.0) ++collisions;
    }
  }
  return {ok == total && collisions == 0, std::to_string(ok) + "/" + std::to_string(total) + " hand values; " +
                                              std::to_string(collisions) + " collisions in " + std::to_string(steps) +
                                              " steps"};
}

}  // namespace

int main() {
  const auto t0 = std::chrono::steady_clock::now();

  Grid g;
  for (const auto& p : {kCv2x, kDsrc}) {
    g.add(Scenario::kRamp, p, 250, 24.0);
    g.add(Scenario::kRamp, p, 2000, 24.0);
  }
  g.add(Scenario::kRamp, kSlow, 2000, 24.0);
  for (double th : {24.0, 48.0, 72.0}) g.add(Scenario::kRamp, kCv2x, 1500, th);
  for (const auto& p : {kCv2x, kDsrc}) {
    for (double rho : kIxDensities) g.add(Scenario::kIntersection, p, rho);
    for (double rho : kPlDensities) g.add(Scenario::kPlatoon, p, rho);
  }
  g.run();

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"protocol fit", protocol_fit},
      {"ramp low-density anchor", [&] { return ramp_anchor(g); }},
      {"ramp crossover", [&] { return ramp_crossover(g); }},
      {"fixed-pair dominance", [&] { return slow_dominance(g); }},
      {"angle monotonicity", [&] { return angle_order(g); }},
      {"intersection equivalence", [&] { return ix_equivalence(g); }},
      {"intersection crossover", [&] { return ix_crossover(g); }},
      {"intersection safety", [&] { return ix_safety(g); }},
      {"platoon oracle", platoon_oracle},
      {"platoon trends", [&] { return platoon_trends(g); }},
      {"cli determinism", cli_determinism},
      {"krauss suite", krauss_suite},
  };

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failed += o.pass ? 0 : 1;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << (i + 1) << ". " << criteria[i].first << ": " << o.detail << "\n";
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::cout << (criteria.size() - static_cast<std::size_t>(failed)) << "/" << criteria.size() << " criteria pass ("
            << fmt(secs, 1) << " s)\n";
  return failed == 0 ? 0 : 1;
}
