#pragma once

// Run plans: one entry per (scenario, protocol, density, theta, seed), executed
// serially or across OpenMP threads with results in plan order.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "v2xcosim/intersection.hpp"
#include "v2xcosim/metrics.hpp"
#include "v2xcosim/platoon.hpp"
#include "v2xcosim/ramp.hpp"

namespace v2x {

struct RunSpec {
  Scenario scenario = Scenario::kRamp;
  ProtocolModel protocol;
  double density = 0.0;
  std::optional<double> theta_deg;  // ramp only
  std::uint64_t seed = 1;
};

/// Per-scenario templates; a run overrides protocol, density, theta and seed.
struct ScenarioKnobs {
  ramp::RampConfig ramp = ramp::default_ramp_config();
  intersection::IntersectionConfig intersection = intersection::default_intersection_config();
  platoon::PlatoonConfig platoon;
};

struct RunPlan {
  std::vector<RunSpec> runs;
  ScenarioKnobs knobs;
};

/// One line per run, e.g. "ramp CV2X density=250.0000 theta=24.0000 seed=1".
std::string describe_run(const RunSpec& run);

MetricsRecord execute_run(const RunSpec& run, const ScenarioKnobs& knobs);

/// Reference executor.
std::vector<MetricsRecord> run_plan_serial(const RunPlan& plan);
/// Same records as run_plan_serial, computed on up to `jobs` threads (0 = all).
std::vector<MetricsRecord> run_plan_parallel(const RunPlan& plan, int jobs);

}  // namespace v2x
