#include "v2xcosim/sweep.hpp"

#include <cstdio>
#include <exception>

#include <omp.h>

namespace v2x {

std::string describe_run(const RunSpec& run) {
  char buf[160];
  std::string text = scenario_name(run.scenario) + " " + protocol_label(run.protocol);
  std::snprintf(buf, sizeof buf, " density=%.4f", run.density);
  text += buf;
  if (run.theta_deg) {
    std::snprintf(buf, sizeof buf, " theta=%.4f", *run.theta_deg);
    text += buf;
  }
  text += " seed=" + std::to_string(run.seed);
  return text;
}

MetricsRecord execute_run(const RunSpec& run, const ScenarioKnobs& knobs) {
  switch (run.scenario) {
    case Scenario::kRamp: {
      auto c = knobs.ramp;
      c.protocol = run.protocol;
      c.density_vph = run.density;
      c.seed = run.seed;
      if (run.theta_deg) c.geometry.theta_deg = *run.theta_deg;
      return ramp::run_ramp(c);
    }
    case Scenario::kIntersection: {
      auto c = knobs.intersection;
      c.protocol = run.protocol;
      c.density_vph = run.density;
      c.seed = run.seed;
      return intersection::run_intersection(c);
    }
    case Scenario::kPlatoon: {
      auto c = knobs.platoon;
      c.protocol = run.protocol;
      c.density_vph = run.density;
      c.seed = run.seed;
      return platoon::run_platoon(c);
    }
  }
  throw DomainError("execute_run: unknown scenario");
}

std::vector<MetricsRecord> run_plan_serial(const RunPlan& plan) {
  std::vector<MetricsRecord> out;
  out.reserve(plan.runs.size());
  for (const auto& run : plan.runs) out.push_back(execute_run(run, plan.knobs));
  return out;
}

std::vector<MetricsRecord> run_plan_parallel(const RunPlan& plan, int jobs) {
  const auto n = static_cast<std::int64_t>(plan.runs.size());
  std::vector<MetricsRecord> out(plan.runs.size());
  std::vector<std::exception_ptr> errors(plan.runs.size());
  const int threads = jobs > 0 ? jobs : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
  for (std::int64_t i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    try {
      out[k] = execute_run(plan.runs[k], plan.knobs);
    } catch (...) {
      errors[k] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

}  // namespace v2x
