// Times the serial and OpenMP executors on the full three-scenario sweep.
// Usage: v2xcosim-bench [seeds] [jobs]

#include <omp.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <string>

#include "v2xcosim/config.hpp"
#include "v2xcosim/sweep.hpp"

using namespace v2x;

namespace {

template <class F>
double seconds(F&& f) {
  const auto t0 = std::chrono::steady_clock::now();
  f();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

int main(int argc, char** argv) {
  const int seeds = argc > 1 ? std::atoi(argv[1]) : 5;
  const int jobs = argc > 2 ? std::atoi(argv[2]) : 0;
  if (seeds < 1 || jobs < 0) {
    std::fprintf(stderr, "usage: v2xcosim-bench [seeds>=1] [jobs>=0]\n");
    return 1;
  }

  std::string seed_list;
  for (int s = 1; s <= seeds; ++s) seed_list += (s > 1 ? "," : "") + std::to_string(s);
  ScenarioConfig config;
  apply_setting(config, "density", "250,500,1000,1500,2000");
  apply_setting(config, "seed", seed_list);
  const RunPlan plan = build_plan(config);

  std::vector<MetricsRecord> serial;
  std::vector<MetricsRecord> parallel;
  const double t_serial = seconds([&] { serial = run_plan_serial(plan); });
  const double t_parallel = seconds([&] { parallel = run_plan_parallel(plan, jobs); });
  const bool same = to_csv(serial) == to_csv(parallel);

  std::printf("runs       %zu\n", plan.runs.size());
  std::printf("threads    %d\n", jobs == 0 ? omp_get_max_threads() : jobs);
  std::printf("serial     %.3f s\n", t_serial);
  std::printf("parallel   %.3f s\n", t_parallel);
  std::printf("speedup    %.2fx\n", t_serial / t_parallel);
  std::printf("identical  %s\n", same ? "yes" : "NO");
  return same ? 0 : 1;
}
