#pragma once

// Scenario configuration shared by the command line and key=value files.
// Keys match the long flag names; '_' and '-' are interchangeable.

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "v2xcosim/sweep.hpp"

namespace v2x {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class OutputFormat { kCsv, kJson };

struct ScenarioConfig {
  std::optional<Scenario> scenario;  // none: sweep all three
  std::vector<ProtocolKind> protocols;  // empty: CV2X and DSRC
  std::optional<double> custom_mhr_km;
  std::optional<double> custom_ipg_ms;
  std::vector<double> densities;
  std::vector<double> thetas;  // ramp only; empty: the ramp default
  std::vector<std::uint64_t> seeds;
  std::optional<double> horizon_s;
  std::string out_dir = "out";
  OutputFormat format = OutputFormat::kCsv;
  bool chart = false;
  int jobs = 1;
  ScenarioKnobs knobs;
};

using Settings = std::vector<std::pair<std::string, std::string>>;

/// Every accepted key, in canonical form.
const std::vector<std::string>& config_keys();

/// Parses key=value lines. Blank lines and lines starting with '#' are
/// skipped. Throws UsageError naming the line on anything else.
Settings parse_config_text(std::string_view text);

/// Applies one setting. Throws UsageError for unknown keys and malformed values.
void apply_setting(ScenarioConfig& config, std::string_view key, std::string_view value);

/// Validates and expands the grid in the order scenario, protocol, density,
/// theta, seed. Throws UsageError before anything runs.
RunPlan build_plan(const ScenarioConfig& config);

}  // namespace v2x
