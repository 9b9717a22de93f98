#pragma once

// Per-run results and their CSV / JSON / text / SVG renderings.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "v2xcosim/comm_model.hpp"

namespace v2x {

enum class Scenario { kRamp, kIntersection, kPlatoon };

std::string scenario_name(Scenario s);  // "ramp", "intersection", "platoon"
std::optional<Scenario> parse_scenario(std::string_view text);

struct VehicleRecord {
  int id = 0;
  std::string role;  // "ramp", "mainline", "approach-2", "platoon-3", ...
  double spawn_time = 0.0;
  std::optional<double> finish_time;
  std::optional<double> value;  // road time, exit time, stop time
};

struct MetricsRecord {
  Scenario scenario = Scenario::kRamp;
  ProtocolModel protocol;
  double density = 0.0;
  std::optional<double> theta_deg;  // ramp only
  std::uint64_t seed = 0;
  double primary_metric = 0.0;  // road time | total time | brake time (s)
  std::optional<double> mivd;   // platoon with n >= 2
  std::optional<double> brake_distance;
  bool gridlock = false;
  bool fault = false;
  std::vector<VehicleRecord> vehicles;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// "CV2X", "DSRC", or "CUSTOM(0.0100km;1000.0000ms)"; the CSV protocol column.
std::string protocol_label(const ProtocolModel& p);
std::optional<ProtocolModel> parse_protocol_label(std::string_view text);

inline constexpr const char* kCsvHeader = "scenario,protocol,density,theta_deg,seed,metric_s,mivd_m,gridlock,fault";

/// Stable report order: scenario, protocol (CV2X, DSRC, CUSTOM), density, theta, seed.
std::vector<MetricsRecord> sorted_for_output(std::span<const MetricsRecord> records);

std::string to_csv(std::span<const MetricsRecord> records);
std::string to_json(std::span<const MetricsRecord> records);

/// Writes CSV (or the JSON mirror). Throws IoError naming the path.
void write_results(std::span<const MetricsRecord> records, const std::filesystem::path& path, bool json = false);

/// Parses the CSV produced by to_csv. Per-vehicle rows are not part of the
/// format and come back empty. Throws IoError on malformed input.
std::vector<MetricsRecord> parse_csv(const std::string& text);

/// Aligned text table, mean and sample stddev across seeds per cell.
std::string summarize(std::span<const MetricsRecord> records);

enum class ChartMetric { kPrimary, kMivd };

std::string chart_metric_name(Scenario s, ChartMetric m);  // e.g. "road_time", "mivd"

/// SVG line chart, x = density, one polyline per protocol (per protocol and
/// angle when several angles are present), mean over seeds. Records must share
/// one scenario. Throws DomainError when fewer than two densities are present.
std::string render_chart_svg(std::span<const MetricsRecord> records, ChartMetric metric);
void render_chart(std::span<const MetricsRecord> records, ChartMetric metric, const std::filesystem::path& path);

}  // namespace v2x
