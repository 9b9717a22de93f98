#pragma once

// Straight-road platoon emergency brake. The head brakes, the brake flag
// travels on beacons, and followers keep a Krauss fallback on the gap they
// measure to their predecessor.

#include <cstdint>
#include <optional>
#include <vector>

#include "v2xcosim/comm_model.hpp"
#include "v2xcosim/metrics.hpp"
#include "v2xcosim/sim_core.hpp"

namespace v2x::platoon {

enum class Relay {
  kPositional,  // a vehicle hears the flag only from its predecessor
  kBroadcast,   // from any flagged vehicle in range
};

struct PlatoonConfig {
  ProtocolModel protocol = ProtocolModel::cv2x();
  double density_vph = 250.0;
  std::uint64_t seed = 1;
  int n = 8;
  double veh_len = 20.0;
  double ivd = 10.0;  // bumper-to-bumper gap at cruise
  double road_len = 10000.0;
  double v_p = 14.0;
  double b_brake = 4.5;
  double tau = 0.1;  // fallback reaction time; cruise needs ivd >= v_p * tau
  double warmup_s = 5.0;
  double max_brake_s = 120.0;  // gridlock if not all stopped by then
  double dt = kDefaultDt;
  Relay relay = Relay::kPositional;
  bool fail_safe = true;

  void validate() const;  // throws DomainError
};

struct PlatoonVehicle {
  VehicleState state;  // s: front position on the road
  BeaconSchedule schedule;
  BeaconTable table;
  std::optional<double> brake_start;
  std::optional<double> stop_time;
  double s_at_brake = 0.0;  // position when the head started braking
};

/// Sets flags from beacons that arrived this step. Flags never clear.
void propagate_brake(std::vector<PlatoonVehicle>& platoon, Relay relay, double now);

struct BrakeOutcome {
  bool fallback_bound = false;  // the Krauss fallback set the speed
};

/// Advances one vehicle by dt. A flagged vehicle brakes at b_brake with exact
/// constant-deceleration kinematics and stamps stop_time at the instant it
/// halts. The fallback caps speed against the measured predecessor gap.
BrakeOutcome brake_dynamics(PlatoonVehicle& v, std::optional<LeaderInfo> predecessor, double b_brake, bool fail_safe,
                            double now, double dt);

struct TimelineEntry {
  std::optional<double> brake_start;
  std::optional<double> stop_time;
  double stop_position = 0.0;
};

struct PlatoonRun {
  MetricsRecord record;
  double t0 = 0.0;  // head brake instant
  std::vector<TimelineEntry> timeline;  // head first
  bool fallback_engaged = false;
  double min_gap_seen = 0.0;  // smallest gap at any step (m)
};

PlatoonRun simulate_platoon(const PlatoonConfig& config);

/// b_time = last stop - head brake start; mivd = smallest gap at full stop.
MetricsRecord run_platoon(const PlatoonConfig& config);

}  // namespace v2x::platoon
