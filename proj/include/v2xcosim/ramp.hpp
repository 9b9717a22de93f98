#pragma once

// Angled on-ramp merge. Ramp and mainline vehicles are projected onto one
// virtual axis (merge point at 0, upstream negative) and each follows its
// virtual predecessor. Cross-leg awareness comes only from beacons.

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "v2xcosim/comm_model.hpp"
#include "v2xcosim/metrics.hpp"
#include "v2xcosim/sim_core.hpp"

namespace v2x::ramp {

struct RampGeometry {
  double mainline_pre = 100.0;
  double post_merge = 150.0;
  double ramp_len = 100.0;
  double theta_deg = 24.0;

  void validate() const;  // throws DomainError
};

/// Straight-line distance between a mainline vehicle d_m before the merge
/// point and a ramp vehicle d_r before it, legs meeting at theta.
double ramp_euclid(double d_m, double d_r, double theta_deg);

/// Virtual mainline coordinate of a ramp vehicle d_r before the merge point.
double project_ramp(double d_r);

struct RampVehicle {
  VehicleState state;
  bool from_ramp = false;
  double insert_time = 0.0;
  std::optional<double> merge_time;
  BeaconTable table;
  BeaconSchedule schedule;
  int clearance_for = -1;  // cross-leg predecessor the merge decision refers to
  bool cleared = false;
  double held_since = -1.0;  // time it came to rest at the merge line, if waiting there
  std::array<Vec2, 3> recent_pos{};  // own position at the last three steps, newest first
  struct SilenceBound {
    double heard_at = 0.0;  // sent_at of the last beacon heard
    int missed = 0;         // expected beacons missed since then
    double x_min = 0.0;
  };
  std::map<int, SilenceBound> silence;  // per sender
};

struct MergePolicy {
  /// Projection window: distance before the merge point inside which
  /// crossing it needs a decision based on a fresh beacon.
  double decision_zone_m = 30.0;
  /// Standstill distance kept to any leader on top of the Krauss gap.
  double min_gap_m = 2.5;
  /// Deceleration used to plan a stop at the merge point (m/s^2).
  double plan_decel = 1.0;
};

/// Virtual coordinate: 0 at the merge point, negative upstream.
double virtual_x(const RampVehicle& v, const RampGeometry& g);
/// Planar position used for range checks.
Vec2 ramp_position(const RampVehicle& v, const RampGeometry& g);
/// True if `follower` can measure the gap to `leader` directly: same leg of
/// origin, or both on the mainline lane (which continues through the merge).
bool senses(const RampVehicle& follower, const RampVehicle& leader, const RampGeometry& g);

/// Ahead-first ordering; ties go to the lower id.
void sort_virtual(std::vector<RampVehicle>& vehicles, const RampGeometry& g);

/// Worst case for a neighbor that may have braked at `b` since its beacon.
NeighborEstimate conservative_estimate(const NeighborEntry& entry, double now, double b);

/// Smallest virtual x >= x0 on the path of a vehicle (ramp leg if
/// `on_ramp_leg`, then the mainline) that lies outside `range_m` of `listener`.
double first_out_of_range(double x0, bool on_ramp_leg, Vec2 listener, double range_m, const RampGeometry& g);

struct MergeStepResult {
  bool overlap = false;  // two vehicles share road space on one lane
};

/// One control + kinematics step over vehicles sorted with sort_virtual.
/// Re-homes ramp vehicles to the mainline once their front passes the merge
/// point and stamps merge_time = now + dt.
/// A sender that misses an expected beacon was out of range when it was due,
/// which bounds how far back it can be.
MergeStepResult merge_step(std::vector<RampVehicle>& vehicles, const RampGeometry& g, const CommParams& comm,
                           double now, double dt, const MergePolicy& policy = {});

/// Broadcasts beacons due at `step` and updates receivers' tables.
void exchange_beacons(std::vector<RampVehicle>& vehicles, const RampGeometry& g, std::int64_t step, double dt,
                      double mhr_km);

struct RampConfig {
  ProtocolModel protocol = ProtocolModel::cv2x();
  double density_vph = 250.0;
  std::uint64_t seed = 1;
  RampGeometry geometry;
  double horizon_s = 600.0;
  double warmup_s = 60.0;
  double drain_s = 600.0;  // extra time after the last arrival before gridlock is declared
  double dt = kDefaultDt;
  double ramp_share = 0.5;
  MergePolicy policy;
  VehicleState vehicle;  // template: a_max, b, tau, v_max, length
};

RampConfig default_ramp_config();

MetricsRecord run_ramp(const RampConfig& config);

}  // namespace v2x::ramp
