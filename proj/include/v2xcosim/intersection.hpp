#pragma once

// Four-approach intersection. A manager at the center hands out FCFS,
// mutually exclusive box slots. Requests ride vehicle beacons and grants ride
// the manager's beacons, so both obey the protocol's range and gap.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "v2xcosim/comm_model.hpp"
#include "v2xcosim/metrics.hpp"
#include "v2xcosim/sim_core.hpp"

namespace v2x::intersection {

struct IntersectionGeometry {
  double approach_len = 100.0;  // spawn point to the center
  double box_side = 10.0;

  void validate() const;  // throws DomainError

  /// Distance from the box edge to the point where a vehicle of `length` has
  /// fully left the box.
  double crossing_len(double length) const { return box_side + length; }
};

/// Planar position of a point `d` meters upstream of the center on approach
/// 0..3 (north, east, south, west). Negative d lies past the center.
Vec2 approach_position(int approach, double d);

/// Minimum time to cover `dist` from speed v0 accelerating at `a` up to v_max.
double traverse_time(double dist, double v0, double a, double v_max);
/// Speed reached after covering `dist` that way.
double traverse_speed(double dist, double v0, double a, double v_max);

struct SlotRequest {
  int vehicle = 0;
  int approach = 0;
  double sent_at = 0.0;
  double distance = 0.0;  // front to the box edge
  double speed = 0.0;
  bool missed = false;  // the sender gave up its previous slot
};

struct Reservation {
  int vehicle = 0;
  int approach = 0;
  int seq = 0;  // creation order, unique
  double granted_entry = 0.0;
  double granted_exit = 0.0;
};

struct SlotParams {
  double length = 5.0;
  double a_max = 2.5;
  double v_max = 8.33;
  double guard_s = kDefaultDt;  // covers step quantization of the exit
  double entry_speed_margin = 0.8;
};

/// Earliest arrival at the box edge: kinematic lower bound from the request.
double estimated_arrival(const SlotRequest& r, const SlotParams& p);

class ReservationManager {
 public:
  ReservationManager(const IntersectionGeometry& g, const SlotParams& p);

  /// FCFS grant. A request from a vehicle that still holds a live slot gets
  /// nothing new unless it reports a miss, which supersedes the old slot.
  std::optional<Reservation> grant_slot(const SlotRequest& request);

  /// Slots that can still be used at `now`, in creation order.
  std::vector<Reservation> live(double now) const;
  /// Every slot ever granted, in creation order.
  const std::vector<Reservation>& granted() const { return granted_; }

 private:
  IntersectionGeometry g_;
  SlotParams p_;
  std::vector<Reservation> granted_;
  std::vector<int> superseded_;  // seq
  double last_exit_ = 0.0;
};

struct ApproachVehicle {
  VehicleState state;  // s: front position from the spawn point
  double arrival_time = 0.0;
  BeaconSchedule schedule;
  std::optional<Reservation> grant;
  int ignore_upto_seq = -1;  // grants the vehicle already gave up
  bool missed = false;       // next request reports a miss
  std::optional<double> entered_at;
  std::optional<double> cleared_at;
};

/// Distance from the front to the center (positive upstream).
double to_center(const ApproachVehicle& v, const IntersectionGeometry& g);
/// Distance from the front to the box edge; <= 0 once inside or past.
double to_box(const ApproachVehicle& v, const IntersectionGeometry& g);
bool in_box(const ApproachVehicle& v, const IntersectionGeometry& g);

/// Request carried by this beacon, if the vehicle needs a slot and the
/// manager is within range.
std::optional<SlotRequest> request_slot(const ApproachVehicle& v, const IntersectionGeometry& g, double now,
                                        double mhr_km);

struct ControlDecision {
  double v_next = 0.0;
  bool slot_missed = false;
};

/// Speed for the next step. With a grant, cruise at remaining distance over
/// remaining time and never cross the edge before the slot opens. A slot that
/// can no longer be cleared in time is given up. Without a grant the box edge
/// is a stopped leader. Same-lane leaders are followed with a standstill gap.
ControlDecision approach_control(const ApproachVehicle& v, std::optional<LeaderInfo> leader,
                                 const IntersectionGeometry& g, double now, double dt, double min_gap);

struct IntersectionConfig {
  ProtocolModel protocol = ProtocolModel::cv2x();
  double density_vph = 100.0;  // sets the protocol's range and gap only
  double arrival_vph = 700.0;  // Poisson arrivals per approach
  std::uint64_t seed = 1;
  IntersectionGeometry geometry;
  int n_vehicles = 20;
  double horizon_s = 600.0;
  double dt = kDefaultDt;
  double min_gap_m = 2.5;
  double entry_speed_margin = 0.8;
  VehicleState vehicle;
};

IntersectionConfig default_intersection_config();

struct IntersectionRun {
  MetricsRecord record;
  int box_conflicts = 0;  // steps with two vehicles inside the box
  int early_entries = 0;  // entries before the granted slot
  int late_exits = 0;     // exits after the granted slot
  std::vector<SlotRequest> requests;  // in manager processing order
  std::vector<Reservation> reservations;
};

IntersectionRun simulate_intersection(const IntersectionConfig& config);

/// Total time from the first arrival until the last vehicle has cleared the box.
MetricsRecord run_intersection(const IntersectionConfig& config);

}  // namespace v2x::intersection
