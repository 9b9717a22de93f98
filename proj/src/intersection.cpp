#include "v2xcosim/intersection.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

namespace v2x::intersection {

namespace {

constexpr double kEps = 1e-9;
constexpr double kInsertGap = 2.5;  // minimum bumper gap at the spawn point (m)

const Vec2 kDirs[4] = {{0.0, 1.0}, {1.0, 0.0}, {0.0, -1.0}, {-1.0, 0.0}};

// Speed for a slot that opens `t_left` from now, `d` ahead. Slows at a_max to
// a cruise speed v_c with d = v_c*t + (v - v_c)^2 / (2 a_max), re-planned each
// step. If even that arrives early, stop at the edge and wait.
double slot_speed(const VehicleState& st, double d, double t_left, double dt) {
  const double v = st.v;
  const double a = st.a_max;
  if (v * t_left <= d) return d / t_left;
  const double disc = t_left * t_left - 2.0 * (v * t_left - d) / a;
  if (disc < 0.0) return d / t_left;
  const double drop = a * (t_left - std::sqrt(disc));
  if (drop > v) return krauss_speed(st, LeaderInfo{0.0, d}, dt);
  return v - std::min(drop, a * dt);
}

}  // namespace

void IntersectionGeometry::validate() const {
  if (!(box_side > 0.0) || !std::isfinite(box_side)) throw DomainError("intersection: box_side must be > 0");
  if (!(approach_len > box_side / 2.0) || !std::isfinite(approach_len)) {
    throw DomainError("intersection: approach_len must exceed box_side/2");
  }
}

Vec2 approach_position(int approach, double d) {
  if (approach < 0 || approach > 3) throw DomainError("intersection: approach must be 0..3");
  const Vec2 u = kDirs[approach];
  return {u.x * d, u.y * d};
}

double traverse_time(double dist, double v0, double a, double v_max) {
  if (dist <= 0.0) return 0.0;
  v0 = std::clamp(v0, 0.0, v_max);
  const double t_acc = (v_max - v0) / a;
  const double d_acc = 0.5 * (v0 + v_max) * t_acc;
  if (dist <= d_acc) return (std::sqrt(v0 * v0 + 2.0 * a * dist) - v0) / a;
  return t_acc + (dist - d_acc) / v_max;
}

double traverse_speed(double dist, double v0, double a, double v_max) {
  v0 = std::clamp(v0, 0.0, v_max);
  if (dist <= 0.0) return v0;
  return std::min(v_max, std::sqrt(v0 * v0 + 2.0 * a * dist));
}

double estimated_arrival(const SlotRequest& r, const SlotParams& p) {
  return r.sent_at + traverse_time(r.distance, r.speed, p.a_max, p.v_max);
}

ReservationManager::ReservationManager(const IntersectionGeometry& g, const SlotParams& p) : g_(g), p_(p) {
  g_.validate();
}

std::optional<Reservation> ReservationManager::grant_slot(const SlotRequest& r) {
  const Reservation* held = nullptr;
  for (const auto& res : granted_) {
    if (res.vehicle == r.vehicle && std::find(superseded_.begin(), superseded_.end(), res.seq) == superseded_.end()) {
      held = &res;
    }
  }
  if (held != nullptr) {
    if (!r.missed) return std::nullopt;
    superseded_.push_back(held->seq);
  }

  const double est = estimated_arrival(r, p_);
  const double entry = std::max(est, last_exit_);
  double v_entry = traverse_speed(r.distance, r.speed, p_.a_max, p_.v_max);
  if (entry > est + kEps) v_entry = std::min(v_entry, r.distance / (entry - r.sent_at));
  v_entry *= p_.entry_speed_margin;
  const double exit = entry + traverse_time(g_.crossing_len(p_.length), v_entry, p_.a_max, p_.v_max) + p_.guard_s;

  Reservation res{r.vehicle, r.approach, static_cast<int>(granted_.size()), entry, exit};
  granted_.push_back(res);
  last_exit_ = exit;
  return res;
}

std::vector<Reservation> ReservationManager::live(double now) const {
  std::vector<Reservation> out;
  for (const auto& res : granted_) {
    if (res.granted_exit > now &&
        std::find(superseded_.begin(), superseded_.end(), res.seq) == superseded_.end()) {
      out.push_back(res);
    }
  }
  return out;
}

double to_center(const ApproachVehicle& v, const IntersectionGeometry& g) { return g.approach_len - v.state.s; }

double to_box(const ApproachVehicle& v, const IntersectionGeometry& g) {
  return to_center(v, g) - g.box_side / 2.0;
}

bool in_box(const ApproachVehicle& v, const IntersectionGeometry& g) {
  const double front = to_center(v, g);
  const double rear = front + v.state.length;
  return front < g.box_side / 2.0 && rear > -g.box_side / 2.0;
}

std::optional<SlotRequest> request_slot(const ApproachVehicle& v, const IntersectionGeometry& g, double now,
                                        double mhr_km) {
  if (v.grant || v.entered_at) return std::nullopt;
  const double d = to_center(v, g);
  if (!in_range(approach_position(v.state.approach, d), Vec2{}, mhr_km)) return std::nullopt;
  return SlotRequest{v.state.id, v.state.approach, now, std::max(0.0, to_box(v, g)), v.state.v, v.missed};
}

ControlDecision approach_control(const ApproachVehicle& v, std::optional<LeaderInfo> leader,
                                 const IntersectionGeometry& g, double now, double dt, double min_gap) {
  const VehicleState& st = v.state;
  ControlDecision out;
  std::optional<LeaderInfo> lead;
  if (leader) lead = LeaderInfo{leader->v, leader->gap - min_gap};
  double v_next = krauss_speed(st, lead, dt);

  const double d = to_box(v, g);
  if (d <= 0.0 || v.entered_at) {
    out.v_next = v_next;
    return out;
  }

  const double cross = g.crossing_len(st.length);
  bool usable = v.grant.has_value();
  if (usable) {
    const Reservation& res = *v.grant;
    const bool open = now >= res.granted_entry - kEps;
    if (open && now + traverse_time(d + cross, st.v, st.a_max, st.v_max) + dt > res.granted_exit + kEps) {
      out.slot_missed = true;
      usable = false;
    } else if (!open) {
      v_next = std::min(v_next, slot_speed(st, d, res.granted_entry - now, dt));
      // never cross the edge before the slot opens
      if (now + dt < res.granted_entry - kEps) v_next = std::min(v_next, d / dt);
    }
  }
  if (!usable) v_next = std::min(v_next, krauss_speed(st, LeaderInfo{0.0, d}, dt));
  out.v_next = std::max(0.0, v_next);
  return out;
}

IntersectionConfig default_intersection_config() {
  IntersectionConfig c;
  c.vehicle.a_max = 2.5;
  c.vehicle.b_decel = 4.5;
  c.vehicle.tau = 1.0;
  c.vehicle.v_max = 8.33;
  c.vehicle.length = 5.0;
  return c;
}

IntersectionRun simulate_intersection(const IntersectionConfig& config) {
  const auto& g = config.geometry;
  g.validate();
  if (config.n_vehicles < 1) throw DomainError("intersection: n_vehicles must be >= 1");
  if (!(config.arrival_vph > 0.0)) throw DomainError("intersection: arrival_vph must be > 0");
  if (!(config.horizon_s > 0.0) || !(config.dt > 0.0)) throw DomainError("intersection: horizon and dt must be > 0");
  const CommParams comm = protocol_params(config.protocol, config.density_vph);
  const std::size_t n = static_cast<std::size_t>(config.n_vehicles);

  const RngStream root(config.seed);
  struct Arrival {
    double t;
    int approach;
  };
  std::vector<Arrival> arrivals;
  // enough expected arrivals per approach to fill n vehicles several times over
  const double gen_horizon = 60.0 + 4.0 * static_cast<double>(n) * 3600.0 / (4.0 * config.arrival_vph);
  for (int a = 0; a < 4; ++a) {
    auto rng = root.substream("arrivals", static_cast<std::uint64_t>(a));
    for (double t : spawn_arrivals(config.arrival_vph, gen_horizon, rng)) arrivals.push_back({t, a});
  }
  std::stable_sort(arrivals.begin(), arrivals.end(), [](const Arrival& x, const Arrival& y) {
    return x.t != y.t ? x.t < y.t : x.approach < y.approach;
  });
  if (arrivals.size() < n) throw DomainError("intersection: arrival stream too short");
  arrivals.resize(n);

  SlotParams sp;
  sp.length = config.vehicle.length;
  sp.a_max = config.vehicle.a_max;
  sp.v_max = config.vehicle.v_max;
  sp.guard_s = config.dt;
  sp.entry_speed_margin = config.entry_speed_margin;
  ReservationManager manager(g, sp);
  auto manager_rng = root.substream("manager-phase");
  BeaconSchedule manager_schedule = BeaconSchedule::random_phase(0.0, comm.ipg_ms, manager_rng, config.dt);

  IntersectionRun run;
  MetricsRecord& rec = run.record;
  rec.scenario = Scenario::kIntersection;
  rec.protocol = config.protocol;
  rec.density = config.density_vph;
  rec.seed = config.seed;

  std::deque<int> queue[4];
  std::size_t next_arrival = 0;
  std::vector<ApproachVehicle> active;
  std::vector<ApproachVehicle> done;
  std::size_t cleared = 0;
  SimClock clock(config.dt);

  while (true) {
    const double t = clock.t();
    while (next_arrival < n && arrivals[next_arrival].t <= t) {
      queue[arrivals[next_arrival].approach].push_back(static_cast<int>(next_arrival));
      ++next_arrival;
    }
    for (int a = 0; a < 4; ++a) {
      if (queue[a].empty()) continue;
      const ApproachVehicle* last = nullptr;
      for (const auto& v : active) {
        if (v.state.approach == a && (last == nullptr || v.state.s < last->state.s)) last = &v;
      }
      VehicleState st = config.vehicle;
      double v_ins = st.v_max;
      if (last != nullptr) {
        const double gap = last->state.s - last->state.length;
        if (gap < kInsertGap) continue;
        v_ins = std::min(v_ins, safe_velocity(last->state.v, gap, st.tau, st.b_decel, 0.5 * (st.v_max + last->state.v)));
      }
      const int id = queue[a].front();
      queue[a].pop_front();
      st.id = id;
      st.s = 0.0;
      st.v = v_ins;
      st.lane = Lane::kApproach;
      st.approach = a;
      st.spawn_time = t;
      ApproachVehicle av;
      av.state = st;
      av.arrival_time = arrivals[static_cast<std::size_t>(id)].t;
      auto phase_rng = root.substream("beacon-phase", static_cast<std::uint64_t>(id));
      av.schedule = BeaconSchedule::random_phase(t, comm.ipg_ms, phase_rng, config.dt);
      active.push_back(std::move(av));
    }

    if (cleared == n) break;
    if (t >= config.horizon_s) {
      rec.gridlock = true;
      break;
    }

    // requests ride vehicle beacons, FCFS by (send time, id)
    std::sort(active.begin(), active.end(),
              [](const ApproachVehicle& x, const ApproachVehicle& y) { return x.state.id < y.state.id; });
    for (auto& v : active) {
      if (!v.schedule.fire(clock.step_index())) continue;
      if (auto req = request_slot(v, g, t, comm.mhr_km)) {
        run.requests.push_back(*req);
        manager.grant_slot(*req);
      }
    }
    if (manager_schedule.fire(clock.step_index())) {
      for (const auto& res : manager.live(t)) {
        for (auto& v : active) {
          if (v.state.id != res.vehicle || v.entered_at || res.seq <= v.ignore_upto_seq) continue;
          if (in_range(approach_position(v.state.approach, to_center(v, g)), Vec2{}, comm.mhr_km)) {
            v.grant = res;
            v.missed = false;
          }
        }
      }
    }

    std::vector<double> v_next(active.size());
    for (std::size_t i = 0; i < active.size(); ++i) {
      auto& v = active[i];
      std::optional<LeaderInfo> leader;
      for (const auto& o : active) {
        if (o.state.approach != v.state.approach || o.state.s <= v.state.s) continue;
        const double gap = o.state.s - o.state.length - v.state.s;
        if (!leader || gap < leader->gap) leader = LeaderInfo{o.state.v, gap};
      }
      const ControlDecision c = approach_control(v, leader, g, t, config.dt, config.min_gap_m);
      if (c.slot_missed) {
        v.ignore_upto_seq = v.grant->seq;
        v.grant.reset();
        v.missed = true;
      }
      v_next[i] = c.v_next;
    }

    const double t_next = t + config.dt;
    int inside = 0;
    for (std::size_t i = 0; i < active.size(); ++i) {
      auto& v = active[i];
      v.state.v = v_next[i];
      v.state.s += v_next[i] * config.dt;
      if (!v.entered_at && to_box(v, g) < 0.0) {
        v.entered_at = t_next;
        if (!v.grant || t_next < v.grant->granted_entry - kEps) ++run.early_entries;
      }
      if (v.entered_at && !v.cleared_at && to_center(v, g) + v.state.length <= -g.box_side / 2.0) {
        v.cleared_at = t_next;
        ++cleared;
        if (v.grant && t_next > v.grant->granted_exit + kEps) ++run.late_exits;
      }
      if (in_box(v, g)) ++inside;
    }
    if (inside > 1) ++run.box_conflicts;

    for (auto it = active.begin(); it != active.end();) {
      // leave once a full approach length past the center
      if (to_center(*it, g) < -g.approach_len) {
        done.push_back(std::move(*it));
        it = active.erase(it);
      } else {
        ++it;
      }
    }
    clock.advance();
  }

  for (auto& v : active) done.push_back(std::move(v));
  std::sort(done.begin(), done.end(),
            [](const ApproachVehicle& x, const ApproachVehicle& y) { return x.state.id < y.state.id; });

  double last_clear = arrivals.front().t;
  for (const auto& v : done) {
    VehicleRecord vr;
    vr.id = v.state.id;
    vr.role = "approach-" + std::to_string(v.state.approach);
    vr.spawn_time = v.arrival_time;
    vr.finish_time = v.cleared_at;
    if (v.cleared_at) {
      vr.value = *v.cleared_at - v.arrival_time;
      last_clear = std::max(last_clear, *v.cleared_at);
    }
    rec.vehicles.push_back(std::move(vr));
  }
  // queued vehicles that never spawned still count toward the record
  for (int a = 0; a < 4; ++a) {
    for (int id : queue[a]) {
      VehicleRecord vr;
      vr.id = id;
      vr.role = "approach-" + std::to_string(a);
      vr.spawn_time = arrivals[static_cast<std::size_t>(id)].t;
      rec.vehicles.push_back(std::move(vr));
    }
  }
  std::sort(rec.vehicles.begin(), rec.vehicles.end(),
            [](const VehicleRecord& x, const VehicleRecord& y) { return x.id < y.id; });

  rec.primary_metric = last_clear - arrivals.front().t;
  rec.fault = run.box_conflicts > 0;
  run.reservations = manager.granted();
  return run;
}

MetricsRecord run_intersection(const IntersectionConfig& config) { return simulate_intersection(config).record; }

}  // namespace v2x::intersection
