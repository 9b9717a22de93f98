#include "v2xcosim/ramp.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numbers>

namespace v2x::ramp {

namespace {

constexpr double kInsertGap = 2.5;  // minimum bumper gap at the entry point (m)

double deg2rad(double d) { return d * std::numbers::pi / 180.0; }

struct Interval {
  double lo;
  double hi;
};

bool overlaps(Interval a, Interval b) { return std::min(a.hi, b.hi) - std::max(a.lo, b.lo) > 1e-9; }

// Road space of a vehicle split into (own leg, downstream) parts.
std::pair<std::optional<Interval>, std::optional<Interval>> footprint(const RampVehicle& v, const RampGeometry& g) {
  const double x = virtual_x(v, g);
  const double rear = x - v.state.length;
  std::optional<Interval> leg;
  std::optional<Interval> down;
  if (rear < 0.0) leg = Interval{rear, std::min(x, 0.0)};
  if (x > 0.0) down = Interval{std::max(rear, 0.0), x};
  return {leg, down};
}

// Where a missed beacon proves `sender` must be by now; nullopt if nothing
// new can be proven this step.
std::optional<double> silence_floor(RampVehicle& me, const RampVehicle& sender, const NeighborEntry& entry,
                                    const RampGeometry& g, const CommParams& comm, double now, double dt) {
  const double ipg = comm.ipg_s();
  auto& sb = me.silence[sender.state.id];
  if (sb.heard_at != entry.sent_at) sb = {entry.sent_at, 0, -std::numeric_limits<double>::infinity()};
  const int missed = static_cast<int>(std::floor((now - entry.sent_at - dt + 1e-9) / ipg));
  if (missed > sb.missed) {
    sb.missed = missed;
    // the missed beacon went out on a step within (due - dt, due + dt)
    const double due = entry.sent_at + missed * ipg;
    const int newest = std::max(0, static_cast<int>(std::floor((now - due - dt) / dt + 1e-9)));
    const int oldest = static_cast<int>(std::ceil((now - due + dt) / dt - 1e-9));
    if (oldest < static_cast<int>(me.recent_pos.size())) {
      double floor_x = std::numeric_limits<double>::infinity();
      for (int i = newest; i <= oldest; ++i) {
        floor_x = std::min(floor_x, first_out_of_range(entry.payload.s, sender.from_ramp, me.recent_pos[i],
                                                       comm.mhr_m(), g));
      }
      sb.x_min = std::max(sb.x_min, floor_x);
    }
  }
  if (!std::isfinite(sb.x_min)) return std::nullopt;
  return sb.x_min;
}

}  // namespace

void RampGeometry::validate() const {
  if (!(theta_deg > 0.0 && theta_deg < 90.0)) throw DomainError("ramp: theta must be in (0, 90) degrees");
  if (!(mainline_pre > 0.0 && post_merge > 0.0 && ramp_len > 0.0)) {
    throw DomainError("ramp: segment lengths must be > 0");
  }
}

double ramp_euclid(double d_m, double d_r, double theta_deg) {
  if (d_m < 0.0 || d_r < 0.0) throw DomainError("ramp_euclid: distances must be >= 0");
  const double sq = d_m * d_m + d_r * d_r - 2.0 * d_m * d_r * std::cos(deg2rad(theta_deg));
  return std::sqrt(std::max(0.0, sq));
}

double project_ramp(double d_r) {
  if (d_r < 0.0) throw DomainError("project_ramp: distance must be >= 0");
  return -d_r;
}

double virtual_x(const RampVehicle& v, const RampGeometry& g) {
  return v.state.lane == Lane::kRamp ? v.state.s - g.ramp_len : v.state.s - g.mainline_pre;
}

Vec2 ramp_position(const RampVehicle& v, const RampGeometry& g) {
  const double x = virtual_x(v, g);
  if (v.state.lane != Lane::kRamp || x >= 0.0) return {x, 0.0};
  const double th = deg2rad(g.theta_deg);
  return {x * std::cos(th), x * std::sin(th)};
}

bool senses(const RampVehicle& follower, const RampVehicle& leader, const RampGeometry& g) {
  if (follower.from_ramp == leader.from_ramp) return true;
  // the mainline lane continues through the merge; the ramp joins it
  const bool follower_on_mainline = !follower.from_ramp || virtual_x(follower, g) >= 0.0;
  const bool leader_on_mainline = !leader.from_ramp || virtual_x(leader, g) >= 0.0;
  return follower_on_mainline && leader_on_mainline;
}

void sort_virtual(std::vector<RampVehicle>& vehicles, const RampGeometry& g) {
  std::stable_sort(vehicles.begin(), vehicles.end(), [&](const RampVehicle& a, const RampVehicle& b) {
    const double xa = virtual_x(a, g);
    const double xb = virtual_x(b, g);
    if (xa != xb) return xa > xb;
    return a.state.id < b.state.id;
  });
}

NeighborEstimate conservative_estimate(const NeighborEntry& entry, double now, double b) {
  const double age = std::max(0.0, now - entry.sent_at);
  const double v0 = entry.payload.v;
  if (v0 - b * age > 0.0) return {entry.payload.s + v0 * age - 0.5 * b * age * age, v0 - b * age};
  return {entry.payload.s + v0 * v0 / (2.0 * b), 0.0};
}

double first_out_of_range(double x0, bool on_ramp_leg, Vec2 listener, double range_m, const RampGeometry& g) {
  // on a leg through the origin with direction u, |x*u - F| <= R iff |x - u.F| <= h
  auto leave = [&](Vec2 u, double x, double hi) -> std::optional<double> {
    const double c = u.x * listener.x + u.y * listener.y;
    const double h2 = range_m * range_m - (listener.x * listener.x + listener.y * listener.y) + c * c;
    if (h2 < 0.0) return x;
    const double h = std::sqrt(h2);
    if (x < c - h || x > c + h) return x;
    if (c + h < hi) return c + h;
    return std::nullopt;
  };
  double x = x0;
  if (on_ramp_leg && x < 0.0) {
    const double th = deg2rad(g.theta_deg);
    if (auto r = leave({std::cos(th), std::sin(th)}, x, 0.0)) return *r;
    x = 0.0;
  }
  return *leave({1.0, 0.0}, x, std::numeric_limits<double>::infinity());
}

MergeStepResult merge_step(std::vector<RampVehicle>& vehicles, const RampGeometry& g, const CommParams& comm,
                           double now, double dt, const MergePolicy& policy) {
  const std::size_t n = vehicles.size();
  std::vector<double> next_v(n);

  for (std::size_t i = 0; i < n; ++i) {
    RampVehicle& me = vehicles[i];
    const double x = virtual_x(me, g);
    const bool in_window = x >= -policy.decision_zone_m && x < 0.0;
    double v = krauss_speed(me.state, std::nullopt, dt);
    bool hard_stop = false;

    auto follow = [&](double lead_v, double gap, bool sensed) {
      if (sensed && gap <= 0.0) hard_stop = true;
      v = std::min(v, krauss_speed(me.state, LeaderInfo{lead_v, std::max(0.0, gap - policy.min_gap_m)}, dt));
    };
    // come to rest at the merge point at a comfortable deceleration
    auto plan_stop = [&] {
      follow(0.0, -x, false);
      v = std::min(v, std::sqrt(2.0 * policy.plan_decel * std::max(0.0, -x - policy.min_gap_m)));
    };

    if (i > 0) {
      const RampVehicle& pred = vehicles[i - 1];
      if (senses(me, pred, g)) {
        follow(pred.state.v, virtual_x(pred, g) - pred.state.length - x, true);
      } else if (const auto* entry = me.table.find(pred.state.id); entry != nullptr) {
        auto est = conservative_estimate(*entry, now, me.state.b_decel);
        if (auto floor_x = silence_floor(me, pred, *entry, g, comm, now, dt)) est.s = std::max(est.s, *floor_x);
        const double gap = est.s - pred.state.length - x;
        if (gap > 0.0) {
          follow(est.v, gap, false);
        } else {
          // side by side on different legs: yield at the merge point
          follow(0.0, -x, false);
        }
        if (in_window) {
          // decisions are taken on fresh news only and must hold until the next beacon
          if (me.clearance_for != pred.state.id) {
            me.clearance_for = pred.state.id;
            me.cleared = false;
          }
          if (entry->sent_at >= now - 1e-9) {
            const double ipg = comm.ipg_s();
            const double closing = 0.5 * me.state.b_decel * ipg * ipg + std::max(0.0, me.state.v - est.v) * ipg;
            me.cleared = gap >= me.state.v * me.state.tau + policy.min_gap_m + closing;
          }
          if (!me.cleared) follow(0.0, -x, false);
        }
      } else if (in_window && virtual_x(pred, g) - pred.state.length < 0.0) {
        // conflicting vehicle never heard from
        plan_stop();
      }

      // nearest physically sensed leader, if it is further up
      for (std::size_t j = i - 1; j-- > 0;) {
        if (senses(me, vehicles[j], g)) {
          follow(vehicles[j].state.v, virtual_x(vehicles[j], g) - vehicles[j].state.length - x, true);
          break;
        }
        if (virtual_x(vehicles[j], g) - x > 500.0) break;
      }
    }

    if (in_window) {
      // Entering the merge point is safe only if everyone on the other leg who
      // would have to give way can hear us. Otherwise wait at the line for one
      // beacon period first.
      const double lag_reach = me.state.v_max * me.state.tau + policy.min_gap_m + me.state.length;
      const bool audible = ramp_euclid(-x, -x + lag_reach, g.theta_deg) <= comm.mhr_m();
      const bool at_line = -x <= policy.min_gap_m + 0.5 && me.state.v < 0.1;
      if (at_line && me.held_since < 0.0) me.held_since = now;
      const bool waited = me.held_since >= 0.0 && now - me.held_since >= comm.ipg_s();
      if (!at_line && !waited) me.held_since = -1.0;
      if (!audible && !waited) plan_stop();
    }
    next_v[i] = hard_stop ? 0.0 : v;
  }

  for (std::size_t i = 0; i < n; ++i) {
    auto& me = vehicles[i];
    const bool was_upstream = virtual_x(me, g) < 0.0;
    me.state.v = next_v[i];
    me.state.s += next_v[i] * dt;
    if (me.state.lane == Lane::kRamp && me.state.s >= g.ramp_len) {
      me.state.s = g.mainline_pre + (me.state.s - g.ramp_len);
      me.state.lane = Lane::kMainline;
    }
    std::rotate(me.recent_pos.rbegin(), me.recent_pos.rbegin() + 1, me.recent_pos.rend());
    me.recent_pos[0] = ramp_position(me, g);
    if (was_upstream && virtual_x(me, g) >= 0.0 && !me.merge_time) me.merge_time = now + dt;
  }

  MergeStepResult result;
  for (std::size_t i = 0; i < n && !result.overlap; ++i) {
    const auto [li, di] = footprint(vehicles[i], g);
    for (std::size_t j = i + 1; j < n; ++j) {
      const auto [lj, dj] = footprint(vehicles[j], g);
      if (di && dj && overlaps(*di, *dj)) result.overlap = true;
      if (li && lj && vehicles[i].from_ramp == vehicles[j].from_ramp && overlaps(*li, *lj)) result.overlap = true;
      if (result.overlap) break;
    }
  }
  return result;
}

void exchange_beacons(std::vector<RampVehicle>& vehicles, const RampGeometry& g, std::int64_t step, double dt,
                      double mhr_km) {
  std::vector<Beacon> sent;
  for (auto& v : vehicles) {
    if (!v.schedule.fire(step)) continue;
    sent.push_back({v.state.id, static_cast<double>(step) * dt,
                    BeaconPayload{virtual_x(v, g), v.state.lane, v.state.v, ramp_position(v, g), false}});
  }
  if (sent.empty()) return;
  std::vector<Receiver> receivers;
  receivers.reserve(vehicles.size());
  for (auto& v : vehicles) receivers.push_back({v.state.id, ramp_position(v, g), &v.table});
  deliver(sent, receivers, mhr_km);
}

RampConfig default_ramp_config() {
  RampConfig c;
  c.vehicle.a_max = 2.5;
  c.vehicle.b_decel = 4.5;
  c.vehicle.tau = 1.0;
  c.vehicle.v_max = 8.33;
  c.vehicle.length = 5.0;
  return c;
}

MetricsRecord run_ramp(const RampConfig& config) {
  const auto& g = config.geometry;
  g.validate();
  if (!(config.horizon_s > 0.0) || !(config.dt > 0.0)) throw DomainError("ramp: horizon and dt must be > 0");
  const CommParams comm = protocol_params(config.protocol, config.density_vph);

  const RngStream root(config.seed);
  struct Arrival {
    double t;
    bool ramp;
  };
  std::vector<Arrival> arrivals;
  const double share[2] = {1.0 - config.ramp_share, config.ramp_share};
  for (int leg = 0; leg < 2; ++leg) {
    if (share[leg] <= 0.0) continue;
    auto rng = root.substream("arrivals", static_cast<std::uint64_t>(leg));
    for (double t : spawn_arrivals(config.density_vph * share[leg], config.horizon_s, rng)) {
      arrivals.push_back({t, leg == 1});
    }
  }
  std::stable_sort(arrivals.begin(), arrivals.end(), [](const Arrival& a, const Arrival& b) {
    return a.t != b.t ? a.t < b.t : (!a.ramp && b.ramp);
  });

  std::deque<std::pair<int, double>> queue[2];  // (id, arrival time) per leg
  std::vector<double> arrival_time(arrivals.size());
  std::size_t next_arrival = 0;

  MetricsRecord rec;
  rec.scenario = Scenario::kRamp;
  rec.protocol = config.protocol;
  rec.density = config.density_vph;
  rec.theta_deg = g.theta_deg;
  rec.seed = config.seed;

  std::vector<RampVehicle> active;
  std::vector<RampVehicle> done;
  SimClock clock(config.dt);
  const double t_end = config.horizon_s + config.drain_s;

  while (true) {
    const double t = clock.t();
    while (next_arrival < arrivals.size() && arrivals[next_arrival].t <= t) {
      const int id = static_cast<int>(next_arrival);
      arrival_time[next_arrival] = arrivals[next_arrival].t;
      queue[arrivals[next_arrival].ramp ? 1 : 0].emplace_back(id, arrivals[next_arrival].t);
      ++next_arrival;
    }

    for (int leg = 0; leg < 2; ++leg) {
      if (queue[leg].empty()) continue;
      const bool ramp_leg = leg == 1;
      const double entry_x = -(ramp_leg ? g.ramp_len : g.mainline_pre);
      const RampVehicle* last = nullptr;
      for (const auto& v : active) {
        if (v.from_ramp == ramp_leg && (last == nullptr || virtual_x(v, g) < virtual_x(*last, g))) last = &v;
      }
      VehicleState st = config.vehicle;
      double v_ins = st.v_max;
      if (last != nullptr) {
        const double gap = virtual_x(*last, g) - last->state.length - entry_x;
        if (gap < kInsertGap) continue;
        v_ins = std::min(v_ins, safe_velocity(last->state.v, gap, st.tau, st.b_decel, 0.5 * (st.v_max + last->state.v)));
      }
      const auto [id, arrived] = queue[leg].front();
      queue[leg].pop_front();
      st.id = id;
      st.s = 0.0;
      st.v = v_ins;
      st.lane = ramp_leg ? Lane::kRamp : Lane::kMainline;
      st.spawn_time = t;
      RampVehicle rv;
      rv.state = st;
      rv.from_ramp = ramp_leg;
      rv.insert_time = t;
      auto phase_rng = root.substream("beacon-phase", static_cast<std::uint64_t>(id));
      rv.schedule = BeaconSchedule::random_phase(t, comm.ipg_ms, phase_rng, config.dt);
      rv.recent_pos.fill(ramp_position(rv, g));
      active.push_back(std::move(rv));
    }

    const bool all_inserted = next_arrival == arrivals.size() && queue[0].empty() && queue[1].empty();
    if (all_inserted && active.empty()) break;
    if (t >= t_end) {
      rec.gridlock = true;
      break;
    }

    exchange_beacons(active, g, clock.step_index(), config.dt, comm.mhr_km);
    sort_virtual(active, g);
    if (merge_step(active, g, comm, t, config.dt, config.policy).overlap) rec.fault = true;

    for (auto it = active.begin(); it != active.end();) {
      if (virtual_x(*it, g) >= g.post_merge) {
        done.push_back(std::move(*it));
        it = active.erase(it);
      } else {
        ++it;
      }
    }
    clock.advance();
  }

  for (auto& v : active) done.push_back(std::move(v));
  std::sort(done.begin(), done.end(), [](const RampVehicle& a, const RampVehicle& b) { return a.state.id < b.state.id; });

  double sum = 0.0;
  int count = 0;
  for (const auto& v : done) {
    VehicleRecord vr;
    vr.id = v.state.id;
    vr.role = v.from_ramp ? "ramp" : "mainline";
    vr.spawn_time = v.insert_time;
    vr.finish_time = v.merge_time;
    if (v.merge_time) vr.value = *v.merge_time - v.insert_time;
    const double arrived = arrival_time[static_cast<std::size_t>(v.state.id)];
    if (v.from_ramp && vr.value && arrived >= config.warmup_s && arrived < config.horizon_s) {
      sum += *vr.value;
      ++count;
    }
    rec.vehicles.push_back(std::move(vr));
  }
  rec.primary_metric = count > 0 ? sum / count : 0.0;
  return rec;
}

}  // namespace v2x::ramp
