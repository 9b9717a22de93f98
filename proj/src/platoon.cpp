#include "v2xcosim/platoon.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace v2x::platoon {

namespace {

constexpr double kStopSpeed = 0.05;  // below this the fallback counts as halted (m/s)

}  // namespace

void PlatoonConfig::validate() const {
  auto positive = [](double x) { return std::isfinite(x) && x > 0.0; };
  if (n < 1) throw DomainError("platoon: n must be >= 1");
  if (!positive(veh_len) || !positive(ivd) || !positive(v_p) || !positive(b_brake) || !positive(tau) ||
      !positive(dt)) {
    throw DomainError("platoon: veh_len, ivd, v_p, b_brake, tau and dt must be > 0");
  }
  if (n * veh_len + (n - 1) * ivd >= road_len) throw DomainError("platoon: platoon longer than the road");
  if (ivd < v_p * tau) throw DomainError("platoon: cruise is not steady unless ivd >= v_p * tau");
  if (!(warmup_s >= 0.0) || !positive(max_brake_s)) throw DomainError("platoon: bad warmup or brake window");
}

void propagate_brake(std::vector<PlatoonVehicle>& platoon, Relay relay, double now) {
  for (std::size_t i = 1; i < platoon.size(); ++i) {
    auto& v = platoon[i];
    if (v.brake_start) continue;
    bool heard = false;
    if (relay == Relay::kPositional) {
      const auto* e = v.table.find(platoon[i - 1].state.id);
      heard = e != nullptr && e->payload.braking;
    } else {
      for (const auto& o : platoon) {
        const auto* e = v.table.find(o.state.id);
        if (e != nullptr && e->payload.braking) {
          heard = true;
          break;
        }
      }
    }
    if (heard) v.brake_start = now;
  }
}

BrakeOutcome brake_dynamics(PlatoonVehicle& v, std::optional<LeaderInfo> predecessor, double b_brake, bool fail_safe,
                            double now, double dt) {
  BrakeOutcome out;
  VehicleState& st = v.state;
  if (v.stop_time) {
    st.v = 0.0;
    return out;
  }
  double v_next = 0.0;
  double ds = 0.0;
  std::optional<double> stop_at;
  if (v.brake_start && now >= *v.brake_start) {
    if (st.v <= b_brake * dt) {
      ds = st.v * st.v / (2.0 * b_brake);
      stop_at = now + st.v / b_brake;
    } else {
      v_next = st.v - b_brake * dt;
      ds = 0.5 * (st.v + v_next) * dt;
    }
  } else {
    v_next = krauss_speed(st, std::nullopt, dt);
    ds = v_next * dt;
  }
  if (fail_safe && predecessor) {
    const double v_k = krauss_speed(st, predecessor, dt);
    if (v_k * dt < ds - 1e-12) {
      v_next = v_k;
      ds = v_k * dt;
      stop_at.reset();
      out.fallback_bound = true;
      if (v_k < kStopSpeed) {
        v_next = 0.0;
        stop_at = now + dt;
      }
    }
  }
  st.v = v_next;
  st.s += ds;
  if (stop_at) {
    st.v = 0.0;
    v.stop_time = stop_at;
  }
  return out;
}

PlatoonRun simulate_platoon(const PlatoonConfig& config) {
  config.validate();
  const CommParams comm = protocol_params(config.protocol, config.density_vph);
  const RngStream root(config.seed);

  std::vector<PlatoonVehicle> platoon(static_cast<std::size_t>(config.n));
  const double head_s = config.n * config.veh_len + (config.n - 1) * config.ivd;
  for (int i = 0; i < config.n; ++i) {
    auto& v = platoon[static_cast<std::size_t>(i)];
    v.state.id = i;
    v.state.lane = Lane::kPlatoon;
    v.state.s = head_s - i * (config.veh_len + config.ivd);
    v.state.v = config.v_p;
    v.state.length = config.veh_len;
    v.state.a_max = 2.5;
    v.state.b_decel = config.b_brake;
    v.state.v_max = config.v_p;
    v.state.tau = config.tau;
    auto rng = root.substream("beacon-phase", static_cast<std::uint64_t>(i));
    v.schedule = BeaconSchedule::random_phase(0.0, comm.ipg_ms, rng, config.dt);
  }

  PlatoonRun run;
  MetricsRecord& rec = run.record;
  rec.scenario = Scenario::kPlatoon;
  rec.protocol = config.protocol;
  rec.density = config.density_vph;
  rec.seed = config.seed;
  run.min_gap_seen = std::numeric_limits<double>::infinity();

  SimClock clock(config.dt);
  const std::int64_t brake_step = clock.step_at_or_after(config.warmup_s);
  const double t0 = static_cast<double>(brake_step) * config.dt;
  run.t0 = t0;
  const double t_end = t0 + config.max_brake_s;

  while (true) {
    const double t = clock.t();
    if (clock.step_index() == brake_step) {
      platoon.front().brake_start = t;
      for (auto& v : platoon) v.s_at_brake = v.state.s;
    }
    const bool all_stopped =
        std::all_of(platoon.begin(), platoon.end(), [](const PlatoonVehicle& v) { return v.stop_time.has_value(); });
    if (all_stopped) break;
    if (t >= t_end) {
      rec.gridlock = true;
      break;
    }

    std::vector<Beacon> sent;
    for (auto& v : platoon) {
      if (!v.schedule.fire(clock.step_index())) continue;
      sent.push_back({v.state.id, t,
                      BeaconPayload{v.state.s, v.state.lane, v.state.v, Vec2{v.state.s, 0.0}, v.brake_start.has_value()}});
    }
    if (!sent.empty()) {
      std::vector<Receiver> receivers;
      for (auto& v : platoon) receivers.push_back({v.state.id, Vec2{v.state.s, 0.0}, &v.table});
      deliver(sent, receivers, comm.mhr_km);
    }
    propagate_brake(platoon, config.relay, t);

    std::vector<std::optional<LeaderInfo>> pred(platoon.size());
    for (std::size_t i = 1; i < platoon.size(); ++i) {
      const auto& a = platoon[i - 1].state;
      pred[i] = LeaderInfo{a.v, a.s - a.length - platoon[i].state.s};
    }
    for (std::size_t i = 0; i < platoon.size(); ++i) {
      if (brake_dynamics(platoon[i], pred[i], config.b_brake, config.fail_safe, t, config.dt).fallback_bound) {
        run.fallback_engaged = true;
      }
    }
    for (std::size_t i = 1; i < platoon.size(); ++i) {
      const double gap = platoon[i - 1].state.s - platoon[i - 1].state.length - platoon[i].state.s;
      run.min_gap_seen = std::min(run.min_gap_seen, gap);
      if (gap <= 0.0) rec.fault = true;
    }
    clock.advance();
  }

  double last_stop = t0;
  double brake_distance = 0.0;
  for (const auto& v : platoon) {
    run.timeline.push_back({v.brake_start, v.stop_time, v.state.s});
    if (v.stop_time) last_stop = std::max(last_stop, *v.stop_time);
    brake_distance = std::max(brake_distance, v.state.s - v.s_at_brake);
    VehicleRecord vr;
    vr.id = v.state.id;
    vr.role = "platoon-" + std::to_string(v.state.id);
    vr.spawn_time = 0.0;
    vr.finish_time = v.stop_time;
    if (v.stop_time) vr.value = *v.stop_time - t0;
    rec.vehicles.push_back(std::move(vr));
  }
  rec.primary_metric = last_stop - t0;
  rec.brake_distance = brake_distance;
  if (platoon.size() >= 2) {
    double mivd = std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i < platoon.size(); ++i) {
      mivd = std::min(mivd, platoon[i - 1].state.s - platoon[i - 1].state.length - platoon[i].state.s);
    }
    rec.mivd = mivd;
  }
  if (platoon.size() < 2) run.min_gap_seen = config.ivd;
  return run;
}

MetricsRecord run_platoon(const PlatoonConfig& config) { return simulate_platoon(config).record; }

}  // namespace v2x::platoon
