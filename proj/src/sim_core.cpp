#include "v2xcosim/sim_core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace v2x {

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw DomainError(what);
}

bool finite_nonneg(double x) { return std::isfinite(x) && x >= 0.0; }

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

SimClock::SimClock(double dt) : dt_(dt) { require(std::isfinite(dt) && dt > 0.0, "dt must be > 0"); }

std::int64_t SimClock::step_at_or_after(double time) const {
  return static_cast<std::int64_t>(std::ceil(time / dt_ - 1e-9));
}

std::uint64_t mix64(std::uint64_t x) {
  // splitmix64 finalizer
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

RngStream::RngStream(std::uint64_t seed) : seed_(seed), engine_(mix64(seed)) {}

RngStream RngStream::substream(std::string_view name, std::uint64_t index) const {
  return RngStream(mix64(seed_ ^ mix64(fnv1a(name) + mix64(index))));
}

double RngStream::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double RngStream::exponential(double mean) { return -mean * std::log1p(-uniform()); }

double safe_velocity(double v_leader, double gap, double tau, double b, double v_bar) {
  require(finite_nonneg(v_leader), "safe_velocity: v_leader must be finite and >= 0");
  require(finite_nonneg(gap), "safe_velocity: gap must be finite and >= 0");
  require(std::isfinite(tau) && tau > 0.0, "safe_velocity: tau must be > 0");
  require(std::isfinite(b) && b > 0.0, "safe_velocity: b must be > 0");
  require(finite_nonneg(v_bar), "safe_velocity: v_bar must be finite and >= 0");
  const double v = v_leader + (gap - v_leader * tau) / (v_bar / b + tau);
  return std::max(0.0, v);
}

double desired_speed(double v_safe, double v, double a, double v_max, double dt) {
  require(finite_nonneg(v_safe) && finite_nonneg(v) && finite_nonneg(a) && finite_nonneg(v_max) &&
              finite_nonneg(dt),
          "desired_speed: inputs must be finite and >= 0");
  return std::min({v_safe, v + a * dt, v_max});
}

double krauss_speed(const VehicleState& state, std::optional<LeaderInfo> leader, double dt) {
  require(std::isfinite(dt) && dt > 0.0, "dt must be > 0");
  double v_safe = state.v_max;
  if (leader) {
    const double v_bar = 0.5 * (state.v + leader->v);
    const double gap = std::max(0.0, leader->gap);
    v_safe = safe_velocity(leader->v, gap, state.tau, state.b_decel, v_bar);
    // the Euler leader update can shed up to b*dt^2 of travel in one step,
    // which the formula does not cover; keep half the gap in reserve on top of
    // the distance a leader braking at b is still sure to cover
    v_safe = std::min(v_safe, 0.5 * gap / dt + std::max(0.0, leader->v - state.b_decel * dt));
  }
  const double v = desired_speed(v_safe, state.v, state.a_max, state.v_max, dt);
  return std::clamp(v, 0.0, state.v_max);
}

VehicleState step_vehicle(const VehicleState& state, std::optional<LeaderInfo> leader, double dt) {
  VehicleState next = state;
  next.v = krauss_speed(state, leader, dt);
  next.s = state.s + next.v * dt;
  return next;
}

std::vector<double> spawn_arrivals(double density_vph, double horizon_s, RngStream& rng) {
  require(std::isfinite(density_vph) && density_vph > 0.0, "spawn_arrivals: density must be > 0");
  require(std::isfinite(horizon_s) && horizon_s > 0.0, "spawn_arrivals: horizon must be > 0");
  const double mean_gap = 3600.0 / density_vph;
  std::vector<double> out;
  double t = rng.exponential(mean_gap);
  while (t < horizon_s) {
    out.push_back(t);
    t += rng.exponential(mean_gap);
  }
  return out;
}

}  // namespace v2x
