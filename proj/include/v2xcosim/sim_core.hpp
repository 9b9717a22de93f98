#pragma once

// Fixed-step kinematics, seeded randomness and the Krauss car-following law.

#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <string_view>
#include <vector>

namespace v2x {

/// Simulation step in seconds. Finer than the smallest inter-packet gap.
inline constexpr double kDefaultDt = 0.1;

class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

enum class Lane { kMainline, kRamp, kApproach, kPlatoon };

struct VehicleState {
  int id = 0;
  double s = 0.0;  // longitudinal position along the vehicle's own path (m)
  Lane lane = Lane::kMainline;
  int approach = -1;  // intersection approach index, -1 elsewhere
  double v = 0.0;
  double length = 5.0;
  double spawn_time = 0.0;
  double a_max = 2.5;
  double b_decel = 4.5;
  double v_max = 8.33;
  double tau = 1.0;
};

/// t is always derived from the integer step count, so it never drifts.
class SimClock {
 public:
  explicit SimClock(double dt = kDefaultDt);

  double dt() const { return dt_; }
  std::int64_t step_index() const { return step_; }
  double t() const { return static_cast<double>(step_) * dt_; }
  void advance() { ++step_; }

  /// First step index whose time is >= `time` (with a small tolerance).
  std::int64_t step_at_or_after(double time) const;

 private:
  double dt_;
  std::int64_t step_ = 0;
};

/// Seeded generator with independent named substreams. Uses mt19937_64, whose
/// output sequence is fixed by the standard, and maps raw bits to doubles by
/// hand so that traces are bit-identical across standard libraries.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed);

  std::uint64_t seed() const { return seed_; }

  /// Derives a child stream for one purpose ("arrivals", "beacon-phase", ...)
  /// and an optional index (vehicle id, leg).
  RngStream substream(std::string_view name, std::uint64_t index = 0) const;

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  /// Exponential with the given mean, by inversion.
  double exponential(double mean);

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

std::uint64_t mix64(std::uint64_t x);

/// Krauss safe velocity: v_l + (g - v_l*tau) / (v_bar/b + tau), floored at 0.
/// Throws DomainError on non-finite or out-of-range inputs.
double safe_velocity(double v_leader, double gap, double tau, double b, double v_bar);

/// min(v_safe, v + a*dt, v_max).
double desired_speed(double v_safe, double v, double a, double v_max, double dt);

struct LeaderInfo {
  double v = 0.0;
  double gap = 0.0;  // bumper-to-bumper (m)
};

/// Krauss speed for the next step. v_bar is the mean of own and leader speed.
/// With a leader the step never closes more than half the gap to a leader
/// braking at b.
double krauss_speed(const VehicleState& state, std::optional<LeaderInfo> leader, double dt);

VehicleState step_vehicle(const VehicleState& state, std::optional<LeaderInfo> leader, double dt);

/// Poisson arrival times with mean inter-arrival 3600/density, sorted, < horizon.
std::vector<double> spawn_arrivals(double density_vph, double horizon_s, RngStream& rng);

}  // namespace v2x
