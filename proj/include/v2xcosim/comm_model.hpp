#pragma once

// Communication regimes reduced to a (maximum hearing range, inter-packet gap)
// pair, beacon scheduling, range-gated delivery and stale neighbor tables.

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "v2xcosim/sim_core.hpp"

namespace v2x {

enum class ProtocolKind { kCV2X, kDSRC, kCustom };

struct ProtocolModel {
  ProtocolKind kind = ProtocolKind::kCV2X;
  double custom_mhr_km = 0.0;
  double custom_ipg_ms = 0.0;

  static ProtocolModel cv2x() { return {ProtocolKind::kCV2X}; }
  static ProtocolModel dsrc() { return {ProtocolKind::kDSRC}; }
  static ProtocolModel custom(double mhr_km, double ipg_ms) {
    return {ProtocolKind::kCustom, mhr_km, ipg_ms};
  }

  /// "CV2X", "DSRC" or "CUSTOM".
  std::string name() const;
  /// Sort key used by reports: CV2X < DSRC < CUSTOM.
  int rank() const { return static_cast<int>(kind); }

  friend bool operator==(const ProtocolModel&, const ProtocolModel&) = default;
};

/// Accepts cv2x / c-v2x / dsrc / custom, case-insensitive.
std::optional<ProtocolKind> parse_protocol_kind(std::string_view text);

struct CommParams {
  double mhr_km = 0.0;
  double ipg_ms = 0.0;

  double mhr_m() const { return mhr_km * 1000.0; }
  double ipg_s() const { return ipg_ms / 1000.0; }
};

/// C-V2X keeps a 100 ms gap and trades range for density (50/rho km).
/// DSRC keeps at least 250 m of range and trades the gap (rho/2 ms, >= 100).
/// Throws DomainError for density <= 0.
CommParams protocol_params(const ProtocolModel& protocol, double density_vph);

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

double distance(Vec2 a, Vec2 b);

/// Inclusive: true iff |a - b| <= mhr.
bool in_range(Vec2 a, Vec2 b, double mhr_km);

/// Periodic transmit times spawn + phase + k*ipg, each rounded up to the step
/// grid. Arithmetic is done in integer microseconds.
class BeaconSchedule {
 public:
  BeaconSchedule() = default;
  BeaconSchedule(double spawn_time, double ipg_ms, double phase_fraction, double dt);
  /// Phase drawn uniformly in [0, ipg) from `rng`.
  static BeaconSchedule random_phase(double spawn_time, double ipg_ms, RngStream& rng, double dt);

  /// Step index of the next pending beacon.
  std::int64_t next_step() const;
  /// True if a beacon is due at `step`; consumes it (and any others that
  /// quantize onto the same or an earlier step).
  bool fire(std::int64_t step);

 private:
  std::int64_t step_of(std::int64_t k) const;

  std::int64_t origin_us_ = 0;
  std::int64_t ipg_us_ = 1;
  std::int64_t dt_us_ = 1;
  std::int64_t k_ = 0;
};

struct BeaconPayload {
  double s = 0.0;
  Lane lane = Lane::kMainline;
  double v = 0.0;
  Vec2 pos;
  bool braking = false;
};

struct Beacon {
  int sender = 0;
  double sent_at = 0.0;
  BeaconPayload payload;
};

struct NeighborEntry {
  BeaconPayload payload;
  double sent_at = 0.0;
};

class BeaconTable {
 public:
  void update(const Beacon& beacon);
  const NeighborEntry* find(int id) const;
  bool knows(int id) const { return find(id) != nullptr; }
  std::size_t size() const { return entries_.size(); }

 private:
  std::map<int, NeighborEntry> entries_;
};

/// A receiver: its position this step and the table to update.
struct Receiver {
  int id = 0;
  Vec2 pos;
  BeaconTable* table = nullptr;
};

/// Delivers every beacon in `sent` to each receiver within range, instantly
/// and without loss. Senders never receive their own beacon. Returns the
/// number of (beacon, receiver) deliveries.
std::size_t deliver(std::span<const Beacon> sent, std::span<const Receiver> receivers, double mhr_km);

struct NeighborEstimate {
  double s = 0.0;
  double v = 0.0;
};

/// Constant-velocity extrapolation from the last snapshot.
NeighborEstimate neighbor_estimate(const NeighborEntry& entry, double now);
std::optional<NeighborEstimate> neighbor_estimate(const BeaconTable& table, int id, double now);

}  // namespace v2x
