#include "v2xcosim/comm_model.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

namespace v2x {

std::string ProtocolModel::name() const {
  switch (kind) {
    case ProtocolKind::kCV2X:
      return "CV2X";
    case ProtocolKind::kDSRC:
      return "DSRC";
    case ProtocolKind::kCustom:
      return "CUSTOM";
  }
  return "?";
}

std::optional<ProtocolKind> parse_protocol_kind(std::string_view text) {
  std::string lower;
  for (char c : text) {
    if (c != '-' && c != '_') lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  if (lower == "cv2x") return ProtocolKind::kCV2X;
  if (lower == "dsrc") return ProtocolKind::kDSRC;
  if (lower == "custom") return ProtocolKind::kCustom;
  return std::nullopt;
}

CommParams protocol_params(const ProtocolModel& protocol, double density_vph) {
  if (!std::isfinite(density_vph) || density_vph <= 0.0) {
    throw DomainError("protocol_params: density must be > 0");
  }
  switch (protocol.kind) {
    case ProtocolKind::kCV2X:
      return {50.0 / density_vph, 100.0};
    case ProtocolKind::kDSRC:
      return {std::max(0.25, 50.0 / density_vph), std::max(100.0, density_vph / 2.0)};
    case ProtocolKind::kCustom:
      return {protocol.custom_mhr_km, protocol.custom_ipg_ms};
  }
  return {};
}

double distance(Vec2 a, Vec2 b) { return std::hypot(a.x - b.x, a.y - b.y); }

bool in_range(Vec2 a, Vec2 b, double mhr_km) { return distance(a, b) <= mhr_km * 1000.0 + 1e-9; }

BeaconSchedule::BeaconSchedule(double spawn_time, double ipg_ms, double phase_fraction, double dt) {
  if (!(ipg_ms > 0.0) || !std::isfinite(ipg_ms)) throw DomainError("beacon schedule: ipg must be > 0");
  ipg_us_ = std::max<std::int64_t>(1, std::llround(ipg_ms * 1000.0));
  dt_us_ = std::max<std::int64_t>(1, std::llround(dt * 1e6));
  const auto phase_us = static_cast<std::int64_t>(std::floor(phase_fraction * static_cast<double>(ipg_us_)));
  origin_us_ = std::llround(spawn_time * 1e6) + std::clamp<std::int64_t>(phase_us, 0, ipg_us_ - 1);
}

BeaconSchedule BeaconSchedule::random_phase(double spawn_time, double ipg_ms, RngStream& rng, double dt) {
  return BeaconSchedule(spawn_time, ipg_ms, rng.uniform(), dt);
}

std::int64_t BeaconSchedule::step_of(std::int64_t k) const {
  const std::int64_t t = origin_us_ + k * ipg_us_;
  // ceil division for non-negative t
  return (t + dt_us_ - 1) / dt_us_;
}

std::int64_t BeaconSchedule::next_step() const { return step_of(k_); }

bool BeaconSchedule::fire(std::int64_t step) {
  if (step_of(k_) > step) return false;
  while (step_of(k_) <= step) ++k_;
  return true;
}

void BeaconTable::update(const Beacon& beacon) {
  auto [it, inserted] = entries_.try_emplace(beacon.sender, NeighborEntry{beacon.payload, beacon.sent_at});
  if (!inserted && it->second.sent_at <= beacon.sent_at) it->second = {beacon.payload, beacon.sent_at};
}

const NeighborEntry* BeaconTable::find(int id) const {
  auto it = entries_.find(id);
  return it == entries_.end() ? nullptr : &it->second;
}

std::size_t deliver(std::span<const Beacon> sent, std::span<const Receiver> receivers, double mhr_km) {
  std::size_t n = 0;
  for (const auto& b : sent) {
    for (const auto& r : receivers) {
      if (r.id == b.sender || r.table == nullptr) continue;
      if (in_range(b.payload.pos, r.pos, mhr_km)) {
        r.table->update(b);
        ++n;
      }
    }
  }
  return n;
}

NeighborEstimate neighbor_estimate(const NeighborEntry& entry, double now) {
  const double age = std::max(0.0, now - entry.sent_at);
  return {entry.payload.s + entry.payload.v * age, entry.payload.v};
}

std::optional<NeighborEstimate> neighbor_estimate(const BeaconTable& table, int id, double now) {
  const auto* e = table.find(id);
  if (e == nullptr) return std::nullopt;
  return neighbor_estimate(*e, now);
}

}  // namespace v2x
