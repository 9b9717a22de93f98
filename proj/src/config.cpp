#include "v2xcosim/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>

namespace v2x {

namespace {

std::string canonical(std::string_view key) {
  std::string out;
  for (char c : key) out.push_back(c == '_' ? '-' : static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  if (out == "horizon") out = "horizon-s";
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

[[noreturn]] void malformed(std::string_view key, std::string_view value) {
  throw UsageError("malformed value for --" + std::string(key) + ": '" + std::string(value) + "'");
}

double to_double(std::string_view key, std::string_view text) {
  text = trim(text);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(v)) {
    malformed(key, text);
  }
  return v;
}

std::uint64_t to_u64(std::string_view key, std::string_view text) {
  text = trim(text);
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || ec != std::errc() || ptr != text.data() + text.size()) malformed(key, text);
  return v;
}

int to_int(std::string_view key, std::string_view text) {
  text = trim(text);
  int v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || ec != std::errc() || ptr != text.data() + text.size()) malformed(key, text);
  return v;
}

bool to_bool(std::string_view key, std::string_view text) {
  const std::string v = canonical(trim(text));
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  malformed(key, text);
}

std::vector<std::string_view> split_list(std::string_view key, std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = text.find(',', start);
    const auto item = trim(text.substr(start, comma == std::string_view::npos ? text.npos : comma - start));
    if (item.empty()) malformed(key, text);
    out.push_back(item);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

template <class T, class F>
std::vector<T> to_list(std::string_view key, std::string_view text, F parse) {
  std::vector<T> out;
  for (auto item : split_list(key, text)) out.push_back(parse(key, item));
  return out;
}

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = {
      "protocol", "custom-mhr-km", "custom-ipg-ms", "density",     "theta-deg", "seed",      "out",
      "format",   "chart",         "jobs",          "horizon-s",   "n-warmup-s", "n-vehicles", "box-side-m",
      "arrival-vph", "n-platoon",  "v-p-ms",        "b-brake-ms2", "ivd-m",     "relay",     "fail-safe"};
  return keys;
}

Settings parse_config_text(std::string_view text) {
  Settings out;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto nl = text.find('\n', start);
    const auto line = trim(text.substr(start, nl == std::string_view::npos ? text.npos : nl - start));
    ++line_no;
    start = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw UsageError("config line " + std::to_string(line_no) + ": expected key=value");
    }
    const auto key = trim(line.substr(0, eq));
    if (key.empty()) throw UsageError("config line " + std::to_string(line_no) + ": empty key");
    out.emplace_back(canonical(key), std::string(trim(line.substr(eq + 1))));
  }
  return out;
}

void apply_setting(ScenarioConfig& c, std::string_view raw_key, std::string_view raw_value) {
  const std::string key = canonical(trim(raw_key));
  const std::string_view value = trim(raw_value);
  auto& k = c.knobs;
  if (key == "protocol") {
    c.protocols.clear();
    for (auto item : split_list(key, value)) {
      const auto kind = parse_protocol_kind(item);
      if (!kind) throw UsageError("unknown protocol '" + std::string(item) + "' (cv2x, dsrc or custom)");
      c.protocols.push_back(*kind);
    }
  } else if (key == "custom-mhr-km") {
    c.custom_mhr_km = to_double(key, value);
  } else if (key == "custom-ipg-ms") {
    c.custom_ipg_ms = to_double(key, value);
  } else if (key == "density") {
    c.densities = to_list<double>(key, value, to_double);
  } else if (key == "theta-deg") {
    c.thetas = to_list<double>(key, value, to_double);
  } else if (key == "seed") {
    c.seeds = to_list<std::uint64_t>(key, value, to_u64);
  } else if (key == "out") {
    if (value.empty()) malformed(key, value);
    c.out_dir = std::string(value);
  } else if (key == "format") {
    const std::string f = canonical(value);
    if (f == "csv") {
      c.format = OutputFormat::kCsv;
    } else if (f == "json") {
      c.format = OutputFormat::kJson;
    } else {
      malformed(key, value);
    }
  } else if (key == "chart") {
    c.chart = to_bool(key, value);
  } else if (key == "jobs") {
    c.jobs = to_int(key, value);
    if (c.jobs < 0) malformed(key, value);
  } else if (key == "horizon-s") {
    c.horizon_s = to_double(key, value);
  } else if (key == "n-warmup-s") {
    k.ramp.warmup_s = to_double(key, value);
  } else if (key == "n-vehicles") {
    k.intersection.n_vehicles = to_int(key, value);
  } else if (key == "box-side-m") {
    k.intersection.geometry.box_side = to_double(key, value);
  } else if (key == "arrival-vph") {
    k.intersection.arrival_vph = to_double(key, value);
  } else if (key == "n-platoon") {
    k.platoon.n = to_int(key, value);
  } else if (key == "v-p-ms") {
    k.platoon.v_p = to_double(key, value);
  } else if (key == "b-brake-ms2") {
    k.platoon.b_brake = to_double(key, value);
  } else if (key == "ivd-m") {
    k.platoon.ivd = to_double(key, value);
  } else if (key == "relay") {
    const std::string r = canonical(value);
    if (r == "positional") {
      k.platoon.relay = platoon::Relay::kPositional;
    } else if (r == "broadcast") {
      k.platoon.relay = platoon::Relay::kBroadcast;
    } else {
      malformed(key, value);
    }
  } else if (key == "fail-safe") {
    k.platoon.fail_safe = to_bool(key, value);
  } else {
    throw UsageError("unknown key '" + std::string(raw_key) + "'");
  }
}

RunPlan build_plan(const ScenarioConfig& c) {
  if (!c.thetas.empty() && c.scenario && *c.scenario != Scenario::kRamp) {
    throw UsageError("--theta-deg is only valid for the ramp scenario");
  }

  std::vector<ProtocolKind> kinds = c.protocols;
  if (kinds.empty()) kinds = {ProtocolKind::kCV2X, ProtocolKind::kDSRC};
  const bool custom = std::find(kinds.begin(), kinds.end(), ProtocolKind::kCustom) != kinds.end();
  if (custom && (!c.custom_mhr_km || !c.custom_ipg_ms)) {
    throw UsageError("--protocol custom needs both --custom-mhr-km and --custom-ipg-ms");
  }
  if (!custom && (c.custom_mhr_km || c.custom_ipg_ms)) {
    throw UsageError("--custom-mhr-km/--custom-ipg-ms need --protocol custom");
  }
  if (custom && (!(*c.custom_mhr_km >= 0.0) || !(*c.custom_ipg_ms > 0.0))) {
    throw UsageError("custom protocol needs mhr >= 0 km and ipg > 0 ms");
  }

  if (c.densities.empty()) throw UsageError("at least one density is required (--density)");
  if (c.seeds.empty()) throw UsageError("at least one seed is required (--seed)");
  for (double d : c.densities) {
    if (!(d > 0.0)) throw UsageError("densities must be > 0");
  }

  RunPlan plan;
  plan.knobs = c.knobs;
  if (c.horizon_s) {
    if (!(*c.horizon_s > 0.0)) throw UsageError("horizon must be > 0");
    plan.knobs.ramp.horizon_s = *c.horizon_s;
    plan.knobs.intersection.horizon_s = *c.horizon_s;
  }

  std::vector<Scenario> scenarios;
  if (c.scenario) {
    scenarios = {*c.scenario};
  } else {
    scenarios = {Scenario::kRamp, Scenario::kIntersection, Scenario::kPlatoon};
  }

  try {
    for (Scenario s : scenarios) {
      switch (s) {
        case Scenario::kRamp: {
          auto g = plan.knobs.ramp.geometry;
          for (double th : c.thetas) {
            g.theta_deg = th;
            g.validate();
          }
          break;
        }
        case Scenario::kIntersection:
          plan.knobs.intersection.geometry.validate();
          if (plan.knobs.intersection.n_vehicles < 1) throw DomainError("n-vehicles must be >= 1");
          if (!(plan.knobs.intersection.arrival_vph > 0.0)) throw DomainError("arrival-vph must be > 0");
          break;
        case Scenario::kPlatoon:
          plan.knobs.platoon.validate();
          break;
      }
    }
  } catch (const DomainError& e) {
    throw UsageError(e.what());
  }

  for (Scenario s : scenarios) {
    for (ProtocolKind kind : kinds) {
      const ProtocolModel proto = kind == ProtocolKind::kCustom
                                      ? ProtocolModel::custom(*c.custom_mhr_km, *c.custom_ipg_ms)
                                      : ProtocolModel{kind};
      for (double d : c.densities) {
        std::vector<std::optional<double>> thetas{std::nullopt};
        if (s == Scenario::kRamp) {
          thetas.clear();
          if (c.thetas.empty()) {
            thetas.emplace_back(plan.knobs.ramp.geometry.theta_deg);
          } else {
            for (double th : c.thetas) thetas.emplace_back(th);
          }
        }
        for (const auto& th : thetas) {
          for (std::uint64_t seed : c.seeds) plan.runs.push_back({s, proto, d, th, seed});
        }
      }
    }
  }
  return plan;
}

}  // namespace v2x
