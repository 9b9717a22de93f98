#include "v2xcosim/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

#include <json.hpp>

namespace v2x {

namespace {

std::string fmt4(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", x);
  std::string s(buf);
  if (s == "-0.0000") s = "0.0000";
  return s;
}

std::string fmt2(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", x);
  return buf;
}

double round4(double x) { return std::round(x * 1e4) / 1e4; }

// Everything that identifies a table cell; seed comes last.
using CellKey = std::tuple<int, int, double, double, double, double>;

CellKey cell_key(const MetricsRecord& r) {
  return {static_cast<int>(r.scenario), r.protocol.rank(), r.protocol.custom_mhr_km, r.protocol.custom_ipg_ms,
          r.density, r.theta_deg.value_or(-1.0)};
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

double parse_double(const std::string& text, std::size_t line_no, const char* field) {
  double v = 0.0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) {
    throw IoError("results csv line " + std::to_string(line_no) + ": bad " + field + " '" + text + "'");
  }
  return v;
}

bool parse_flag(const std::string& text, std::size_t line_no, const char* field) {
  if (text == "0") return false;
  if (text == "1") return true;
  throw IoError("results csv line " + std::to_string(line_no) + ": bad " + field + " '" + text + "'");
}

struct Stats {
  std::size_t n = 0;
  double mean = 0.0;
  double sd = 0.0;
};

Stats stats(const std::vector<double>& xs) {
  Stats s;
  s.n = xs.size();
  if (xs.empty()) return s;
  for (double x : xs) s.mean += x;
  s.mean /= static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - s.mean) * (x - s.mean);
    s.sd = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  }
  return s;
}

void write_file(const std::filesystem::path& path, const std::string& content, const char* what) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(std::string("cannot write ") + what + " to '" + path.string() + "'");
  out << content;
  out.close();
  if (!out) throw IoError(std::string("failed writing ") + what + " to '" + path.string() + "'");
}

}  // namespace

std::string scenario_name(Scenario s) {
  switch (s) {
    case Scenario::kRamp:
      return "ramp";
    case Scenario::kIntersection:
      return "intersection";
    case Scenario::kPlatoon:
      return "platoon";
  }
  return "?";
}

std::optional<Scenario> parse_scenario(std::string_view text) {
  if (text == "ramp") return Scenario::kRamp;
  if (text == "intersection") return Scenario::kIntersection;
  if (text == "platoon") return Scenario::kPlatoon;
  return std::nullopt;
}

std::string protocol_label(const ProtocolModel& p) {
  if (p.kind != ProtocolKind::kCustom) return p.name();
  return "CUSTOM(" + fmt4(p.custom_mhr_km) + "km;" + fmt4(p.custom_ipg_ms) + "ms)";
}

std::optional<ProtocolModel> parse_protocol_label(std::string_view text) {
  constexpr std::string_view prefix = "CUSTOM(";
  if (text.substr(0, prefix.size()) != prefix) {
    const auto kind = parse_protocol_kind(text);
    if (!kind || *kind == ProtocolKind::kCustom) return std::nullopt;
    return ProtocolModel{*kind};
  }
  double mhr = 0.0;
  double ipg = 0.0;
  char tail = 0;
  const std::string s(text);
  if (std::sscanf(s.c_str(), "CUSTOM(%lfkm;%lfms%c", &mhr, &ipg, &tail) != 3 || tail != ')' || s.back() != ')') {
    return std::nullopt;
  }
  return ProtocolModel::custom(mhr, ipg);
}

std::vector<MetricsRecord> sorted_for_output(std::span<const MetricsRecord> records) {
  std::vector<MetricsRecord> out(records.begin(), records.end());
  std::stable_sort(out.begin(), out.end(), [](const MetricsRecord& a, const MetricsRecord& b) {
    const auto ka = cell_key(a);
    const auto kb = cell_key(b);
    if (ka != kb) return ka < kb;
    return a.seed < b.seed;
  });
  return out;
}

std::string to_csv(std::span<const MetricsRecord> records) {
  std::string out = std::string(kCsvHeader) + "\n";
  for (const auto& r : sorted_for_output(records)) {
    out += scenario_name(r.scenario) + "," + protocol_label(r.protocol) + "," + fmt4(r.density) + "," +
           (r.theta_deg ? fmt4(*r.theta_deg) : "") + "," + std::to_string(r.seed) + "," + fmt4(r.primary_metric) +
           "," + (r.mivd ? fmt4(*r.mivd) : "") + "," + (r.gridlock ? "1" : "0") + "," + (r.fault ? "1" : "0") + "\n";
  }
  return out;
}

std::string to_json(std::span<const MetricsRecord> records) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& r : sorted_for_output(records)) {
    nlohmann::ordered_json o;
    o["scenario"] = scenario_name(r.scenario);
    o["protocol"] = protocol_label(r.protocol);
    o["density"] = round4(r.density);
    o["theta_deg"] = r.theta_deg ? nlohmann::ordered_json(round4(*r.theta_deg)) : nlohmann::ordered_json(nullptr);
    o["seed"] = r.seed;
    o["metric_s"] = round4(r.primary_metric);
    o["mivd_m"] = r.mivd ? nlohmann::ordered_json(round4(*r.mivd)) : nlohmann::ordered_json(nullptr);
    o["gridlock"] = r.gridlock;
    o["fault"] = r.fault;
    arr.push_back(std::move(o));
  }
  return arr.dump(2) + "\n";
}

void write_results(std::span<const MetricsRecord> records, const std::filesystem::path& path, bool json) {
  if (records.empty()) throw DomainError("write_results: no records to write");
  write_file(path, json ? to_json(records) : to_csv(records), "results");
}

std::vector<MetricsRecord> parse_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader) throw IoError("results csv: missing or unexpected header");
  std::vector<MetricsRecord> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != 9) throw IoError("results csv line " + std::to_string(line_no) + ": expected 9 fields");
    MetricsRecord r;
    const auto sc = parse_scenario(f[0]);
    if (!sc) throw IoError("results csv line " + std::to_string(line_no) + ": unknown scenario '" + f[0] + "'");
    r.scenario = *sc;
    const auto proto = parse_protocol_label(f[1]);
    if (!proto) throw IoError("results csv line " + std::to_string(line_no) + ": unknown protocol '" + f[1] + "'");
    r.protocol = *proto;
    r.density = parse_double(f[2], line_no, "density");
    if (!f[3].empty()) r.theta_deg = parse_double(f[3], line_no, "theta_deg");
    std::uint64_t seed = 0;
    auto [ptr, ec] = std::from_chars(f[4].data(), f[4].data() + f[4].size(), seed);
    if (ec != std::errc() || ptr != f[4].data() + f[4].size()) {
      throw IoError("results csv line " + std::to_string(line_no) + ": bad seed '" + f[4] + "'");
    }
    r.seed = seed;
    r.primary_metric = parse_double(f[5], line_no, "metric_s");
    if (!f[6].empty()) r.mivd = parse_double(f[6], line_no, "mivd_m");
    r.gridlock = parse_flag(f[7], line_no, "gridlock");
    r.fault = parse_flag(f[8], line_no, "fault");
    out.push_back(std::move(r));
  }
  return out;
}

std::string summarize(std::span<const MetricsRecord> records) {
  std::vector<std::vector<std::string>> rows;
  rows.push_back({"scenario", "protocol", "density", "theta", "seeds", "metric_mean", "metric_sd", "mivd_mean",
                  "mivd_sd", "gridlock"});

  const auto sorted = sorted_for_output(records);
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    std::vector<double> metric;
    std::vector<double> mivd;
    int gridlocks = 0;
    while (j < sorted.size() && cell_key(sorted[j]) == cell_key(sorted[i])) {
      metric.push_back(sorted[j].primary_metric);
      if (sorted[j].mivd) mivd.push_back(*sorted[j].mivd);
      gridlocks += sorted[j].gridlock ? 1 : 0;
      ++j;
    }
    const auto& r = sorted[i];
    const Stats m = stats(metric);
    const Stats d = stats(mivd);
    rows.push_back({scenario_name(r.scenario), protocol_label(r.protocol), fmt4(r.density),
                    r.theta_deg ? fmt4(*r.theta_deg) : "-", std::to_string(m.n), fmt4(m.mean), fmt4(m.sd),
                    d.n ? fmt4(d.mean) : "-", d.n ? fmt4(d.sd) : "-", std::to_string(gridlocks)});
    i = j;
  }

  std::vector<std::size_t> width(rows[0].size(), 0);
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  }
  std::string out;
  for (const auto& row : rows) {
    std::string line;
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c > 0) line += "  ";
      // text columns left, numbers right
      const std::string pad(width[c] - row[c].size(), ' ');
      line += c < 2 ? row[c] + pad : pad + row[c];
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out += line + "\n";
  }
  return out;
}

std::string chart_metric_name(Scenario s, ChartMetric m) {
  if (m == ChartMetric::kMivd) return "mivd";
  switch (s) {
    case Scenario::kRamp:
      return "road_time";
    case Scenario::kIntersection:
      return "total_time";
    case Scenario::kPlatoon:
      return "b_time";
  }
  return "metric";
}

std::string render_chart_svg(std::span<const MetricsRecord> records, ChartMetric metric) {
  if (records.empty()) throw DomainError("chart: no records");
  const Scenario scenario = records.front().scenario;
  for (const auto& r : records) {
    if (r.scenario != scenario) throw DomainError("chart: records mix scenarios");
  }

  std::set<double> thetas;
  for (const auto& r : records) thetas.insert(r.theta_deg.value_or(-1.0));
  const bool per_theta = thetas.size() > 1;

  // series -> density -> samples
  using SeriesKey = std::tuple<int, double, double, double>;
  std::map<SeriesKey, std::pair<std::string, std::map<double, std::vector<double>>>> series;
  std::set<double> densities;
  for (const auto& r : sorted_for_output(records)) {
    std::optional<double> y = metric == ChartMetric::kMivd ? r.mivd : std::optional<double>(r.primary_metric);
    if (!y) continue;
    const SeriesKey key{r.protocol.rank(), r.protocol.custom_mhr_km, r.protocol.custom_ipg_ms,
                        per_theta ? r.theta_deg.value_or(-1.0) : 0.0};
    auto& s = series[key];
    if (s.first.empty()) {
      s.first = protocol_label(r.protocol);
      if (per_theta && r.theta_deg) s.first += " " + fmt2(*r.theta_deg) + " deg";
    }
    s.second[r.density].push_back(*y);
    densities.insert(r.density);
  }
  if (densities.size() < 2) {
    throw DomainError("chart: need at least two densities to draw a line, got " + std::to_string(densities.size()));
  }

  double y_max = 0.0;
  for (const auto& [key, s] : series) {
    for (const auto& [d, ys] : s.second) y_max = std::max(y_max, stats(ys).mean);
  }
  if (!(y_max > 0.0)) y_max = 1.0;
  // round the axis up to 1, 2 or 5 times a power of ten
  const double mag = std::pow(10.0, std::floor(std::log10(y_max)));
  double top = mag;
  for (double f : {1.0, 2.0, 5.0, 10.0}) {
    if (f * mag >= y_max * 1.05) {
      top = f * mag;
      break;
    }
  }

  constexpr double kW = 720, kH = 420, kLeft = 80, kRight = 200, kTop = 40, kBottom = 60;
  const double plot_w = kW - kLeft - kRight;
  const double plot_h = kH - kTop - kBottom;
  const double x_lo = *densities.begin();
  const double x_hi = *densities.rbegin();
  auto px = [&](double d) { return kLeft + (d - x_lo) / (x_hi - x_lo) * plot_w; };
  auto py = [&](double y) { return kTop + plot_h - y / top * plot_h; };

  const std::string name = chart_metric_name(scenario, metric);
  const std::string unit = metric == ChartMetric::kMivd ? "m" : "s";
  static constexpr const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b",
                                            "#e377c2", "#7f7f7f"};

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH << "\" viewBox=\"0 0 " << kW
    << " " << kH << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << fmt2(kLeft + plot_w / 2) << "\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">"
    << scenario_name(scenario) << ": " << name << " vs density</text>\n";
  // axes
  o << "<line x1=\"" << kLeft << "\" y1=\"" << fmt2(kTop + plot_h) << "\" x2=\"" << fmt2(kLeft + plot_w) << "\" y2=\""
    << fmt2(kTop + plot_h) << "\" stroke=\"black\"/>\n";
  o << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft << "\" y2=\"" << fmt2(kTop + plot_h)
    << "\" stroke=\"black\"/>\n";
  for (double d : densities) {
    o << "<line x1=\"" << fmt2(px(d)) << "\" y1=\"" << fmt2(kTop + plot_h) << "\" x2=\"" << fmt2(px(d)) << "\" y2=\""
      << fmt2(kTop + plot_h + 5) << "\" stroke=\"black\"/>\n";
    o << "<text x=\"" << fmt2(px(d)) << "\" y=\"" << fmt2(kTop + plot_h + 18) << "\" text-anchor=\"middle\">"
      << fmt2(d) << "</text>\n";
  }
  for (int k = 0; k <= 5; ++k) {
    const double y = top * k / 5.0;
    o << "<line x1=\"" << fmt2(kLeft - 5) << "\" y1=\"" << fmt2(py(y)) << "\" x2=\"" << fmt2(kLeft + plot_w)
      << "\" y2=\"" << fmt2(py(y)) << "\" stroke=\"#dddddd\"/>\n";
    o << "<text x=\"" << fmt2(kLeft - 8) << "\" y=\"" << fmt2(py(y) + 4) << "\" text-anchor=\"end\">" << fmt2(y)
      << "</text>\n";
  }
  o << "<text x=\"" << fmt2(kLeft + plot_w / 2) << "\" y=\"" << fmt2(kH - 15)
    << "\" text-anchor=\"middle\">density (veh/h)</text>\n";
  o << "<text x=\"20\" y=\"" << fmt2(kTop + plot_h / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 20 "
    << fmt2(kTop + plot_h / 2) << ")\">" << name << " (" << unit << ")</text>\n";

  std::size_t idx = 0;
  for (const auto& [key, s] : series) {
    const char* color = kColors[idx % std::size(kColors)];
    std::string points;
    for (const auto& [d, ys] : s.second) {
      if (!points.empty()) points += " ";
      points += fmt2(px(d)) + "," + fmt2(py(stats(ys).mean));
    }
    o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"" << points << "\"/>\n";
    for (const auto& [d, ys] : s.second) {
      o << "<circle cx=\"" << fmt2(px(d)) << "\" cy=\"" << fmt2(py(stats(ys).mean)) << "\" r=\"3\" fill=\"" << color
        << "\"/>\n";
    }
    const double ly = kTop + 10 + 20.0 * static_cast<double>(idx);
    o << "<line x1=\"" << fmt2(kLeft + plot_w + 15) << "\" y1=\"" << fmt2(ly) << "\" x2=\"" << fmt2(kLeft + plot_w + 40)
      << "\" y2=\"" << fmt2(ly) << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    o << "<text x=\"" << fmt2(kLeft + plot_w + 45) << "\" y=\"" << fmt2(ly + 4) << "\">" << s.first << "</text>\n";
    ++idx;
  }
  o << "</svg>\n";
  return o.str();
}

void render_chart(std::span<const MetricsRecord> records, ChartMetric metric, const std::filesystem::path& path) {
  write_file(path, render_chart_svg(records, metric), "chart");
}

}  // namespace v2x
