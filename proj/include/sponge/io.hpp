#pragma once

#include <yaml-cpp/yaml.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "sponge/engine.hpp"
#include "sponge/error.hpp"

namespace sponge {

namespace fs = std::filesystem;

/// Failure to read or write a results/scenario file.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Forecast file: `window_index,e_av_kwh` with a header row.

inline EnergyForecast parse_forecast(std::istream& in, const std::string& source) {
  EnergyForecast f;
  std::string line;
  int lineno = 0;
  bool header = false;
  auto fail = [&](const std::string& msg) { throw ConfigError(source + ":" + std::to_string(lineno) + ": " + msg); };
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    if (!header) {
      std::string compact;
      for (char c : line) {
        if (c != ' ' && c != '\t') compact += c;
      }
      if (compact != "window_index,e_av_kwh") fail("expected header 'window_index,e_av_kwh'");
      header = true;
      continue;
    }
    const auto comma = line.find(',');
    if (comma == std::string::npos) fail("expected two comma-separated fields");
    long long index = 0;
    double energy = 0.0;
    try {
      std::size_t pos = 0;
      const std::string a = line.substr(0, comma);
      const std::string b = line.substr(comma + 1);
      index = std::stoll(a, &pos);
      if (a.find_first_not_of(" \t", pos) != std::string::npos) fail("window_index is not an integer");
      energy = std::stod(b, &pos);
      if (b.find_first_not_of(" \t", pos) != std::string::npos) fail("e_av_kwh is not a number");
    } catch (const std::invalid_argument&) {
      fail("malformed number");
    } catch (const std::out_of_range&) {
      fail("number out of range");
    }
    if (index != static_cast<long long>(f.per_window_kwh.size())) {
      fail("window indices must be contiguous from 0 (expected " + std::to_string(f.per_window_kwh.size()) + ")");
    }
    if (!(energy >= 0.0) || !std::isfinite(energy)) fail("e_av_kwh must be >= 0");
    f.per_window_kwh.push_back(energy);
  }
  if (!header) throw ConfigError(source + ":1: empty forecast file (header row required)");
  if (f.per_window_kwh.empty()) throw ConfigError(source + ": forecast has no rows");
  return f;
}

inline EnergyForecast load_forecast(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open forecast file " + path.string());
  return parse_forecast(in, path.string());
}

inline void write_forecast(const EnergyForecast& f, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "window_index,e_av_kwh\n";
  char buf[64];
  for (std::size_t k = 0; k < f.per_window_kwh.size(); ++k) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g\n", k, f.per_window_kwh[k]);
    out << buf;
  }
}

// ---------------------------------------------------------------------------
// Scenario file (YAML).

namespace detail {

inline std::string where(const std::string& source, const YAML::Mark& m) {
  if (m.is_null()) return source;
  return source + ":" + std::to_string(m.line + 1) + ":" + std::to_string(m.column + 1);
}

/// Walks one mapping, remembers which keys were read, and rejects the rest.
class MapReader {
 public:
  MapReader(YAML::Node node, std::string prefix, const std::string& source)
      : node_(std::move(node)), prefix_(std::move(prefix)), source_(source) {
    if (!node_.IsMap()) throw ConfigError(where(source_, node_.Mark()) + ": " + label() + " must be a mapping");
  }

  bool has(const std::string& key) const { return static_cast<bool>(node_[key]); }

  template <typename T>
  std::optional<T> get(const std::string& key) {
    seen_.insert(key);
    const YAML::Node n = node_[key];
    if (!n) return std::nullopt;
    try {
      return n.as<T>();
    } catch (const YAML::Exception&) {
      throw ConfigError(where(source_, n.Mark()) + ": " + path(key) + ": wrong type");
    }
  }

  template <typename T>
  void read(const std::string& key, T& out) {
    if (auto v = get<T>(key)) out = *v;
  }

  /// Reads a number and checks `ok`, naming the key on failure.
  void read_checked(const std::string& key, double& out, bool (*ok)(double), const char* requirement) {
    if (auto v = get<double>(key)) {
      if (!ok(*v)) throw ConfigError(where(source_, node_[key].Mark()) + ": " + path(key) + " must be " + requirement);
      out = *v;
    }
  }

  void read_checked(const std::string& key, std::optional<double>& out, bool (*ok)(double), const char* requirement) {
    if (!has(key)) {
      seen_.insert(key);
      return;
    }
    double v = 0.0;
    read_checked(key, v, ok, requirement);
    out = v;
  }

  void touch(const std::string& key) { seen_.insert(key); }

  void read_range(const std::string& key, Range& out) {
    if (auto v = get<std::vector<double>>(key)) {
      if (v->size() != 2 || !((*v)[0] <= (*v)[1])) {
        throw ConfigError(where(source_, node_[key].Mark()) + ": " + path(key) + " must be [lo, hi] with lo <= hi");
      }
      out = Range{(*v)[0], (*v)[1]};
    }
  }

  MapReader child(const std::string& key) {
    seen_.insert(key);
    return MapReader(node_[key], path(key), source_);
  }

  void finish() const {
    for (const auto& kv : node_) {
      const auto key = kv.first.as<std::string>();
      if (!seen_.count(key)) throw ConfigError(where(source_, kv.first.Mark()) + ": unknown key '" + path(key) + "'");
    }
  }

  YAML::Mark mark(const std::string& key) const { return node_[key] ? node_[key].Mark() : node_.Mark(); }
  std::string path(const std::string& key) const { return prefix_.empty() ? key : prefix_ + "." + key; }

 private:
  std::string label() const { return prefix_.empty() ? "scenario" : prefix_; }

  YAML::Node node_;
  std::string prefix_;
  const std::string& source_;
  std::set<std::string> seen_;
};

inline bool positive(double v) { return v > 0.0 && std::isfinite(v); }
inline bool non_negative(double v) { return v >= 0.0 && std::isfinite(v); }
inline bool unit_interval_open(double v) { return v >= 0.0 && v < 1.0; }
inline bool unit_interval(double v) { return v >= 0.0 && v <= 1.0; }
inline bool open_unit(double v) { return v > 0.0 && v < 1.0; }

inline ControllerType parse_controller_type(const std::string& s, const std::string& at) {
  if (s == "sponge") return ControllerType::Sponge;
  if (s == "exact") return ControllerType::Exact;
  if (s == "optimal") return ControllerType::Optimal;
  throw ConfigError(at + ": controller.type must be one of sponge, exact, optimal");
}

inline const char* controller_name(ControllerType t) {
  switch (t) {
    case ControllerType::Sponge: return "sponge";
    case ControllerType::Exact: return "exact";
    case ControllerType::Optimal: return "optimal";
  }
  return "sponge";
}

}  // namespace detail

/// Builds a validated Scenario from a parsed YAML tree. Relative forecast
/// paths resolve against `base_dir`.
inline Scenario scenario_from_yaml(const YAML::Node& root, const fs::path& base_dir, const std::string& source) {
  using detail::MapReader;
  if (!root || root.IsNull()) throw ConfigError(source + ":1:1: parse error: empty scenario file");
  MapReader top(root, "", source);
  Scenario s;

  if (auto seed = top.get<std::uint64_t>("seed")) s.fleet.seed = *seed;
  if (auto n = top.get<std::int64_t>("n_vehicles")) {
    if (*n < 1) throw ConfigError(detail::where(source, top.mark("n_vehicles")) + ": n_vehicles must be >= 1");
    s.fleet.n_vehicles = *n;
  }
  top.read_checked("horizon_s", s.horizon_s, detail::positive, "> 0");
  top.read_checked("window_s", s.window_s, detail::positive, "> 0");
  top.read_checked("tick_s", s.tick_s, detail::positive, "> 0");

  if (top.has("controller")) {
    auto c = top.child("controller");
    if (auto type = c.get<std::string>("type")) s.controller = detail::parse_controller_type(*type, detail::where(source, c.mark("type")));
    c.read_checked("kp", s.gains.kp, detail::positive, "> 0");
    c.read_checked("ki", s.gains.ki, detail::non_negative, ">= 0");
    c.read_checked("alpha", s.aimd.alpha, [](double v) { return v > 0.0 && v <= 1.0; }, "in (0, 1]");
    c.read_checked("beta", s.aimd.beta, detail::open_unit, "in (0, 1)");
    c.read_checked("gamma", s.aimd.gamma, detail::positive, "> 0");
    if (auto w = c.get<int>("congestion_window_ticks")) {
      if (*w < 1) throw ConfigError(detail::where(source, c.mark("congestion_window_ticks")) + ": controller.congestion_window_ticks must be >= 1");
      s.aimd.congestion_window_ticks = *w;
    }
    if (c.has("utility")) {
      auto u = c.child("utility");
      if (auto form = u.get<std::string>("form")) {
        if (*form == "quadratic") {
          s.utility.form = UtilityForm::Quadratic;
        } else if (*form == "linear") {
          s.utility.form = UtilityForm::Linear;
        } else {
          throw ConfigError(detail::where(source, u.mark("form")) + ": controller.utility.form must be quadratic or linear");
        }
      }
      u.read_checked("a_min", s.utility.a_min, detail::positive, "> 0");
      u.read_checked("a_max", s.utility.a_max, detail::positive, "> 0");
      u.finish();
    }
    c.finish();
  }

  if (top.has("vehicle")) {
    auto v = top.child("vehicle");
    v.read_checked("battery_kwh", s.fleet.battery.capacity_kwh, detail::positive, "> 0");
    v.read_checked("min_soc_fraction", s.fleet.battery.min_soc_fraction, detail::unit_interval_open, "in [0, 1)");
    v.read_checked("ev_power_kw", s.fleet.battery.ev_power_kw, detail::positive, "> 0");
    v.read_checked("ice_power_kw", s.fleet.fuel.ice_power_kw, detail::positive, "> 0");
    v.read_checked("fuel_kwh", s.fleet.fuel.tank_kwh, detail::non_negative, ">= 0");
    v.read_range("init_soc_range", s.fleet.initial_soc);
    v.finish();
  }

  if (top.has("trips")) {
    auto t = top.child("trips");
    t.read_checked("start_window_fraction", s.fleet.trips.start_window_fraction, detail::unit_interval, "in [0, 1]");
    t.read_range("duration_range_fraction", s.fleet.trips.duration_fraction);
    t.finish();
  }

  if (auto file = top.get<std::string>("forecast_file")) {
    s.forecast_file = *file;
    const fs::path p = fs::path(*file).is_absolute() ? fs::path(*file) : base_dir / *file;
    s.forecast = load_forecast(p);
  }
  if (top.has("forecast_probe_fraction")) {
    const YAML::Node n = root["forecast_probe_fraction"];
    try {
      s.forecast_probe_fraction = n.IsSequence() ? n.as<std::vector<double>>() : std::vector<double>{n.as<double>()};
    } catch (const YAML::Exception&) {
      throw ConfigError(detail::where(source, n.Mark()) + ": forecast_probe_fraction: wrong type");
    }
    top.touch("forecast_probe_fraction");
  }
  top.finish();

  s.fleet.trips.horizon_ticks = 1;
  try {
    s.fleet.trips.horizon_ticks = horizon_ticks(s);
    validate(s);
  } catch (const ConfigError& e) {
    throw ConfigError(source + ": " + e.what());
  }
  return s;
}

inline YAML::Node parse_yaml(const std::string& text, const std::string& source) {
  try {
    return YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError(detail::where(source, e.mark) + ": parse error: " + e.msg);
  }
}

inline std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open scenario file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline Scenario load_scenario(const fs::path& path) {
  const auto source = path.string();
  return scenario_from_yaml(parse_yaml(read_text(path), source), path.parent_path(), source);
}

/// YAML text for `s`. Writes no forecast; pair with write_forecast or use
/// write_scenario.
inline std::string dump_scenario(const Scenario& s, const std::string& forecast_file) {
  YAML::Emitter out;
  out.SetDoublePrecision(17);
  out << YAML::BeginMap;
  out << YAML::Key << "seed" << YAML::Value << s.fleet.seed;
  out << YAML::Key << "n_vehicles" << YAML::Value << s.fleet.n_vehicles;
  out << YAML::Key << "horizon_s" << YAML::Value << s.horizon_s;
  out << YAML::Key << "window_s" << YAML::Value << s.window_s;
  out << YAML::Key << "tick_s" << YAML::Value << s.tick_s;

  out << YAML::Key << "controller" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "type" << YAML::Value << detail::controller_name(s.controller);
  if (s.gains.kp) out << YAML::Key << "kp" << YAML::Value << *s.gains.kp;
  if (s.gains.ki) out << YAML::Key << "ki" << YAML::Value << *s.gains.ki;
  out << YAML::Key << "alpha" << YAML::Value << s.aimd.alpha;
  out << YAML::Key << "beta" << YAML::Value << s.aimd.beta;
  if (s.aimd.gamma) out << YAML::Key << "gamma" << YAML::Value << *s.aimd.gamma;
  out << YAML::Key << "congestion_window_ticks" << YAML::Value << s.aimd.congestion_window_ticks;
  out << YAML::Key << "utility" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "form" << YAML::Value << (s.utility.form == UtilityForm::Quadratic ? "quadratic" : "linear");
  out << YAML::Key << "a_min" << YAML::Value << s.utility.a_min;
  out << YAML::Key << "a_max" << YAML::Value << s.utility.a_max;
  out << YAML::EndMap << YAML::EndMap;

  const auto& f = s.fleet;
  out << YAML::Key << "vehicle" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "battery_kwh" << YAML::Value << f.battery.capacity_kwh;
  out << YAML::Key << "min_soc_fraction" << YAML::Value << f.battery.min_soc_fraction;
  out << YAML::Key << "ev_power_kw" << YAML::Value << f.battery.ev_power_kw;
  out << YAML::Key << "ice_power_kw" << YAML::Value << f.fuel.ice_power_kw;
  out << YAML::Key << "fuel_kwh" << YAML::Value << f.fuel.tank_kwh;
  out << YAML::Key << "init_soc_range" << YAML::Value << YAML::Flow << YAML::BeginSeq << f.initial_soc.lo
      << f.initial_soc.hi << YAML::EndSeq;
  out << YAML::EndMap;

  out << YAML::Key << "trips" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "start_window_fraction" << YAML::Value << f.trips.start_window_fraction;
  out << YAML::Key << "duration_range_fraction" << YAML::Value << YAML::Flow << YAML::BeginSeq
      << f.trips.duration_fraction.lo << f.trips.duration_fraction.hi << YAML::EndSeq;
  out << YAML::EndMap;

  if (!s.forecast_probe_fraction.empty()) {
    out << YAML::Key << "forecast_probe_fraction" << YAML::Value << YAML::Flow << s.forecast_probe_fraction;
  } else {
    out << YAML::Key << "forecast_file" << YAML::Value << forecast_file;
  }
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

/// Writes `<dir>/scenario.yaml` (and `<dir>/forecast.csv` when the scenario
/// carries an explicit forecast). Returns the scenario path.
inline fs::path write_scenario(const Scenario& s, const fs::path& dir) {
  fs::create_directories(dir);
  const std::string forecast_name =
      s.forecast_file.empty() ? std::string("forecast.csv") : fs::path(s.forecast_file).filename().string();
  if (s.forecast_probe_fraction.empty()) write_forecast(s.forecast, dir / forecast_name);
  const auto path = dir / "scenario.yaml";
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << dump_scenario(s, forecast_name);
  return path;
}

// ---------------------------------------------------------------------------
// Results.

inline constexpr const char* kTimeseriesHeader =
    "tick,window,target_cum_kwh,achieved_cum_kwh,n_ev,n_ice,n_idle,n_eligible,signal_p,consensus_spread,deficit_kwh";

/// Probability carried by a record's broadcast: the requested p, 0.5 when
/// released, absent otherwise.
inline std::optional<double> signal_probability(const std::optional<BroadcastSignal>& s) {
  if (!s) return std::nullopt;
  if (s->is_free()) return kFreeModeProbability;
  return s->probability();
}

inline void write_timeseries(const std::vector<MetricsRecord>& records, std::ostream& out) {
  out << kTimeseriesHeader << '\n';
  char buf[512];
  auto opt = [](std::optional<double> v, char* dst, std::size_t n) {
    if (v) {
      std::snprintf(dst, n, "%.6f", *v);
    } else {
      dst[0] = '\0';
    }
  };
  for (const auto& r : records) {
    char p[32], c[32];
    opt(signal_probability(r.signal), p, sizeof p);
    opt(r.consensus_spread, c, sizeof c);
    std::snprintf(buf, sizeof buf, "%lld,%d,%.6f,%.6f,%d,%d,%d,%d,%s,%s,%.6f\n", static_cast<long long>(r.tick), r.window,
                  r.cumulative_target.kwh(), r.achieved.kwh(), r.n_ev, r.n_ice, r.n_idle, r.n_eligible, p, c,
                  r.deficit_running.kwh());
    out << buf;
  }
}

inline void write_timeseries(const std::vector<MetricsRecord>& records, const fs::path& path) {
  if (records.empty()) throw IoError("no records to write");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  write_timeseries(records, static_cast<std::ostream&>(out));
  if (!out) throw IoError("error while writing " + path.string());
}

inline nlohmann::ordered_json summary_json(const RunSummary& s) {
  nlohmann::ordered_json j;
  auto windows = nlohmann::ordered_json::array();
  for (const auto& w : s.windows) {
    windows.push_back({{"index", w.window.index},
                       {"start_tick", w.window.start_tick},
                       {"end_tick", w.window.end_tick},
                       {"forecast_kwh", w.forecast.kwh()},
                       {"target_kwh", w.target.kwh()},
                       {"achieved_kwh", w.achieved.kwh()},
                       {"deficit_kwh", w.deficit.kwh()},
                       {"surplus_kwh", w.surplus.kwh()},
                       {"max_dissipation_kwh", w.max_dissipation.kwh()},
                       {"feasible", w.feasible},
                       {"overshoot_bound_kwh", w.overshoot_bound.kwh()}});
  }
  j["windows"] = std::move(windows);
  j["terminal_relative_error"] = s.terminal_relative_error;
  j["max_overshoot_kwh"] = s.max_overshoot.kwh();
  j["final_deficit_kwh"] = s.final_deficit.kwh();
  j["final_surplus_kwh"] = s.final_surplus.kwh();
  j["forfeited_surplus_kwh"] = s.forfeited_surplus.kwh();
  j["consensus_spread_end"] = s.consensus_spread_end ? nlohmann::ordered_json(*s.consensus_spread_end) : nlohmann::ordered_json(nullptr);
  j["wall_clock_s"] = s.wall_clock_s;
  return j;
}

}  // namespace sponge
