#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sponge/aimd.hpp"
#include "sponge/controllers.hpp"
#include "sponge/error.hpp"
#include "sponge/fleet.hpp"
#include "sponge/signal.hpp"
#include "sponge/target.hpp"
#include "sponge/units.hpp"

namespace sponge {

enum class ControllerType { Sponge, Exact, Optimal };

struct Scenario {
  FleetConfig fleet;
  double horizon_s = 1000.0;
  double window_s = 250.0;
  double tick_s = 1.0;
  ControllerType controller = ControllerType::Sponge;
  ControllerGains gains;
  AimdParams aimd;
  UtilityConfig utility;
  // Exactly one forecast source: an explicit per-window forecast, or
  // per-window fractions of the feasibility bound (one entry applies to all).
  EnergyForecast forecast;
  std::string forecast_file;
  std::vector<double> forecast_probe_fraction;

  friend bool operator==(const Scenario&, const Scenario&) = default;
};

namespace detail {
inline Tick whole_ticks(double seconds, double tick_s, const char* what) {
  const double n = seconds / tick_s;
  const double r = std::round(n);
  if (!(r >= 1.0) || std::fabs(n - r) > 1e-9 * std::max(1.0, r)) {
    throw ConfigError(std::string(what) + " must be a positive whole number of ticks");
  }
  return static_cast<Tick>(r);
}
}  // namespace detail

inline Tick horizon_ticks(const Scenario& s) { return detail::whole_ticks(s.horizon_s, s.tick_s, "horizon_s"); }
inline Tick window_ticks(const Scenario& s) { return detail::whole_ticks(s.window_s, s.tick_s, "window_s"); }

inline std::vector<Window> scenario_windows(const Scenario& s) {
  return build_windows(horizon_ticks(s), window_ticks(s), s.tick_s);
}

/// Fleet configuration with the trip horizon tied to the scenario horizon.
inline FleetConfig fleet_config(const Scenario& s) {
  FleetConfig f = s.fleet;
  f.trips.horizon_ticks = horizon_ticks(s);
  return f;
}

inline void validate(const Scenario& s) {
  if (!(s.tick_s > 0.0)) throw ConfigError("tick_s must be > 0");
  if (!(s.horizon_s > 0.0)) throw ConfigError("horizon_s must be > 0");
  if (!(s.window_s > 0.0)) throw ConfigError("window_s must be > 0");
  validate(fleet_config(s));
  const auto windows = scenario_windows(s);
  if (s.gains.kp && !(*s.gains.kp > 0.0)) throw ConfigError("controller.kp must be > 0");
  if (s.gains.ki && !(*s.gains.ki >= 0.0)) throw ConfigError("controller.ki must be >= 0");
  if (s.controller == ControllerType::Optimal) {
    validate(s.aimd);
    validate(s.utility);
  }
  const bool by_fraction = !s.forecast_probe_fraction.empty();
  if (by_fraction == !s.forecast.per_window_kwh.empty()) {
    throw ConfigError("exactly one of forecast_file or forecast_probe_fraction is required");
  }
  if (by_fraction) {
    const auto n = s.forecast_probe_fraction.size();
    if (n != 1 && n < windows.size()) throw ConfigError("forecast_probe_fraction has fewer entries than windows");
    for (double f : s.forecast_probe_fraction) {
      if (!(f >= 0.0) || !std::isfinite(f)) throw ConfigError("forecast_probe_fraction entries must be >= 0");
    }
  } else {
    if (s.forecast.per_window_kwh.size() < windows.size()) {
      throw ConfigError("forecast has " + std::to_string(s.forecast.per_window_kwh.size()) + " entries but the run has " +
                        std::to_string(windows.size()) + " windows");
    }
    for (double e : s.forecast.per_window_kwh) {
      if (!(e >= 0.0) || !std::isfinite(e)) throw ConfigError("forecast entries must be >= 0");
    }
  }
}

/// Drive every vehicle for one tick with a fixed broadcast.
inline void step_fleet(std::vector<VehicleState>& fleet, const BroadcastSignal& signal, double dt_s) {
  const std::optional<BroadcastSignal> s(signal);
  for (auto& v : fleet) step_vehicle(v, s, dt_s);
}

/// Dissipation over `window` when every eligible vehicle is forced into EV
/// mode, starting from `fleet` (a copy positioned at the window start).
inline Energy max_window_dissipation(std::vector<VehicleState> fleet, const Window& window) {
  reset_window(fleet);
  for (Tick t = window.start_tick; t < window.end_tick; ++t) {
    step_fleet(fleet, BroadcastSignal{ModeProbability{1.0}, t}, window.dt_s);
  }
  return aggregate_dissipation(fleet);
}

/// Upper bound on what any controller can free in each window: the fleet
/// drives ICE-only before the window (batteries untouched) and all-EV inside it.
inline std::vector<Energy> feasibility_bounds(const Scenario& s) {
  auto fleet = spawn_fleet(fleet_config(s));
  std::vector<Energy> out;
  for (const auto& w : scenario_windows(s)) {
    out.push_back(max_window_dissipation(fleet, w));
    for (Tick t = w.start_tick; t < w.end_tick; ++t) step_fleet(fleet, BroadcastSignal{ModeProbability{0.0}, t}, s.tick_s);
  }
  return out;
}

inline Energy feasibility_probe(const Scenario& s, const Window& window) {
  auto fleet = spawn_fleet(fleet_config(s));
  for (Tick t = 0; t < window.start_tick; ++t) step_fleet(fleet, BroadcastSignal{ModeProbability{0.0}, t}, s.tick_s);
  return max_window_dissipation(std::move(fleet), window);
}

/// Per-window forecast in kWh after resolving probe fractions.
inline EnergyForecast resolve_forecast(const Scenario& s) {
  if (s.forecast_probe_fraction.empty()) return s.forecast;
  const auto bounds = feasibility_bounds(s);
  EnergyForecast f;
  for (std::size_t k = 0; k < bounds.size(); ++k) {
    const double frac = s.forecast_probe_fraction.size() == 1 ? s.forecast_probe_fraction[0] : s.forecast_probe_fraction[k];
    f.per_window_kwh.push_back(frac * bounds[k].kwh());
  }
  return f;
}

/// Non-fatal configuration issues: an explicit kp too small for the loop to
/// reach p = 1 on some window's forecast.
inline std::vector<std::string> scenario_warnings(const Scenario& s) {
  std::vector<std::string> out;
  if (!s.gains.kp || s.controller == ControllerType::Optimal) return out;
  const auto f = resolve_forecast(s);
  const auto windows = scenario_windows(s);
  for (const auto& w : windows) {
    const double e = window_forecast(f, w, window_ticks(s)).kwh();
    if (e > 0.0 && *s.gains.kp * e < 1.0) {
      out.push_back("controller.kp * forecast for window " + std::to_string(w.index) + " is " + std::to_string(*s.gains.kp * e) +
                    " < 1; the controller cannot request p = 1");
    }
  }
  return out;
}

struct MetricsRecord {
  Tick tick = 0;
  int window = 0;
  Energy cumulative_target;
  Energy achieved;
  int n_ev = 0;
  int n_ice = 0;
  int n_idle = 0;
  int n_active = 0;
  int n_eligible = 0;
  std::optional<BroadcastSignal> signal;
  std::optional<double> consensus_spread;
  Energy deficit_running;  // max(0, window target - achieved)
};

struct WindowSummary {
  Window window;
  Energy forecast;         // pro-rated forecast entry
  Energy deficit_in;
  Energy surplus_in;       // previous surplus offset against this window's forecast
  Energy target;
  Energy achieved;
  Energy deficit;
  Energy surplus;
  Energy max_dissipation;  // all-EV bound from the fleet state at window start
  bool feasible = true;
  int n_active_at_crossing = 0;  // vehicles on the road on the tick the target was met
  Energy overshoot_bound;        // n_active_at_crossing * max EV energy per tick
};

struct RunSummary {
  std::vector<WindowSummary> windows;
  double terminal_relative_error = 0.0;
  Energy max_overshoot;
  std::optional<double> consensus_spread_end;  // last tick with a defined spread
  double wall_clock_s = 0.0;
  Energy final_deficit;
  Energy final_surplus;
  Energy forfeited_surplus;  // surplus never offset against a later target
};

/// Deterministic tick loop. Signals are computed from the aggregate reported
/// at the end of the previous tick.
class Simulation {
 public:
  explicit Simulation(Scenario scenario) : scenario_(std::move(scenario)) {
    validate(scenario_);
    windows_ = scenario_windows(scenario_);
    nominal_window_ticks_ = window_ticks(scenario_);
    forecast_ = resolve_forecast(scenario_);
    fleet_ = spawn_fleet(fleet_config(scenario_));
    if (scenario_.controller == ControllerType::Optimal) {
      agents_ = spawn_agents(fleet_, scenario_.fleet.seed, scenario_.aimd, scenario_.utility);
    }
    monitor_ = CongestionMonitor(scenario_.aimd.congestion_window_ticks);
    for (const auto& v : fleet_) {
      max_ev_tick_ = max(max_ev_tick_, energy_per_tick(v.battery.ev_power_kw, scenario_.tick_s));
    }
  }

  bool done() const { return tick_ >= windows_.back().end_tick; }
  Tick tick() const { return tick_; }

  const Scenario& scenario() const { return scenario_; }
  const std::vector<Window>& windows() const { return windows_; }
  const EnergyForecast& forecast() const { return forecast_; }
  const std::vector<VehicleState>& fleet() const { return fleet_; }
  const std::vector<AimdAgentState>& agents() const { return agents_; }
  const ControllerState& controller() const { return controller_; }
  const TargetTrajectory& trajectory() const { return trajectory_; }
  const std::vector<MetricsRecord>& records() const { return records_; }
  const RunSummary& summary() const { return summary_; }
  Energy max_ev_energy_per_tick() const { return max_ev_tick_; }

  /// Vehicles currently taking part in the AIMD programme.
  bool in_programme(std::size_t i) const { return fleet_[i].on_trip() && fleet_[i].eligible; }

  const MetricsRecord& step() {
    if (done()) throw std::logic_error("simulation already finished");
    if (tick_ == windows_[window_idx_].start_tick) begin_window();

    const Energy before = aggregate_dissipation(fleet_);
    const auto signal = broadcast(before);
    if (scenario_.controller == ControllerType::Optimal) update_agents(signal);

    MetricsRecord rec;
    rec.tick = tick_;
    rec.window = window_idx_;
    rec.signal = signal;

    std::vector<bool> was_in(agents_.size());
    for (std::size_t i = 0; i < agents_.size(); ++i) was_in[i] = in_programme(i);

    int n_active = 0;
    for (const auto& v : fleet_) n_active += v.on_trip() ? 1 : 0;

    for (std::size_t i = 0; i < fleet_.size(); ++i) {
      auto& v = fleet_[i];
      step_vehicle(v, signal, scenario_.tick_s);
      switch (v.mode) {
        case DriveMode::EV: ++rec.n_ev; break;
        case DriveMode::ICE: ++rec.n_ice; break;
        case DriveMode::Idle: ++rec.n_idle; break;
      }
      if (v.eligible) ++rec.n_eligible;
      if (i < was_in.size() && was_in[i]) update_share(agents_[i], v.mode);
    }
    rec.n_active = rec.n_ev + rec.n_ice;

    const Energy after = aggregate_dissipation(fleet_);
    monitor_.push(after - before);
    const Energy total = trajectory_.target_total;
    if (!crossed_ && after >= total && before < total) {
      crossed_ = true;
      crossing_active_ = n_active;
    }

    const Tick elapsed = tick_ + 1 - windows_[window_idx_].start_tick;
    rec.cumulative_target = trajectory_.cumulative_target(elapsed);
    rec.achieved = after;
    rec.deficit_running = max(Energy{}, total - after);
    if (scenario_.controller == ControllerType::Optimal) rec.consensus_spread = programme_spread(was_in);
    records_.push_back(rec);

    ++tick_;
    if (tick_ == windows_[window_idx_].end_tick) end_window(after);
    return records_.back();
  }

  void run() {
    const auto t0 = std::chrono::steady_clock::now();
    while (!done()) step();
    summary_.wall_clock_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }

  /// Spread of f'(x) over agents selected by `mask` that have driven.
  std::optional<double> programme_spread(const std::vector<bool>& mask) const {
    std::vector<double> d;
    for (std::size_t i = 0; i < agents_.size(); ++i) {
      if (mask[i] && agents_[i].active_ticks > 0) d.push_back(agents_[i].derivative());
    }
    return consensus_spread(std::span<const double>(d));
  }

  /// Spread over agents that are on the road and eligible at the next tick.
  std::optional<double> programme_spread() const {
    std::vector<bool> mask(agents_.size());
    for (std::size_t i = 0; i < agents_.size(); ++i) mask[i] = in_programme(i);
    return programme_spread(mask);
  }

 private:
  bool exact_type() const { return scenario_.controller != ControllerType::Sponge; }

  void begin_window() {
    const auto& w = windows_[window_idx_];
    WindowSummary ws;
    ws.window = w;
    ws.forecast = window_forecast(forecast_, w, nominal_window_ticks_);
    ws.deficit_in = carried_deficit_;
    ws.surplus_in = carried_surplus_;
    const Energy offset = min(ws.forecast, carried_surplus_);
    summary_.forfeited_surplus += carried_surplus_ - offset;
    trajectory_ = build_trajectory(w, ws.forecast - offset, carried_deficit_);
    ws.target = trajectory_.target_total;
    ws.max_dissipation = max_window_dissipation(fleet_, w);
    ws.feasible = ws.target <= ws.max_dissipation;
    summary_.windows.push_back(ws);

    reset_window(fleet_);
    monitor_.reset();
    crossed_ = false;
    crossing_active_ = 0;
    if (scenario_.controller != ControllerType::Optimal) {
      const auto mode = scenario_.controller == ControllerType::Sponge ? ControllerMode::Sponge : ControllerMode::ExactSponge;
      controller_ = make_controller(mode, scenario_.gains, trajectory_);
    } else {
      controller_ = make_controller(ControllerMode::ExactSponge, scenario_.gains, trajectory_);
    }
  }

  void end_window(Energy achieved) {
    auto& ws = summary_.windows.back();
    ws.achieved = achieved;
    const auto c = carry_over(trajectory_, achieved);
    ws.deficit = c.deficit;
    ws.surplus = c.surplus;
    ws.n_active_at_crossing = crossing_active_;
    ws.overshoot_bound = max_ev_tick_ * crossing_active_;
    summary_.max_overshoot = max(summary_.max_overshoot, c.surplus);

    carried_deficit_ = c.deficit;
    if (exact_type()) {
      carried_surplus_ = c.surplus;
    } else {
      summary_.forfeited_surplus += c.surplus;
      carried_surplus_ = Energy{};
    }

    ++window_idx_;
    if (done()) finish();
  }

  void finish() {
    const auto& last = summary_.windows.back();
    summary_.final_deficit = last.deficit;
    summary_.final_surplus = exact_type() ? last.surplus : Energy{};
    const double t = last.target.kwh();
    summary_.terminal_relative_error = t > 0.0 ? std::fabs(last.achieved.kwh() - t) / t : 0.0;
    for (auto it = records_.rbegin(); it != records_.rend() && !summary_.consensus_spread_end; ++it) {
      summary_.consensus_spread_end = it->consensus_spread;
    }
  }

  std::optional<BroadcastSignal> broadcast(Energy achieved) {
    if (scenario_.controller != ControllerType::Optimal) {
      return controller_update(controller_, achieved, tick_, scenario_.tick_s);
    }
    if (controller_.cutoff || achieved >= trajectory_.target_total) {
      controller_.cutoff = true;
      return BroadcastSignal{ModeProbability{0.0}, tick_};
    }
    if (congestion_detect(monitor_.rate_kw(scenario_.tick_s), trajectory_.rate_kw())) {
      return BroadcastSignal{CongestionEvent{}, tick_};
    }
    return std::nullopt;
  }

  void update_agents(const std::optional<BroadcastSignal>& signal) {
    if (signal && signal->probability()) return;  // hard cutoff overrides the agents
    const bool congested = signal && signal->is_congestion();
    for (std::size_t i = 0; i < agents_.size(); ++i) {
      if (!in_programme(i)) continue;
      auto& a = agents_[i];
      if (congested) {
        backoff_decision(a, CongestionEvent{});
      } else {
        additive_increase(a);
      }
      fleet_[i].p_ev = a.p_ev;
    }
  }

  Scenario scenario_;
  std::vector<Window> windows_;
  Tick nominal_window_ticks_ = 1;
  EnergyForecast forecast_;
  std::vector<VehicleState> fleet_;
  std::vector<AimdAgentState> agents_;
  CongestionMonitor monitor_{1};
  ControllerState controller_;
  TargetTrajectory trajectory_;
  std::vector<MetricsRecord> records_;
  RunSummary summary_;
  Energy max_ev_tick_;
  Energy carried_deficit_;
  Energy carried_surplus_;
  bool crossed_ = false;
  int crossing_active_ = 0;
  Tick tick_ = 0;
  int window_idx_ = 0;
};

struct RunResult {
  std::vector<MetricsRecord> records;
  RunSummary summary;
};

inline RunResult run_scenario(const Scenario& scenario) {
  Simulation sim(scenario);
  sim.run();
  return RunResult{sim.records(), sim.summary()};
}

}  // namespace sponge
