#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "sponge/error.hpp"
#include "sponge/units.hpp"

namespace sponge {

/// Forecast renewable energy; entry k is the energy available at the
/// charging period that follows driving window k.
struct EnergyForecast {
  std::vector<double> per_window_kwh;
  friend bool operator==(const EnergyForecast&, const EnergyForecast&) = default;
};

struct Window {
  int index = 0;
  Tick start_tick = 0;
  Tick end_tick = 0;
  double dt_s = 1.0;

  Tick ticks() const { return end_tick - start_tick; }
  double duration_s() const { return static_cast<double>(ticks()) * dt_s; }
  bool contains(Tick t) const { return t >= start_tick && t < end_tick; }
  friend bool operator==(const Window&, const Window&) = default;
};

/// Contiguous windows covering [0, horizon). A final partial window is kept.
inline std::vector<Window> build_windows(Tick horizon_ticks, Tick window_ticks, double dt_s) {
  if (window_ticks <= 0) throw ConfigError("window length must be at least one tick");
  if (horizon_ticks <= 0) throw ConfigError("horizon must be at least one tick");
  if (!(dt_s > 0.0)) throw ConfigError("tick length must be > 0");
  std::vector<Window> out;
  int k = 0;
  for (Tick s = 0; s < horizon_ticks; s += window_ticks) {
    out.push_back(Window{k++, s, std::min(s + window_ticks, horizon_ticks), dt_s});
  }
  return out;
}

__extension__ typedef __int128 Wide;

/// Uniform-rate target over one window.
struct TargetTrajectory {
  Window window;
  Energy target_total;

  /// E(k,t) in kW.
  double rate_kw() const { return target_total.kwh() * 3600.0 / window.duration_s(); }

  /// Target energy after `elapsed` ticks of the window; exact at both ends.
  Energy cumulative_target(Tick elapsed) const {
    const Tick n = window.ticks();
    elapsed = std::clamp<Tick>(elapsed, 0, n);
    const Wide scaled = static_cast<Wide>(target_total.mj()) * elapsed / n;
    return Energy::from_mj(static_cast<std::int64_t>(scaled));
  }
};

inline TargetTrajectory build_trajectory(const Window& window, Energy forecast_entry, Energy deficit_in) {
  if (window.ticks() <= 0 || !(window.dt_s > 0.0)) {
    throw ConfigError("cannot build a trajectory over a zero-duration window");
  }
  if (forecast_entry < Energy{} || deficit_in < Energy{}) {
    throw DomainError("forecast entry and carried deficit must be non-negative");
  }
  return TargetTrajectory{window, forecast_entry + deficit_in};
}

struct CarryOver {
  Energy deficit;  // max(0, target - achieved)
  Energy surplus;  // max(0, achieved - target); consumed only by exact-type runs
  friend bool operator==(const CarryOver&, const CarryOver&) = default;
};

inline CarryOver carry_over(const TargetTrajectory& traj, Energy achieved) {
  if (achieved < Energy{}) throw DomainError("achieved energy must be non-negative");
  return CarryOver{max(Energy{}, traj.target_total - achieved),
                   max(Energy{}, achieved - traj.target_total)};
}

/// Forecast entry for a window, pro-rated if the window is truncated.
inline Energy window_forecast(const EnergyForecast& f, const Window& w, Tick nominal_window_ticks) {
  if (w.index < 0 || static_cast<std::size_t>(w.index) >= f.per_window_kwh.size()) {
    throw ConfigError("forecast has no entry for window " + std::to_string(w.index));
  }
  double kwh = f.per_window_kwh[static_cast<std::size_t>(w.index)];
  if (w.ticks() < nominal_window_ticks) {
    kwh *= static_cast<double>(w.ticks()) / static_cast<double>(nominal_window_ticks);
  }
  return Energy::from_kwh(kwh);
}

}  // namespace sponge
