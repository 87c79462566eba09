#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "sponge/error.hpp"
#include "sponge/rng.hpp"
#include "sponge/signal.hpp"
#include "sponge/units.hpp"

namespace sponge {

struct BatterySpec {
  double capacity_kwh = 10.0;
  double min_soc_fraction = 0.10;
  double ev_power_kw = 20.0;

  friend bool operator==(const BatterySpec&, const BatterySpec&) = default;
};

struct FuelSpec {
  double tank_kwh = 400.0;
  double ice_power_kw = 30.0;

  friend bool operator==(const FuelSpec&, const FuelSpec&) = default;
};

enum class DriveMode { Idle, EV, ICE };

/// One trip per vehicle, active on [start_tick, end_tick).
struct TripPlan {
  Tick start_tick = 0;
  Tick end_tick = 1;

  bool active(Tick t) const { return t >= start_tick && t < end_tick; }
  friend bool operator==(const TripPlan&, const TripPlan&) = default;
};

struct Range {
  double lo = 0.0;
  double hi = 1.0;
  friend bool operator==(const Range&, const Range&) = default;
};

/// Trip starts are uniform over the first `start_window_fraction` of the
/// horizon; durations are a uniform fraction of the remaining horizon.
struct TripProcess {
  Tick horizon_ticks = 1000;
  double start_window_fraction = 0.2;
  Range duration_fraction{0.5, 1.0};

  friend bool operator==(const TripProcess&, const TripProcess&) = default;
};

struct FleetConfig {
  std::int64_t n_vehicles = 600;
  std::int64_t n_max = 1'000'000;
  Range initial_soc{0.6, 0.9};
  std::uint64_t seed = 1;
  BatterySpec battery;
  FuelSpec fuel;
  TripProcess trips;

  friend bool operator==(const FleetConfig&, const FleetConfig&) = default;
};

struct VehicleState {
  std::uint64_t id = 0;
  BatterySpec battery;
  FuelSpec fuel_spec;
  Energy initial_soc;
  Energy soc;
  Energy fuel;
  DriveMode mode = DriveMode::Idle;
  double p_ev = 0.0;  // vehicles enter the road in ICE mode
  Energy dissipated_window;
  Energy dissipated_total;
  std::optional<TripPlan> trip;
  bool eligible = true;
  Tick clock = 0;
  std::mt19937_64 mode_rng;

  bool on_trip() const { return trip && trip->active(clock); }
};

inline Energy battery_capacity(const BatterySpec& b) { return Energy::from_kwh(b.capacity_kwh); }

/// Lowest state of charge the programme may drive a battery down to.
inline Energy battery_floor(const BatterySpec& b) {
  return Energy::from_kwh(b.min_soc_fraction * b.capacity_kwh);
}

inline void validate(const FleetConfig& c) {
  if (c.n_vehicles < 1) throw ConfigError("n_vehicles must be >= 1");
  if (c.n_vehicles > c.n_max) throw ConfigError("n_vehicles exceeds n_max");
  if (!(c.initial_soc.lo >= 0.0 && c.initial_soc.lo <= c.initial_soc.hi && c.initial_soc.hi <= 1.0)) {
    throw ConfigError("initial soc range must satisfy 0 <= lo <= hi <= 1");
  }
  if (!(c.battery.capacity_kwh > 0.0)) throw ConfigError("battery capacity must be > 0");
  if (!(c.battery.min_soc_fraction >= 0.0 && c.battery.min_soc_fraction < 1.0)) {
    throw ConfigError("min_soc_fraction must be in [0, 1)");
  }
  if (c.initial_soc.lo < c.battery.min_soc_fraction) {
    throw ConfigError("initial soc range must start at or above min_soc_fraction");
  }
  if (!(c.battery.ev_power_kw > 0.0)) throw ConfigError("ev power must be > 0");
  if (!(c.fuel.ice_power_kw > 0.0)) throw ConfigError("ice power must be > 0");
  if (!(c.fuel.tank_kwh >= 0.0)) throw ConfigError("fuel tank energy must be >= 0");
  const auto& t = c.trips;
  if (t.horizon_ticks < 1) throw ConfigError("trip horizon must be >= 1 tick");
  if (!(t.start_window_fraction >= 0.0 && t.start_window_fraction <= 1.0)) {
    throw ConfigError("trip start_window_fraction must be in [0, 1]");
  }
  if (!(t.duration_fraction.lo > 0.0 && t.duration_fraction.lo <= t.duration_fraction.hi &&
        t.duration_fraction.hi <= 1.0)) {
    throw ConfigError("trip duration fraction range must satisfy 0 < lo <= hi <= 1");
  }
}

inline TripPlan draw_trip(const TripProcess& p, std::mt19937_64& g) {
  const auto h = p.horizon_ticks;
  Tick start = static_cast<Tick>(uniform01(g) * p.start_window_fraction * static_cast<double>(h));
  start = std::min<Tick>(start, h - 1);
  const double frac = uniform(g, p.duration_fraction.lo, p.duration_fraction.hi);
  const Tick remaining = h - start;
  Tick duration = std::llround(frac * static_cast<double>(remaining));
  duration = std::clamp<Tick>(duration, 1, remaining);
  return TripPlan{start, start + duration};
}

inline std::vector<VehicleState> spawn_fleet(const FleetConfig& config) {
  validate(config);
  std::vector<VehicleState> fleet;
  fleet.reserve(static_cast<std::size_t>(config.n_vehicles));
  const Energy capacity = battery_capacity(config.battery);
  for (std::int64_t i = 0; i < config.n_vehicles; ++i) {
    const auto id = static_cast<std::uint64_t>(i);
    auto spawn = make_stream(config.seed, id, Stream::Spawn);
    VehicleState v;
    v.id = id;
    v.battery = config.battery;
    v.fuel_spec = config.fuel;
    const double soc_fraction = uniform(spawn, config.initial_soc.lo, config.initial_soc.hi);
    v.soc = min(Energy::from_kwh(soc_fraction * config.battery.capacity_kwh), capacity);
    v.initial_soc = v.soc;
    v.fuel = Energy::from_kwh(config.fuel.tank_kwh);
    v.trip = draw_trip(config.trips, spawn);
    v.mode_rng = make_stream(config.seed, id, Stream::Mode);
    fleet.push_back(std::move(v));
  }
  for (auto& v : fleet) v.eligible = v.soc > battery_floor(v.battery) && v.fuel > Energy{};
  return fleet;
}

/// False once the battery sits at its floor or the tank is empty. Exclusion
/// is sticky: a vehicle that has left the programme never rejoins.
inline bool check_eligibility(const VehicleState& v) {
  return v.eligible && v.soc > battery_floor(v.battery) && v.fuel > Energy{};
}

/// Apply a broadcast (if any) and advance one vehicle by one tick.
/// A CongestionEvent or no broadcast leaves p_ev as set by the vehicle's agent.
inline void step_vehicle(VehicleState& v, const std::optional<BroadcastSignal>& signal, double dt_s) {
  if (signal) {
    if (auto p = signal->probability()) {
      v.p_ev = *p;
    } else if (signal->is_free()) {
      v.p_ev = kFreeModeProbability;
    }
  }

  if (!v.on_trip()) {
    v.mode = DriveMode::Idle;
    ++v.clock;
    return;
  }

  const bool ev = v.eligible && bernoulli(v.mode_rng, v.p_ev);
  if (ev) {
    v.mode = DriveMode::EV;
    const Energy headroom = v.soc - battery_floor(v.battery);
    const Energy used = min(energy_per_tick(v.battery.ev_power_kw, dt_s), max(headroom, Energy{}));
    v.soc -= used;
    v.dissipated_window += used;
    v.dissipated_total += used;
  } else {
    v.mode = DriveMode::ICE;
    const Energy burned = min(energy_per_tick(v.fuel_spec.ice_power_kw, dt_s), v.fuel);
    v.fuel -= burned;
  }
  v.eligible = check_eligibility(v);
  ++v.clock;
}

/// Sum of per-window dissipation in id order (fixed order keeps it bit-stable).
inline Energy aggregate_dissipation(std::span<const VehicleState> fleet) {
  Energy total;
  for (const auto& v : fleet) total += v.dissipated_window;
  return total;
}

inline void reset_window(std::span<VehicleState> fleet) {
  for (auto& v : fleet) v.dissipated_window = Energy{};
}

}  // namespace sponge
