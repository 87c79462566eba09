#pragma once

#include <algorithm>
#include <optional>

#include "sponge/signal.hpp"
#include "sponge/target.hpp"
#include "sponge/units.hpp"

namespace sponge {

enum class ControllerMode { Sponge, ExactSponge };

/// Gains as configured. An absent kp/ki is resolved per window as
/// scale / target_total, so the default loop gain does not depend on the
/// size of the forecast.
struct ControllerGains {
  std::optional<double> kp;  // 1/kWh
  std::optional<double> ki;  // 1/(kWh*s)

  friend bool operator==(const ControllerGains&, const ControllerGains&) = default;
};

// Basic SPONGE must cross the total in finite time, so its P gain saturates
// until the gap is within 2% of the target.
inline constexpr double kSpongeKpScale = 50.0;
inline constexpr double kExactKpScale = 2.0;
inline constexpr double kExactKiScale = 0.02;  // 1/s

struct ControllerState {
  ControllerMode mode = ControllerMode::Sponge;
  double kp = 0.0;
  double ki = 0.0;
  double integral_error = 0.0;  // kWh*s
  bool cutoff = false;          // exact SPONGE: window target met
  TargetTrajectory reference;
};

/// Fresh controller for one window; the integral never survives a boundary.
inline ControllerState make_controller(ControllerMode mode, const ControllerGains& gains,
                                       const TargetTrajectory& reference) {
  const double total = reference.target_total.kwh();
  const double norm = total > 0.0 ? total : 1.0;
  ControllerState s;
  s.mode = mode;
  s.reference = reference;
  const bool exact = mode == ControllerMode::ExactSponge;
  s.kp = gains.kp.value_or((exact ? kExactKpScale : kSpongeKpScale) / norm);
  s.ki = exact ? gains.ki.value_or(kExactKiScale / norm) : 0.0;
  return s;
}

/// Basic SPONGE. The gap is measured against the window's total target: once
/// the fleet has freed that much battery space it is released (Free);
/// otherwise p = clamp(kp * gap, 0, 1).
inline BroadcastSignal proportional_update(const ControllerState& state, Energy achieved, Tick tick) {
  const double gap = (state.reference.target_total - achieved).kwh();
  if (gap <= 0.0) return BroadcastSignal{FreeMode{}, tick};
  return BroadcastSignal{ModeProbability{std::clamp(state.kp * gap, 0.0, 1.0)}, tick};
}

/// Exact SPONGE. PI law on the gap to the window total; once the total is met
/// every vehicle is held in ICE mode for the rest of the window. Integration is
/// skipped on ticks where it would push a saturated output further.
inline BroadcastSignal pi_update(ControllerState& state, Energy achieved, Tick tick, double dt_s) {
  if (state.cutoff || achieved >= state.reference.target_total) {
    state.cutoff = true;
    return BroadcastSignal{ModeProbability{0.0}, tick};
  }
  const double gap = (state.reference.target_total - achieved).kwh();
  const double trial = state.kp * gap + state.ki * (state.integral_error + gap * dt_s);
  const bool winds_up = (trial > 1.0 && gap > 0.0) || (trial < 0.0 && gap < 0.0);
  if (!winds_up) state.integral_error += gap * dt_s;
  const double p = std::clamp(state.kp * gap + state.ki * state.integral_error, 0.0, 1.0);
  return BroadcastSignal{ModeProbability{p}, tick};
}

inline BroadcastSignal controller_update(ControllerState& state, Energy achieved, Tick tick, double dt_s) {
  return state.mode == ControllerMode::Sponge ? proportional_update(state, achieved, tick)
                                              : pi_update(state, achieved, tick, dt_s);
}

}  // namespace sponge
