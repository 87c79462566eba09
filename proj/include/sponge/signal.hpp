#pragma once

#include <optional>
#include <variant>

#include "sponge/units.hpp"

namespace sponge {

/// Request that every programme vehicle drive in EV mode with probability p.
struct ModeProbability {
  double p = 0.0;
  friend bool operator==(const ModeProbability&, const ModeProbability&) = default;
};

/// The fleet is released; drivers pick EV or ICE with equal probability.
struct FreeMode {
  friend bool operator==(const FreeMode&, const FreeMode&) = default;
};

/// The fleet's dissipation rate reached the target rate (AIMD only).
struct CongestionEvent {
  friend bool operator==(const CongestionEvent&, const CongestionEvent&) = default;
};

struct BroadcastSignal {
  std::variant<ModeProbability, FreeMode, CongestionEvent> kind;
  Tick tick = 0;

  friend bool operator==(const BroadcastSignal&, const BroadcastSignal&) = default;

  bool is_free() const { return std::holds_alternative<FreeMode>(kind); }
  bool is_congestion() const { return std::holds_alternative<CongestionEvent>(kind); }

  /// Requested probability, if this signal carries one.
  std::optional<double> probability() const {
    if (const auto* m = std::get_if<ModeProbability>(&kind)) return m->p;
    return std::nullopt;
  }
};

inline constexpr double kFreeModeProbability = 0.5;

}  // namespace sponge
