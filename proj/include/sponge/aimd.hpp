#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "sponge/error.hpp"
#include "sponge/fleet.hpp"
#include "sponge/rng.hpp"
#include "sponge/signal.hpp"
#include "sponge/units.hpp"

namespace sponge {

enum class UtilityForm { Quadratic, Linear };

/// Private cost of driving in EV mode as a function of the EV time share.
struct UtilityFunction {
  UtilityForm form = UtilityForm::Quadratic;
  double a = 1.0;

  double value(double x) const { return form == UtilityForm::Quadratic ? a * x * x : a * x; }
  double derivative(double x) const { return form == UtilityForm::Quadratic ? 2.0 * a * x : a; }

  /// f'(x)/x, continued to x = 0 by its limit (2a for the quadratic form).
  double derivative_over_argument(double x) const {
    if (form == UtilityForm::Quadratic) return 2.0 * a;
    return x > 0.0 ? a / x : std::numeric_limits<double>::infinity();
  }
};

struct AimdParams {
  double alpha = 0.004;
  double beta = 0.9;
  std::optional<double> gamma;  // default 1 / (2 max a)
  int congestion_window_ticks = 10;

  friend bool operator==(const AimdParams&, const AimdParams&) = default;
};

struct UtilityConfig {
  UtilityForm form = UtilityForm::Quadratic;
  double a_min = 0.05;
  double a_max = 1.0;

  friend bool operator==(const UtilityConfig&, const UtilityConfig&) = default;
};

struct AimdAgentState {
  double p_ev = 0.0;
  std::int64_t ev_ticks = 0;
  std::int64_t active_ticks = 0;
  UtilityFunction utility;
  double alpha = 0.004;
  double beta = 0.9;
  double gamma = 0.5;
  std::mt19937_64 rng;

  /// EV share of active trip time so far; 0 before the first active tick.
  double share() const {
    return active_ticks > 0 ? static_cast<double>(ev_ticks) / static_cast<double>(active_ticks) : 0.0;
  }
  double derivative() const { return utility.derivative(share()); }
};

inline void validate(const AimdParams& p) {
  if (!(p.alpha > 0.0 && p.alpha <= 1.0)) throw ConfigError("aimd alpha must be in (0, 1]");
  if (!(p.beta > 0.0 && p.beta < 1.0)) throw ConfigError("aimd beta must be in (0, 1)");
  if (p.gamma && !(*p.gamma > 0.0)) throw ConfigError("aimd gamma must be > 0");
  if (p.congestion_window_ticks < 1) throw ConfigError("congestion window must be >= 1 tick");
}

inline void validate(const UtilityConfig& u) {
  if (!(u.a_min > 0.0 && u.a_min <= u.a_max)) {
    throw ConfigError("utility coefficients need 0 < a_min <= a_max");
  }
}

/// One agent per vehicle, with a_i ~ U[a_min, a_max] from the vehicle's own stream.
inline std::vector<AimdAgentState> spawn_agents(std::span<const VehicleState> fleet, std::uint64_t seed,
                                                const AimdParams& params, const UtilityConfig& utility) {
  validate(params);
  validate(utility);
  std::vector<AimdAgentState> agents;
  agents.reserve(fleet.size());
  double a_hi = 0.0;
  for (const auto& v : fleet) {
    auto g = make_stream(seed, v.id, Stream::Utility);
    AimdAgentState s;
    s.utility = UtilityFunction{utility.form, uniform(g, utility.a_min, utility.a_max)};
    s.alpha = params.alpha;
    s.beta = params.beta;
    s.rng = make_stream(seed, v.id, Stream::Backoff);
    a_hi = std::max(a_hi, s.utility.a);
    agents.push_back(std::move(s));
  }
  const double gamma = params.gamma.value_or(a_hi > 0.0 ? 1.0 / (2.0 * a_hi) : 1.0);
  for (auto& s : agents) s.gamma = gamma;
  return agents;
}

inline void additive_increase(AimdAgentState& agent) {
  agent.p_ev = std::min(1.0, agent.p_ev + agent.alpha);
}

inline bool congestion_detect(double achieved_rate_kw, double target_rate_kw) {
  return achieved_rate_kw >= target_rate_kw;
}

/// Moving average of fleet EV dissipation over the last W ticks. Energies are
/// summed as integers so the congestion test is independent of summation order.
class CongestionMonitor {
 public:
  explicit CongestionMonitor(int window_ticks) : buf_(static_cast<std::size_t>(std::max(window_ticks, 1))) {}

  void push(Energy tick_energy) {
    sum_ -= buf_[head_];
    buf_[head_] = tick_energy;
    sum_ += tick_energy;
    head_ = (head_ + 1) % buf_.size();
    count_ = std::min(count_ + 1, buf_.size());
  }

  void reset() {
    std::fill(buf_.begin(), buf_.end(), Energy{});
    sum_ = Energy{};
    head_ = 0;
    count_ = 0;
  }

  /// Average power in kW over the filled part of the window; 0 when empty.
  double rate_kw(double dt_s) const {
    if (count_ == 0) return 0.0;
    return sum_.kwh() * 3600.0 / (static_cast<double>(count_) * dt_s);
  }

 private:
  std::vector<Energy> buf_;
  Energy sum_;
  std::size_t head_ = 0;
  std::size_t count_ = 0;
};

/// Probability that the agent backs off on a congestion event:
/// min(1, gamma * f'(x)/x).
inline double backoff_probability(const AimdAgentState& agent) {
  return std::min(1.0, agent.gamma * agent.utility.derivative_over_argument(agent.share()));
}

/// Returns true if the agent backed off (p_ev scaled by beta).
inline bool backoff_decision(AimdAgentState& agent, const CongestionEvent&) {
  if (bernoulli(agent.rng, backoff_probability(agent))) {
    agent.p_ev *= agent.beta;
    return true;
  }
  return false;
}

inline void update_share(AimdAgentState& agent, DriveMode mode) {
  ++agent.active_ticks;
  if (mode == DriveMode::EV) ++agent.ev_ticks;
}

/// Coefficient of variation (population stdev / mean) of the utility
/// derivatives; absent with fewer than two agents or a zero mean.
inline std::optional<double> consensus_spread(std::span<const double> derivatives) {
  if (derivatives.size() < 2) return std::nullopt;
  const double n = static_cast<double>(derivatives.size());
  const double mean = std::accumulate(derivatives.begin(), derivatives.end(), 0.0) / n;
  if (!(mean > 0.0)) return std::nullopt;
  double ss = 0.0;
  for (double d : derivatives) ss += (d - mean) * (d - mean);
  return std::sqrt(ss / n) / mean;
}

inline std::optional<double> consensus_spread(std::span<const AimdAgentState> agents) {
  std::vector<double> d;
  d.reserve(agents.size());
  for (const auto& a : agents) d.push_back(a.derivative());
  return consensus_spread(std::span<const double>(d));
}

struct KktSolution {
  std::vector<double> shares;
  double multiplier = 0.0;  // common derivative 2 a_i x_i on the unclipped set
};

/// Minimiser of sum a_i x_i^2 subject to sum x_i = total, 0 <= x_i <= 1.
/// Water-filling: x_i = min(1, lambda / (2 a_i)); agents with the smallest
/// a_i saturate first, and lambda is closed-form once the saturated set is known.
inline KktSolution kkt_oracle(std::span<const double> a, double total) {
  const auto n = a.size();
  for (double ai : a) {
    if (!(ai > 0.0) || !std::isfinite(ai)) throw DomainError("utility coefficients must be > 0");
  }
  if (!(total >= 0.0) || total > static_cast<double>(n)) {
    throw DomainError("total share must lie in [0, number of agents]");
  }
  KktSolution sol;
  sol.shares.assign(n, 0.0);
  if (n == 0 || total == 0.0) return sol;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return a[i] < a[j]; });

  // suffix[c] = sum of 1/a over the agents that remain unclipped when c saturate
  std::vector<double> suffix(n + 1, 0.0);
  for (std::size_t c = n; c-- > 0;) suffix[c] = suffix[c + 1] + 1.0 / a[order[c]];

  std::size_t clipped = n;
  double lambda = 2.0 * a[order[n - 1]];
  for (std::size_t c = 0; c < n; ++c) {
    const double lam = 2.0 * (total - static_cast<double>(c)) / suffix[c];
    if (lam <= 2.0 * a[order[c]]) {
      clipped = c;
      lambda = lam;
      break;
    }
  }
  for (std::size_t r = 0; r < n; ++r) {
    const auto i = order[r];
    sol.shares[i] = r < clipped ? 1.0 : lambda / (2.0 * a[i]);
  }
  sol.multiplier = lambda;
  return sol;
}

}  // namespace sponge
