#pragma once

#include <cmath>
#include <compare>
#include <cstdint>
#include <limits>
#include <ostream>
#include <stdexcept>

namespace sponge {

using Tick = std::int64_t;

/// Battery/fuel energy held as an integer count of millijoules so that
/// bookkeeping identities (initial - current == dissipated) hold exactly.
class Energy {
 public:
  static constexpr double kMillijoulePerKwh = 3.6e9;
  static constexpr double kMillijoulePerKj = 1.0e6;

  constexpr Energy() = default;
  static constexpr Energy from_mj(std::int64_t mj) { return Energy(mj); }

  static Energy from_kwh(double kwh) { return Energy(to_count(kwh * kMillijoulePerKwh)); }
  static Energy from_kj(double kj) { return Energy(to_count(kj * kMillijoulePerKj)); }

  constexpr std::int64_t mj() const { return mj_; }
  constexpr double kwh() const { return static_cast<double>(mj_) / kMillijoulePerKwh; }

  constexpr Energy& operator+=(Energy o) { mj_ += o.mj_; return *this; }
  constexpr Energy& operator-=(Energy o) { mj_ -= o.mj_; return *this; }
  friend constexpr Energy operator+(Energy a, Energy b) { return Energy(a.mj_ + b.mj_); }
  friend constexpr Energy operator-(Energy a, Energy b) { return Energy(a.mj_ - b.mj_); }
  friend constexpr Energy operator*(Energy a, std::int64_t k) { return Energy(a.mj_ * k); }
  friend constexpr Energy operator*(std::int64_t k, Energy a) { return Energy(a.mj_ * k); }
  friend constexpr auto operator<=>(Energy, Energy) = default;

 private:
  constexpr explicit Energy(std::int64_t mj) : mj_(mj) {}

  static std::int64_t to_count(double v) {
    if (!std::isfinite(v) || std::fabs(v) > 9.0e18) {
      throw std::domain_error("energy value out of representable range");
    }
    return std::llround(v);
  }

  std::int64_t mj_ = 0;
};

constexpr Energy max(Energy a, Energy b) { return a < b ? b : a; }
constexpr Energy min(Energy a, Energy b) { return b < a ? b : a; }

inline std::ostream& operator<<(std::ostream& os, Energy e) { return os << e.mj() << " mJ"; }

/// Energy drawn by a constant power over one tick.
inline Energy energy_per_tick(double power_kw, double dt_s) {
  return Energy::from_kj(power_kw * dt_s);
}

}  // namespace sponge
