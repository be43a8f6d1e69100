#pragma once

#include <cmath>
#include <numbers>

namespace jamcord {

inline constexpr double kPi = std::numbers::pi;

constexpr double deg_to_rad(double deg) noexcept { return deg * kPi / 180.0; }
constexpr double rad_to_deg(double rad) noexcept { return rad * 180.0 / kPi; }

/// Planar angle. Stored in radians; degrees are the serialized unit.
class Angle {
 public:
  constexpr Angle() = default;

  static constexpr Angle from_deg(double deg) noexcept { return Angle(deg_to_rad(deg)); }
  static constexpr Angle from_rad(double rad) noexcept { return Angle(rad); }

  constexpr double rad() const noexcept { return rad_; }
  constexpr double deg() const noexcept { return rad_to_deg(rad_); }

  constexpr Angle operator-() const noexcept { return Angle(-rad_); }
  constexpr Angle operator+(Angle o) const noexcept { return Angle(rad_ + o.rad_); }
  constexpr Angle operator-(Angle o) const noexcept { return Angle(rad_ - o.rad_); }
  constexpr Angle operator*(double s) const noexcept { return Angle(rad_ * s); }
  constexpr auto operator<=>(const Angle&) const = default;

 private:
  constexpr explicit Angle(double rad) noexcept : rad_(rad) {}
  double rad_ = 0.0;
};

constexpr Angle operator""_deg(long double d) noexcept {
  return Angle::from_deg(static_cast<double>(d));
}
constexpr Angle operator""_deg(unsigned long long d) noexcept {
  return Angle::from_deg(static_cast<double>(d));
}

/// kPa acting on mm^2 gives mN; this returns N.
constexpr double pressure_force_N(double pressure_kPa, double area_mm2) noexcept {
  return pressure_kPa * area_mm2 * 1e-3;
}

}  // namespace jamcord
