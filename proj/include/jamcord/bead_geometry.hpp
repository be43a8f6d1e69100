#pragma once

// Parametric cup-shaped bead: geometric constraints, wire path length across a
// bead-to-bead interface, and the joint range it admits.

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "jamcord/errors.hpp"
#include "jamcord/json_util.hpp"
#include "jamcord/units.hpp"

namespace jamcord {

enum class BeadVariant { SimpleSphere, CupShaped };

inline const char* to_string(BeadVariant v) {
  return v == BeadVariant::SimpleSphere ? "SimpleSphere" : "CupShaped";
}

struct BeadSpec {
  double D1 = 6.0;   // outer diameter
  double R1 = 3.0;   // bead radius
  double R2 = 3.0;   // front convex radius
  double R3 = 3.0;   // rear concave radius
  double r1 = 2.0;   // hole inner-surface curvature radius
  double r2 = 1.5;   // minimum wire bending radius
  double SD1 = 1.2;  // rear hole diameter
  double SD2 = 0.8;  // wire diameter
  double e = 0.2;    // clearance
  Angle effective_angle = Angle::from_deg(15.0);
  BeadVariant variant = BeadVariant::CupShaped;

  bool operator==(const BeadSpec&) const = default;
};

enum class ConstraintId { EQ1, EQ2, EQ3, POSITIVITY, ANGLE_RANGE };

inline const char* to_string(ConstraintId id) {
  switch (id) {
    case ConstraintId::EQ1: return "EQ1";
    case ConstraintId::EQ2: return "EQ2";
    case ConstraintId::EQ3: return "EQ3";
    case ConstraintId::POSITIVITY: return "POSITIVITY";
    case ConstraintId::ANGLE_RANGE: return "ANGLE_RANGE";
  }
  return "?";
}

struct Violation {
  ConstraintId id;
  std::string message;
  double measured;
  double required;

  bool operator==(const Violation&) const = default;
};

struct ValidationReport {
  std::vector<Violation> violations;
  std::vector<std::string> warnings;  // never affect validity

  bool valid() const noexcept { return violations.empty(); }
  bool has(ConstraintId id) const {
    for (const auto& v : violations)
      if (v.id == id) return true;
    return false;
  }
  bool operator==(const ValidationReport&) const = default;
};

namespace detail {
// Relative tolerance for the radius equalities; tighter than any printable mm value.
inline constexpr double kRadiusTol = 1e-9;

inline bool radius_equal(double a, double b) {
  return std::abs(a - b) <= kRadiusTol * std::max({1.0, std::abs(a), std::abs(b)});
}
}  // namespace detail

/// Checks positivity, the angle range and the three radius/hole relations.
/// Throws InvalidInput on non-finite fields.
inline ValidationReport validate_bead_spec(const BeadSpec& s) {
  const std::array<std::pair<const char*, double>, 9> lengths{{{"D1", s.D1},
                                                              {"R1", s.R1},
                                                              {"R2", s.R2},
                                                              {"R3", s.R3},
                                                              {"r1", s.r1},
                                                              {"r2", s.r2},
                                                              {"SD1", s.SD1},
                                                              {"SD2", s.SD2},
                                                              {"e", s.e}}};
  for (const auto& [name, value] : lengths)
    if (!std::isfinite(value)) throw InvalidInput(std::string("bead.") + name + " is not finite");
  if (!std::isfinite(s.effective_angle.rad()))
    throw InvalidInput("bead.effective_angle is not finite");

  ValidationReport report;
  for (const auto& [name, value] : lengths) {
    if (value <= 0.0) {
      report.violations.push_back({ConstraintId::POSITIVITY,
                                   std::string(name) + " must be > 0", value, 0.0});
    }
  }
  const double ang = s.effective_angle.deg();
  if (!(ang > 0.0 && ang < 90.0)) {
    report.violations.push_back(
        {ConstraintId::ANGLE_RANGE, "effective_angle must lie in (0, 90) deg", ang, 90.0});
  }
  const double half_d = s.D1 / 2.0;
  for (const auto& [name, value] : {std::pair{"R1", s.R1}, {"R2", s.R2}, {"R3", s.R3}}) {
    if (!detail::radius_equal(value, half_d)) {
      report.violations.push_back(
          {ConstraintId::EQ1, std::string(name) + " must equal D1/2", value, half_d});
      break;
    }
  }
  if (!(s.r1 > s.r2)) {
    report.violations.push_back({ConstraintId::EQ2, "r1 must exceed r2", s.r1, s.r2});
  }
  if (!(s.SD1 > s.SD2 + s.e)) {
    report.violations.push_back(
        {ConstraintId::EQ3, "SD1 must exceed SD2 + e", s.SD1, s.SD2 + s.e});
  }

  // Hole-limited tilt, taking D1 as the unit length.
  if (report.valid()) {
    const double hole_tilt = 2.0 * std::atan((s.SD1 - s.SD2) / s.D1);
    if (hole_tilt < s.effective_angle.rad()) {
      report.warnings.push_back("effective_angle " + std::to_string(ang) +
                                " deg exceeds hole-limited tilt " +
                                std::to_string(rad_to_deg(hole_tilt)) + " deg");
    }
  }
  return report;
}

enum class BendingMode { Unconstrained, OnePlane };

struct JointRange {
  Angle lower;
  Angle upper;

  bool contains(Angle a, double slack_rad = 1e-12) const {
    return a.rad() >= lower.rad() - slack_rad && a.rad() <= upper.rad() + slack_rad;
  }
};

inline Angle joint_limit(const BeadSpec& s) { return s.effective_angle; }

/// One-plane constrained joints bend in the positive direction only.
inline JointRange joint_range(const BeadSpec& s, BendingMode mode) {
  if (mode == BendingMode::OnePlane) return {Angle{}, s.effective_angle};
  return {-s.effective_angle, s.effective_angle};
}

// Sphere variant: the wire runs straight along each bead's bore to the shared
// tangent plane and kinks there, so each half of the interface grows from R1
// to R1 / cos(theta / 2). Cup variant: the concave rear keeps the centre line
// on the mating sphere centre and the length does not change.

inline double wire_path_length_unchecked(const BeadSpec& s, double theta) {
  if (s.variant == BeadVariant::CupShaped) return s.D1;
  return s.D1 + 2.0 * s.R1 * (1.0 / std::cos(0.5 * theta) - 1.0);
}

/// dL/dtheta in mm/rad.
inline double wire_path_slope(const BeadSpec& s, double theta) {
  if (s.variant == BeadVariant::CupShaped) return 0.0;
  const double h = 0.5 * theta;
  return s.R1 * std::tan(h) / std::cos(h);
}

/// d2L/dtheta2 in mm/rad^2.
inline double wire_path_curvature(const BeadSpec& s, double theta) {
  if (s.variant == BeadVariant::CupShaped) return 0.0;
  const double h = 0.5 * theta;
  const double sec = 1.0 / std::cos(h);
  const double tan = std::tan(h);
  return 0.5 * s.R1 * sec * (sec * sec + tan * tan);
}

/// Wire length consumed across one interface at the given deflection.
inline double wire_path_length(const BeadSpec& s, Angle joint_angle) {
  const double lim = s.effective_angle.rad();
  if (std::abs(joint_angle.rad()) > lim + 1e-12)
    throw JointLimitError(0, joint_angle.deg(), -s.effective_angle.deg(), s.effective_angle.deg());
  return wire_path_length_unchecked(s, joint_angle.rad());
}

// ---- JSON ------------------------------------------------------------------

inline nlohmann::json to_json(const BeadSpec& s) {
  return {{"D1", s.D1},   {"R1", s.R1},   {"R2", s.R2},   {"R3", s.R3},
          {"r1", s.r1},   {"r2", s.r2},   {"SD1", s.SD1}, {"SD2", s.SD2},
          {"e", s.e},     {"effective_angle", s.effective_angle.deg()},
          {"variant", to_string(s.variant)}};
}

inline BeadSpec bead_spec_from_json(const nlohmann::json& j) {
  using namespace json_util;
  constexpr const char* what = "BeadSpec";
  require_object(j, what);
  reject_unknown(j, {"D1", "R1", "R2", "R3", "r1", "r2", "SD1", "SD2", "e", "effective_angle", "variant"},
                 what);
  BeadSpec s;
  s.D1 = number(j, "D1", what);
  s.R1 = number(j, "R1", what);
  s.R2 = number(j, "R2", what);
  s.R3 = number(j, "R3", what);
  s.r1 = number(j, "r1", what);
  s.r2 = number(j, "r2", what);
  s.SD1 = number(j, "SD1", what);
  s.SD2 = number(j, "SD2", what);
  s.e = number(j, "e", what);
  s.effective_angle = Angle::from_deg(number(j, "effective_angle", what));
  const auto v = string(j, "variant", what);
  if (v == "SimpleSphere") s.variant = BeadVariant::SimpleSphere;
  else if (v == "CupShaped") s.variant = BeadVariant::CupShaped;
  else throw InvalidInput("BeadSpec.variant: expected SimpleSphere or CupShaped, got " + v);
  return s;
}

}  // namespace jamcord
