#pragma once

// Single bead chain: planar forward kinematics, tension-induced restoring
// moment and the Coulomb holding capacity of each joint.

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "jamcord/bead_geometry.hpp"
#include "jamcord/errors.hpp"
#include "jamcord/json_util.hpp"
#include "jamcord/units.hpp"

namespace jamcord {

using Vec2 = Eigen::Vector2d;

struct ChainSpec {
  BeadSpec bead;
  std::size_t n_units = 30;
  double unit_pitch = 6.0;         // centre-to-centre, mm
  std::size_t rigid_root_units = 0;
  bool planar = true;              // one-plane constrained
  double mu = 0.3;                 // bead-bead friction
  Angle contact_half_angle = Angle::from_deg(45.0);

  std::size_t n_joints() const noexcept { return n_units - 1; }
  JointRange range() const {
    return joint_range(bead, planar ? BendingMode::OnePlane : BendingMode::Unconstrained);
  }
  bool is_rigid(std::size_t joint) const noexcept { return joint < rigid_root_units; }
  bool operator==(const ChainSpec&) const = default;
};

/// Throws ConfigError on a broken invariant; returns non-fatal warnings.
inline std::vector<std::string> check_chain_spec(const ChainSpec& c) {
  const auto report = validate_bead_spec(c.bead);
  if (!report.valid()) {
    std::string msg;
    for (const auto& v : report.violations) msg += std::string(to_string(v.id)) + " ";
    throw ConfigError("chain.bead", "invalid bead spec: " + msg);
  }
  if (c.n_units < 2) throw ConfigError("chain.n_units", "must be >= 2");
  if (c.rigid_root_units >= c.n_units)
    throw ConfigError("chain.rigid_root_units", "must be < n_units");
  if (!(c.mu > 0.0) || !std::isfinite(c.mu)) throw ConfigError("chain.mu", "must be > 0");
  if (!(c.unit_pitch > 0.0) || !std::isfinite(c.unit_pitch))
    throw ConfigError("chain.unit_pitch", "must be > 0");
  const double a = c.contact_half_angle.deg();
  if (!(a > 0.0 && a <= 90.0)) throw ConfigError("chain.contact_half_angle", "must lie in (0, 90]");
  auto warnings = report.warnings;
  if (c.unit_pitch > c.bead.D1)
    warnings.push_back("unit_pitch exceeds D1: neighbouring beads do not touch");
  return warnings;
}

enum class JointStatus { Stuck, Slipping, AtLimit };

inline const char* to_string(JointStatus s) {
  switch (s) {
    case JointStatus::Stuck: return "Stuck";
    case JointStatus::Slipping: return "Slipping";
    case JointStatus::AtLimit: return "AtLimit";
  }
  return "?";
}

struct ChainState {
  std::vector<Angle> angles;
  double tension = 0.0;
  std::vector<JointStatus> joint_status;

  static ChainState straight(const ChainSpec& c, double tension = 0.0) {
    return {std::vector<Angle>(c.n_joints()), tension,
            std::vector<JointStatus>(c.n_joints(), JointStatus::Stuck)};
  }
  bool operator==(const ChainState&) const = default;
};

/// Throws JointLimitError / InvalidInput when the state breaks its invariants.
inline void check_chain_state(const ChainSpec& c, const ChainState& s) {
  if (s.angles.size() != c.n_joints())
    throw InvalidInput("ChainState.angles: expected " + std::to_string(c.n_joints()) + " entries");
  if (!s.joint_status.empty() && s.joint_status.size() != c.n_joints())
    throw InvalidInput("ChainState.joint_status: size mismatch");
  if (!(s.tension >= 0.0) || !std::isfinite(s.tension))
    throw InvalidInput("ChainState.tension must be finite and >= 0");
  const auto r = c.range();
  for (std::size_t j = 0; j < s.angles.size(); ++j) {
    const Angle a = s.angles[j];
    if (!std::isfinite(a.rad())) throw InvalidInput("ChainState.angles: not finite");
    if (c.is_rigid(j)) {
      if (a.rad() != 0.0) throw JointLimitError(j, a.deg(), 0.0, 0.0);
    } else if (!r.contains(a)) {
      throw JointLimitError(j, a.deg(), r.lower.deg(), r.upper.deg());
    }
  }
}

struct Frame {
  Vec2 position = Vec2::Zero();
  Vec2 heading = Vec2::UnitX();
};

inline Vec2 direction(double heading_rad) { return {std::cos(heading_rad), std::sin(heading_rad)}; }

/// Bead-centre frames without limit checks. Joint j pivots at bead j and
/// turns every segment from j onward; the tip frame carries the heading of
/// the last segment.
inline std::vector<Frame> chain_frames(std::size_t n_units, double pitch, const std::vector<Angle>& angles,
                                       const Frame& base = Frame{}) {
  std::vector<Frame> frames(n_units);
  double heading = std::atan2(base.heading.y(), base.heading.x());
  Vec2 p = base.position;
  for (std::size_t s = 0; s + 1 < n_units; ++s) {
    heading += s < angles.size() ? angles[s].rad() : 0.0;
    const Vec2 u = direction(heading);
    frames[s] = {p, u};
    p += pitch * u;
  }
  frames.back() = {p, n_units > 1 ? frames[n_units - 2].heading : base.heading};
  return frames;
}

inline std::vector<Frame> forward_kinematics(const ChainSpec& c, const std::vector<Angle>& angles,
                                             const Frame& base = Frame{}) {
  check_chain_state(c, ChainState{angles, 0.0, {}});
  return chain_frames(c.n_units, c.unit_pitch, angles, base);
}

/// Moment (N*mm) the tensioned wire exerts toward the straight posture,
/// signed along the deflection: the load that must be applied to hold it.
inline double restoring_moment(const ChainSpec& c, Angle joint_angle, double tension) {
  return tension * wire_path_slope(c.bead, joint_angle.rad());
}

/// Coulomb holding moment of one joint: mu * T * R1 * sin(alpha_c).
inline double friction_capacity(const ChainSpec& c, double tension) {
  return c.mu * tension * c.bead.R1 * std::sin(c.contact_half_angle.rad());
}

struct JointResponse {
  JointStatus status;
  int slip_direction;  // sign of the excess moment; 0 when stuck
};

/// Stick-slip law; the boundary |excess| == capacity sticks.
inline JointResponse joint_response(double load_moment, double capacity, double restoring) {
  const double excess = load_moment - restoring;
  if (std::abs(excess) <= capacity) return {JointStatus::Stuck, 0};
  return {JointStatus::Slipping, excess > 0.0 ? 1 : -1};
}

/// Force at the tip, perpendicular to the lever from the joint, that balances
/// the restoring moment of one deflected joint.
inline double tip_straightening_force(const ChainSpec& c, std::size_t joint, Angle joint_angle,
                                      double tension) {
  const double lever = static_cast<double>(c.n_units - 1 - joint) * c.unit_pitch;
  return std::abs(restoring_moment(c, joint_angle, tension)) / lever;
}

// ---- JSON ------------------------------------------------------------------

inline nlohmann::json to_json(const ChainSpec& c) {
  return {{"bead", to_json(c.bead)},
          {"n_units", c.n_units},
          {"unit_pitch", c.unit_pitch},
          {"rigid_root_units", c.rigid_root_units},
          {"planar", c.planar},
          {"mu", c.mu},
          {"contact_half_angle", c.contact_half_angle.deg()}};
}

inline ChainSpec chain_spec_from_json(const nlohmann::json& j) {
  using namespace json_util;
  constexpr const char* what = "ChainSpec";
  require_object(j, what);
  reject_unknown(j, {"bead", "n_units", "unit_pitch", "rigid_root_units", "planar", "mu",
                     "contact_half_angle"},
                 what);
  ChainSpec c;
  c.bead = bead_spec_from_json(field(j, "bead", what));
  const auto n = integer(j, "n_units", what);
  if (n < 0) throw InvalidInput("ChainSpec.n_units must be non-negative");
  c.n_units = static_cast<std::size_t>(n);
  c.unit_pitch = number_or(j, "unit_pitch", c.bead.D1, what);
  const auto rigid = j.contains("rigid_root_units") ? integer(j, "rigid_root_units", what) : 0;
  if (rigid < 0) throw InvalidInput("ChainSpec.rigid_root_units must be non-negative");
  c.rigid_root_units = static_cast<std::size_t>(rigid);
  c.planar = j.contains("planar") ? boolean(j, "planar", what) : true;
  c.mu = number_or(j, "mu", 0.3, what);
  c.contact_half_angle = Angle::from_deg(number_or(j, "contact_half_angle", 45.0, what));
  return c;
}

inline nlohmann::json to_json(const ChainState& s) {
  nlohmann::json angles = nlohmann::json::array();
  for (auto a : s.angles) angles.push_back(a.deg());
  nlohmann::json status = nlohmann::json::array();
  for (auto st : s.joint_status) status.push_back(to_string(st));
  return {{"angles", angles}, {"tension", s.tension}, {"joint_status", status}};
}

inline ChainState chain_state_from_json(const nlohmann::json& j) {
  using namespace json_util;
  constexpr const char* what = "ChainState";
  require_object(j, what);
  reject_unknown(j, {"angles", "tension", "joint_status"}, what);
  ChainState s;
  const auto& angles = field(j, "angles", what);
  if (!angles.is_array()) throw InvalidInput("ChainState.angles: expected an array");
  for (const auto& a : angles) {
    if (!a.is_number()) throw InvalidInput("ChainState.angles: expected numbers");
    s.angles.push_back(Angle::from_deg(a.get<double>()));
  }
  s.tension = number(j, "tension", what);
  if (j.contains("joint_status")) {
    for (const auto& st : j.at("joint_status")) {
      const auto name = st.get<std::string>();
      if (name == "Stuck") s.joint_status.push_back(JointStatus::Stuck);
      else if (name == "Slipping") s.joint_status.push_back(JointStatus::Slipping);
      else if (name == "AtLimit") s.joint_status.push_back(JointStatus::AtLimit);
      else throw InvalidInput("ChainState.joint_status: unknown status " + name);
    }
  } else {
    s.joint_status.assign(s.angles.size(), JointStatus::Stuck);
  }
  return s;
}

}  // namespace jamcord
