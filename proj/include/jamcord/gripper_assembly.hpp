#pragma once

// Torus gripper: n chains hung from spring hinges on a ring, tips fastened to
// the equalizer rod, wires pulled by a dual-port pneumatic piston.
//
// Each chain is resolved in its own radial plane: x is the distance from the
// gripper axis, y points down (toward the object), the hinge sits at
// (torus_diameter / 2, 0). Hinge angle 0 hangs the root pipe straight down;
// positive angles close toward the axis.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "jamcord/chain_model.hpp"
#include "jamcord/errors.hpp"
#include "jamcord/json_util.hpp"
#include "jamcord/units.hpp"

namespace jamcord {

struct HingeSpring {
  double stiffness = 4.0;                       // N*mm/deg
  Angle free_angle = Angle::from_deg(-10.0);    // spring rest, open side
  bool operator==(const HingeSpring&) const = default;
};

struct PneumaticState {
  double pressure_A = 0.0;  // kPa gauge, constant-load port
  double pressure_B = 0.0;  // kPa gauge, pull port; negative is vacuum
};

inline void check_pneumatics(const PneumaticState& p) {
  if (!std::isfinite(p.pressure_A) || p.pressure_A < 0.0)
    throw ConfigError("pneumatics.pressure_A", "must be finite and >= 0");
  if (!std::isfinite(p.pressure_B) || p.pressure_B < -101.0)
    throw ConfigError("pneumatics.pressure_B", "must be finite and >= -101");
}

inline ChainSpec prototype_chain_spec() {
  ChainSpec c;
  c.n_units = 30;
  c.unit_pitch = 6.0;
  c.rigid_root_units = 15;
  c.planar = false;  // one bending plane (the radial one), both senses
  return c;
}

struct GripperConfig {
  std::size_t n_chains = 8;
  ChainSpec chain = prototype_chain_spec();
  double torus_diameter = 120.0;  // mm, hinge ring
  double overall_length = 350.0;  // mm
  double stroke = 140.0;          // mm
  HingeSpring hinge_spring;
  double piston_area_A = 1480.0;  // mm^2
  double piston_area_B = 1480.0;  // mm^2
  double wire_tension_limit = 60.0;  // N per chain

  // Model parameters the prototype description leaves open.
  double hinge_lever = 10.0;                          // mm, piston force to hinge moment
  Angle hinge_open_stop = Angle::from_deg(-30.0);
  Angle hinge_closed_stop = Angle::from_deg(45.0);
  double rod_radius = 16.0;         // mm, radius of the tip fastening ring on the rod end
  double extension_depth = 120.0;   // mm below the hinge plane, tip bead at full extension
  double tip_tether_stiffness = 200.0;  // N/mm
  double bead_weight = 0.005;       // N per bead
  double slack_joint_capacity = 0.5;  // N*mm, joint friction left with the wire slack

  double hinge_radius() const { return 0.5 * torus_diameter; }
  bool operator==(const GripperConfig&) const = default;
};

/// Throws ConfigError naming the offending field.
inline void check_gripper_config(const GripperConfig& g) {
  if (g.n_chains < 3) throw ConfigError("n_chains", "must be >= 3");
  check_chain_spec(g.chain);
  auto positive = [](double v) { return std::isfinite(v) && v > 0.0; };
  if (!positive(g.torus_diameter) || !(g.torus_diameter > g.chain.bead.D1))
    throw ConfigError("torus_diameter", "must exceed the bead diameter D1");
  if (!positive(g.overall_length)) throw ConfigError("overall_length", "must be > 0");
  if (!positive(g.stroke) || !(g.stroke < g.overall_length))
    throw ConfigError("stroke", "must be > 0 and < overall_length");
  if (!positive(g.hinge_spring.stiffness)) throw ConfigError("hinge_spring.stiffness", "must be > 0");
  if (!positive(g.piston_area_A)) throw ConfigError("piston_area_A", "must be > 0");
  if (!positive(g.piston_area_B)) throw ConfigError("piston_area_B", "must be > 0");
  if (!positive(g.wire_tension_limit)) throw ConfigError("wire_tension_limit", "must be > 0");
  if (!positive(g.hinge_lever)) throw ConfigError("hinge_lever", "must be > 0");
  if (!(g.hinge_open_stop < g.hinge_closed_stop))
    throw ConfigError("hinge_open_stop", "must be below hinge_closed_stop");
  if (g.hinge_spring.free_angle < g.hinge_open_stop || g.hinge_closed_stop < g.hinge_spring.free_angle)
    throw ConfigError("hinge_spring.free_angle", "must lie between the stops");
  if (!(g.rod_radius >= 0.0) || !(g.rod_radius < g.hinge_radius()))
    throw ConfigError("rod_radius", "must lie in [0, torus_diameter / 2)");
  const double span = static_cast<double>(g.chain.n_units - 1) * g.chain.unit_pitch;
  const double reach = std::hypot(g.hinge_radius() - g.rod_radius, g.extension_depth);
  if (!positive(g.extension_depth) || !(reach < span))
    throw ConfigError("extension_depth", "tip at full extension must be reachable by the chain");
  if (!positive(g.tip_tether_stiffness)) throw ConfigError("tip_tether_stiffness", "must be > 0");
  if (!(g.bead_weight >= 0.0) || !std::isfinite(g.bead_weight))
    throw ConfigError("bead_weight", "must be finite and >= 0");
  if (!(g.slack_joint_capacity >= 0.0) || !std::isfinite(g.slack_joint_capacity))
    throw ConfigError("slack_joint_capacity", "must be finite and >= 0");
}

struct GripperState {
  std::vector<ChainState> chains;
  std::vector<Angle> hinge_angles;
  double equalizer_position = 0.0;  // mm of rod extension, stroke when fully extended
  bool operator==(const GripperState&) const = default;
};

/// Azimuth of chain i around the gripper axis.
inline Angle chain_azimuth(const GripperConfig& g, std::size_t i) {
  return Angle::from_rad(2.0 * kPi * static_cast<double>(i) / static_cast<double>(g.n_chains));
}

inline GripperState build_gripper(const GripperConfig& g) {
  check_gripper_config(g);
  GripperState s;
  s.chains.assign(g.n_chains, ChainState::straight(g.chain, 0.0));
  s.hinge_angles.assign(g.n_chains, g.hinge_spring.free_angle);
  s.equalizer_position = g.stroke;
  return s;
}

/// Net piston force shared equally by the wires, clamped to the wire limit.
inline double equalizer_tension(const GripperConfig& g, const PneumaticState& p) {
  check_pneumatics(p);
  const double net = pressure_force_N(p.pressure_B, g.piston_area_B) - pressure_force_N(p.pressure_A, g.piston_area_A);
  return std::min(std::max(0.0, net) / static_cast<double>(g.n_chains), g.wire_tension_limit);
}

/// Closing moment the equalizer puts on each hinge, N*mm.
inline double hinge_closing_moment(const GripperConfig& g, const PneumaticState& p) {
  return g.hinge_lever * equalizer_tension(g, p);
}

/// Hinge balance without the chains: spring toward the free angle against the
/// equalizer closing moment plus external moments (positive closes), clipped
/// to the mechanical stops.
inline std::vector<Angle> hinge_state(const GripperConfig& g, const PneumaticState& p,
                                      const std::vector<double>& external_moments) {
  check_gripper_config(g);
  if (!external_moments.empty() && external_moments.size() != g.n_chains)
    throw InvalidInput("hinge_state: one external moment per chain expected");
  const double closing = hinge_closing_moment(g, p);
  std::vector<Angle> out(g.n_chains);
  for (std::size_t i = 0; i < g.n_chains; ++i) {
    const double m = closing + (external_moments.empty() ? 0.0 : external_moments[i]);
    const double deg = g.hinge_spring.free_angle.deg() + m / g.hinge_spring.stiffness;
    out[i] = Angle::from_deg(std::clamp(deg, g.hinge_open_stop.deg(), g.hinge_closed_stop.deg()));
  }
  return out;
}

/// Tensions off, hinges back at the free angle, chains straightened by the
/// tip fastening, rod fully extended.
inline GripperState release(const GripperConfig& g, const GripperState&) { return build_gripper(g); }

// ---- JSON ------------------------------------------------------------------

inline nlohmann::json to_json(const GripperConfig& g) {
  return {{"n_chains", g.n_chains},
          {"chain", to_json(g.chain)},
          {"torus_diameter", g.torus_diameter},
          {"overall_length", g.overall_length},
          {"stroke", g.stroke},
          {"hinge_spring", {{"stiffness", g.hinge_spring.stiffness}, {"free_angle", g.hinge_spring.free_angle.deg()}}},
          {"piston_area_A", g.piston_area_A},
          {"piston_area_B", g.piston_area_B},
          {"wire_tension_limit", g.wire_tension_limit},
          {"hinge_lever", g.hinge_lever},
          {"hinge_open_stop", g.hinge_open_stop.deg()},
          {"hinge_closed_stop", g.hinge_closed_stop.deg()},
          {"rod_radius", g.rod_radius},
          {"extension_depth", g.extension_depth},
          {"tip_tether_stiffness", g.tip_tether_stiffness},
          {"bead_weight", g.bead_weight},
          {"slack_joint_capacity", g.slack_joint_capacity}};
}

/// Fields other than n_chains and chain fall back to the defaults.
inline GripperConfig gripper_config_from_json(const nlohmann::json& j) {
  using namespace json_util;
  constexpr const char* what = "GripperConfig";
  require_object(j, what);
  reject_unknown(j,
                 {"n_chains", "chain", "torus_diameter", "overall_length", "stroke", "hinge_spring",
                  "piston_area_A", "piston_area_B", "wire_tension_limit", "hinge_lever", "hinge_open_stop",
                  "hinge_closed_stop", "rod_radius", "extension_depth", "tip_tether_stiffness", "bead_weight",
                  "slack_joint_capacity"},
                 what);
  GripperConfig g;
  const auto n = integer(j, "n_chains", what);
  if (n < 0) throw InvalidInput("GripperConfig.n_chains must be non-negative");
  g.n_chains = static_cast<std::size_t>(n);
  g.chain = chain_spec_from_json(field(j, "chain", what));
  g.torus_diameter = number_or(j, "torus_diameter", g.torus_diameter, what);
  g.overall_length = number_or(j, "overall_length", g.overall_length, what);
  g.stroke = number_or(j, "stroke", g.stroke, what);
  if (j.contains("hinge_spring")) {
    const auto& h = j.at("hinge_spring");
    require_object(h, "hinge_spring");
    reject_unknown(h, {"stiffness", "free_angle"}, "hinge_spring");
    g.hinge_spring.stiffness = number_or(h, "stiffness", g.hinge_spring.stiffness, "hinge_spring");
    g.hinge_spring.free_angle =
        Angle::from_deg(number_or(h, "free_angle", g.hinge_spring.free_angle.deg(), "hinge_spring"));
  }
  g.piston_area_A = number_or(j, "piston_area_A", g.piston_area_A, what);
  g.piston_area_B = number_or(j, "piston_area_B", g.piston_area_B, what);
  g.wire_tension_limit = number_or(j, "wire_tension_limit", g.wire_tension_limit, what);
  g.hinge_lever = number_or(j, "hinge_lever", g.hinge_lever, what);
  g.hinge_open_stop = Angle::from_deg(number_or(j, "hinge_open_stop", g.hinge_open_stop.deg(), what));
  g.hinge_closed_stop = Angle::from_deg(number_or(j, "hinge_closed_stop", g.hinge_closed_stop.deg(), what));
  g.rod_radius = number_or(j, "rod_radius", g.rod_radius, what);
  g.extension_depth = number_or(j, "extension_depth", g.extension_depth, what);
  g.tip_tether_stiffness = number_or(j, "tip_tether_stiffness", g.tip_tether_stiffness, what);
  g.bead_weight = number_or(j, "bead_weight", g.bead_weight, what);
  g.slack_joint_capacity = number_or(j, "slack_joint_capacity", g.slack_joint_capacity, what);
  return g;
}

inline nlohmann::json to_json(const GripperState& s) {
  nlohmann::json chains = nlohmann::json::array();
  for (const auto& c : s.chains) chains.push_back(to_json(c));
  nlohmann::json hinges = nlohmann::json::array();
  for (auto a : s.hinge_angles) hinges.push_back(a.deg());
  return {{"chains", chains}, {"hinge_angles", hinges}, {"equalizer_position", s.equalizer_position}};
}

}  // namespace jamcord
